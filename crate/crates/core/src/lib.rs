//! Fock-basis matrix elements of multimode bosonic Gaussian unitaries,
//! computed as loop hafnians of derived matrices, and their application to
//! Franck-Condon factors and vibronic spectra in the harmonic approximation.
//!
//! The crate is organized around a small set of layers:
//!
//! * [`matchgraph`] — exact enumeration of perfect matchings (with and
//!   without loops) and brute-force hafnian / loop-hafnian / permanent
//!   evaluation. Slow by construction; this is the ground-truth oracle.
//! * [`hafnian`] — the fast loop-hafnian kernel (subset inclusion-exclusion
//!   over power traces, `O(n^3 2^(n/2))`), the repetition expansion used by
//!   the amplitude pipeline, and a by-name strategy registry so callers can
//!   switch between the kernel and the enumeration oracle at runtime.
//! * [`gaussian`] — Gaussian unitaries as Heisenberg-picture linear maps on
//!   mode operators: elementary constructors, composition, Bloch-Messiah
//!   decomposition, and the SVD factorization used for Doktorov operators.
//! * [`amplitude`] — the pipeline mapping `<m| D(α) U(U) S(λ) U(U') |n>` to
//!   `ν = R · T · lhaf(B̄)` via mode doubling and repetition expansion.
//! * [`fock_oracle`] — an independent brute-force verifier that applies
//!   truncated Fock-space matrices of the same operators by direct linear
//!   algebra, with quantified truncation leakage.
//! * [`vibronic`] — the chemistry-facing layer: Duschinsky/Doktorov assembly
//!   from Hessians or precomputed mode data, FCF evaluation, and spectra.
//! * [`io`] — the JSON and CSV file formats shared with the CLI.

pub mod amplitude;
pub mod fock_oracle;
pub mod gaussian;
pub mod hafnian;
pub mod io;
pub mod linalg;
pub mod matchgraph;
pub mod vibronic;

pub use num_complex::Complex64;
