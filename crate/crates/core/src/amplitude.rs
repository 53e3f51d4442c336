//! The amplitude pipeline: Fock-basis matrix elements of Gaussian unitaries
//! as loop hafnians.
//!
//! The target quantity is
//!
//! ```text
//! ν = <m| D(α) U(U) S(λ) U(U') |n>
//! ```
//!
//! computed by (1) doubling the modes and converting the ket photons into
//! measured ancilla photons with two-mode squeezers, (2) Bloch-Messiah
//! factoring the doubled map, (3) assembling `B = Ũ tanh(Λ̃) Ũᵀ` and
//! `ζ = α̃ - B α̃*`, (4) expanding rows/columns by the photon multiset and
//! placing `ζ` on the diagonal, and (5) evaluating `ν = R · T · lhaf(B̄)`
//! with the fast kernel. When every displacement vanishes the diagonal is
//! zero, the plain hafnian applies, and odd total photon number gives an
//! exact zero without touching the kernel.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::gaussian::{
    bloch_messiah, compose, passive_map, squeeze_map, two_mode_squeeze_map, BlochMessiahFactors,
    GaussTolerances, GaussianError,
};
use crate::hafnian::{
    expand_repetition, haf_fast, lhaf_fast, HafnianError, KernelOptions, RepetitionVector,
};
use crate::linalg::{self, symmetrize, CMat, CVec, RVec};
use crate::matchgraph::SymmetricMatrix;

/// Displacements below this are treated as exactly zero when deciding
/// between the loop-hafnian and hafnian kernels.
const ZETA_ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum AmplitudeError {
    #[error("invalid amplitude spec: {0}")]
    InvalidSpec(String),
    #[error("two-mode squeezing parameter for mode {mode} must be positive when n_j >= 1, got {t}")]
    InvalidSqueezeParameter { mode: usize, t: f64 },
    #[error("prefactor exponent {0} is outside the representable range")]
    Overflow(f64),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Hafnian(#[from] HafnianError),
}

/// The tuple `(m, n, α, U, λ, U')` defining the amplitude
/// `<m| D(α) U(U) S(λ) U(U') |n>`.
#[derive(Debug, Clone)]
pub struct AmplitudeSpec {
    pub(crate) m: Vec<usize>,
    pub(crate) n: Vec<usize>,
    pub(crate) alpha: CVec,
    pub(crate) u: CMat,
    pub(crate) u_prime: CMat,
    pub(crate) lambda: RVec,
}

impl AmplitudeSpec {
    pub fn new(
        m: Vec<usize>,
        n: Vec<usize>,
        alpha: CVec,
        u: CMat,
        u_prime: CMat,
        lambda: RVec,
    ) -> Result<Self, AmplitudeError> {
        let l = m.len();
        if n.len() != l || alpha.len() != l || lambda.len() != l {
            return Err(AmplitudeError::InvalidSpec(format!(
                "vector lengths disagree: m={}, n={}, alpha={}, lambda={}",
                m.len(),
                n.len(),
                alpha.len(),
                lambda.len()
            )));
        }
        for (name, mat) in [("U", &u), ("Uprime", &u_prime)] {
            if mat.nrows() != l || mat.ncols() != l {
                return Err(AmplitudeError::InvalidSpec(format!(
                    "{name} is {}x{}, expected {l}x{l}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            let uerr = linalg::unitarity_error(mat);
            if uerr > 1e-10 {
                return Err(AmplitudeError::InvalidSpec(format!(
                    "{name} is not unitary: residual {uerr:.3e}"
                )));
            }
        }
        Ok(AmplitudeSpec {
            m,
            n,
            alpha,
            u,
            u_prime,
            lambda,
        })
    }

    /// The identity map on `l` modes between Fock states `m` and `n`.
    pub fn identity(m: Vec<usize>, n: Vec<usize>) -> Result<Self, AmplitudeError> {
        let l = m.len();
        Self::new(
            m,
            n,
            CVec::zeros(l),
            CMat::identity(l, l),
            CMat::identity(l, l),
            RVec::zeros(l),
        )
    }

    pub fn modes(&self) -> usize {
        self.m.len()
    }

    pub fn bra_photons(&self) -> &[usize] {
        &self.m
    }

    pub fn ket_photons(&self) -> &[usize] {
        &self.n
    }

    pub fn alpha(&self) -> &CVec {
        &self.alpha
    }

    pub fn unitary(&self) -> &CMat {
        &self.u
    }

    pub fn unitary_prime(&self) -> &CMat {
        &self.u_prime
    }

    pub fn lambda(&self) -> &RVec {
        &self.lambda
    }

    pub fn total_photons(&self) -> usize {
        self.m.iter().sum::<usize>() + self.n.iter().sum::<usize>()
    }
}

/// Knobs for the amplitude pipeline.
#[derive(Debug, Clone, Default)]
pub struct AmplitudeOptions {
    pub kernel: KernelOptions,
    pub gauss: GaussTolerances,
    /// When the ket is vacuum, work directly on the `l`-mode map instead of
    /// doubling; must agree with the doubled path to 1e-12.
    pub skip_doubling_for_zero_ket: bool,
    /// Override the two-mode squeezing parameters (one per mode, used where
    /// `n_j >= 1`; any positive value is mathematically equivalent). The
    /// default is `t_j = asinh(√n_j)`, which maximizes the prefactor `R`.
    pub two_mode_t: Option<Vec<f64>>,
}

/// The mode-doubled reformulation of an [`AmplitudeSpec`] with the ket moved
/// into ancilla measurements.
#[derive(Debug, Clone)]
pub struct DoubledProblem {
    /// Photon multiplicities `(m_1..m_l, n_1..n_l)`.
    pub p: RepetitionVector,
    /// Displacements `(α, 0)`.
    pub alpha_tilde: CVec,
    /// Two-mode squeezing parameters per physical mode.
    pub t: RVec,
    /// Bloch-Messiah factors of the doubled Gaussian map.
    pub factors: BlochMessiahFactors,
}

fn squeeze_parameters(n: &[usize], override_t: Option<&[f64]>) -> Result<RVec, AmplitudeError> {
    let l = n.len();
    let mut t = RVec::zeros(l);
    for j in 0..l {
        let tj = match override_t {
            Some(ts) => ts[j],
            None if n[j] >= 1 => (n[j] as f64).sqrt().asinh(),
            None => 0.0,
        };
        if n[j] >= 1 && tj <= 0.0 {
            return Err(AmplitudeError::InvalidSqueezeParameter { mode: j, t: tj });
        }
        t[j] = tj;
    }
    Ok(t)
}

/// Builds the doubled 2l-mode map
/// `Q = (U ⊗ I)(S(λ) ⊗ I)(U' ⊗ I) T(t)` with `t_j = asinh(√n_j)` and runs
/// its Bloch-Messiah decomposition. All `l` modes are doubled even when
/// `n_j = 0` (with `t_j = 0`); the `p_j = 0` drop rule removes the idle
/// ancillas later.
pub fn build_doubled(
    spec: &AmplitudeSpec,
    opts: &AmplitudeOptions,
) -> Result<DoubledProblem, AmplitudeError> {
    let l = spec.modes();
    if let Some(ts) = &opts.two_mode_t {
        if ts.len() != l {
            return Err(AmplitudeError::InvalidSpec(format!(
                "t override has length {}, expected {l}",
                ts.len()
            )));
        }
    }
    let t = squeeze_parameters(&spec.n, opts.two_mode_t.as_deref())?;

    let big = 2 * l;
    let embed = |u: &CMat| {
        CMat::from_fn(big, big, |i, j| {
            if i < l && j < l {
                u[(i, j)]
            } else if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    };
    let lambda_big = RVec::from_fn(big, |i, _| if i < l { spec.lambda[i] } else { 0.0 });

    let mut q = compose(
        &passive_map(&embed(&spec.u), &opts.gauss)?,
        &compose(
            &squeeze_map(&lambda_big),
            &passive_map(&embed(&spec.u_prime), &opts.gauss)?,
        )?,
    )?;
    for k in 0..l {
        if t[k] != 0.0 {
            q = compose(&q, &two_mode_squeeze_map(big, t[k], k, l + k)?)?;
        }
    }

    let factors = bloch_messiah(&q, &opts.gauss)?;
    let mut p = Vec::with_capacity(big);
    p.extend_from_slice(&spec.m);
    p.extend_from_slice(&spec.n);
    let alpha_tilde = CVec::from_fn(big, |i, _| {
        if i < l {
            spec.alpha[i]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(DoubledProblem {
        p: RepetitionVector::new(p),
        alpha_tilde,
        t,
        factors,
    })
}

/// `B = Ũ tanh(Λ̃) Ũᵀ` (symmetrized) and `ζ = α̃ - B α̃*`. Only `Ũ` and `λ̃`
/// enter: the rightmost passive factor acts trivially on vacuum.
pub fn assemble_b_zeta(
    factors: &BlochMessiahFactors,
    alpha_tilde: &CVec,
) -> (SymmetricMatrix, CVec) {
    let n = factors.modes();
    let tanh = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(factors.lambda[i].tanh(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let b_raw = symmetrize(&(&factors.u * tanh * factors.u.transpose()));
    let b = SymmetricMatrix::from_fn(n, |i, j| b_raw[(i, j)]);
    let zeta = alpha_tilde - b.as_matrix() * alpha_tilde.map(|z| z.conj());
    (b, zeta)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// The prefactors of the final formula `ν = R T lhaf(B̄)`:
/// `R = Π_j (tanh^{n_j} t_j / cosh t_j)^{-1}` and
/// `T = exp(-½(|α̃|² - α̃† B α̃*)) / √(Π_j p_j! cosh λ̃_j)` with the product
/// running over all `2l` values of `λ̃`. Both are assembled in log space so
/// large photon numbers stay representable.
pub fn prefactors(
    n_ket: &[usize],
    doubled: &DoubledProblem,
    b: &SymmetricMatrix,
) -> Result<(f64, C64), AmplitudeError> {
    let log_r = log_r_prefactor(n_ket, &doubled.t);
    let w = t_exponent(&doubled.alpha_tilde, b)
        + C64::new(
            log_t_denominator(&doubled.p, &doubled.factors.lambda),
            0.0,
        );
    if !w.re.is_finite() || !log_r.is_finite() || (w.re + log_r).abs() > 700.0 {
        return Err(AmplitudeError::Overflow(w.re + log_r));
    }
    Ok((log_r.exp(), w.exp()))
}

fn log_r_prefactor(n_ket: &[usize], t: &RVec) -> f64 {
    n_ket
        .iter()
        .zip(t.iter())
        .map(|(&nj, &tj)| {
            if tj == 0.0 {
                0.0
            } else {
                tj.cosh().ln() - (nj as f64) * tj.tanh().ln()
            }
        })
        .sum()
}

/// `-½ (|α̃|² - α̃† B α̃*)`.
fn t_exponent(alpha_tilde: &CVec, b: &SymmetricMatrix) -> C64 {
    let alpha_conj = alpha_tilde.map(|z| z.conj());
    let quad: C64 = (alpha_conj.transpose() * b.as_matrix() * &alpha_conj)[(0, 0)];
    let norm_sq: f64 = alpha_tilde.iter().map(|z| z.norm_sqr()).sum();
    -0.5 * (C64::new(norm_sq, 0.0) - quad)
}

/// `-½ Σ_j (ln p_j! + ln cosh λ̃_j)`.
fn log_t_denominator(p: &RepetitionVector, lambda: &RVec) -> f64 {
    let lf: f64 = p.as_slice().iter().map(|&pj| ln_factorial(pj)).sum();
    let lc: f64 = lambda.iter().map(|&l| l.cosh().ln()).sum();
    -0.5 * (lf + lc)
}

/// Prepared state for evaluating many bra vectors `m` against a fixed map
/// and ket `n`: the doubled Bloch-Messiah factors, `B`, `ζ` and the
/// `m`-independent prefactor parts are computed once and shared.
#[derive(Debug, Clone)]
pub struct AmplitudeEngine {
    l: usize,
    n_ket: Vec<usize>,
    b: SymmetricMatrix,
    zeta: CVec,
    zeta_is_zero: bool,
    /// `ln R - ½ Σ ln cosh λ̃` plus the complex displacement exponent;
    /// everything in the prefactors except the `p_j!` terms.
    base_exponent: C64,
    kernel: KernelOptions,
    doubled: bool,
}

impl AmplitudeEngine {
    /// Builds the engine from the map and ket of `spec`; the bra `m` stored
    /// in the spec is not consulted here, it is supplied per evaluation.
    pub fn for_spec(spec: &AmplitudeSpec, opts: &AmplitudeOptions) -> Result<Self, AmplitudeError> {
        let l = spec.modes();
        let ket_is_vacuum = spec.n.iter().all(|&nj| nj == 0);
        if opts.skip_doubling_for_zero_ket && ket_is_vacuum {
            let map = compose(
                &passive_map(&spec.u, &opts.gauss)?,
                &compose(
                    &squeeze_map(&spec.lambda),
                    &passive_map(&spec.u_prime, &opts.gauss)?,
                )?,
            )?;
            let factors = bloch_messiah(&map, &opts.gauss)?;
            let (b, zeta) = assemble_b_zeta(&factors, &spec.alpha);
            let zeta_is_zero = linalg::max_abs_vec(&zeta) <= ZETA_ZERO_THRESHOLD;
            let base_exponent = t_exponent(&spec.alpha, &b)
                + C64::new(
                    -0.5 * factors.lambda.iter().map(|&x| x.cosh().ln()).sum::<f64>(),
                    0.0,
                );
            return Ok(AmplitudeEngine {
                l,
                n_ket: spec.n.clone(),
                b,
                zeta,
                zeta_is_zero,
                base_exponent,
                kernel: opts.kernel.clone(),
                doubled: false,
            });
        }

        let doubled = build_doubled(spec, opts)?;
        let (b, zeta) = assemble_b_zeta(&doubled.factors, &doubled.alpha_tilde);
        let zeta_is_zero = linalg::max_abs_vec(&zeta) <= ZETA_ZERO_THRESHOLD;
        let log_r = log_r_prefactor(&spec.n, &doubled.t);
        let base_exponent = t_exponent(&doubled.alpha_tilde, &b)
            + C64::new(
                log_r
                    - 0.5
                        * doubled
                            .factors
                            .lambda
                            .iter()
                            .map(|&x| x.cosh().ln())
                            .sum::<f64>(),
                0.0,
            );
        Ok(AmplitudeEngine {
            l,
            n_ket: spec.n.clone(),
            b,
            zeta,
            zeta_is_zero,
            base_exponent,
            kernel: opts.kernel.clone(),
            doubled: true,
        })
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    /// `ν` for the bra photon numbers `m`, sharing all prepared state.
    pub fn amplitude_for(&self, m: &[usize]) -> Result<C64, AmplitudeError> {
        if m.len() != self.l {
            return Err(AmplitudeError::InvalidSpec(format!(
                "bra has {} modes, expected {}",
                m.len(),
                self.l
            )));
        }
        let mut p = Vec::with_capacity(2 * self.l);
        p.extend_from_slice(m);
        if self.doubled {
            p.extend_from_slice(&self.n_ket);
        }
        let p = RepetitionVector::new(p);
        let total = p.total();

        // Parity fast path: with zero displacement an odd number of photons
        // cannot be produced by pair creation alone.
        if self.zeta_is_zero && total % 2 == 1 {
            return Ok(C64::new(0.0, 0.0));
        }

        let exponent = self.base_exponent + C64::new(log_t_denominator(&p, &RVec::zeros(0)), 0.0);
        if !exponent.re.is_finite() || exponent.re.abs() > 700.0 {
            return Err(AmplitudeError::Overflow(exponent.re));
        }

        let expanded = expand_repetition(&self.b, &self.zeta, &p, &self.kernel)?;
        let kernel_value = if self.zeta_is_zero {
            haf_fast(&expanded, &self.kernel)?
        } else {
            lhaf_fast(&expanded, &self.kernel)?
        };
        Ok(exponent.exp() * kernel_value)
    }
}

/// `ν = <m| D(α) U(U) S(λ) U(U') |n>` end to end.
pub fn amplitude(spec: &AmplitudeSpec, opts: &AmplitudeOptions) -> Result<C64, AmplitudeError> {
    AmplitudeEngine::for_spec(spec, opts)?.amplitude_for(&spec.m)
}

/// `|ν|²`, the probability of detecting the bra pattern.
pub fn probability(spec: &AmplitudeSpec, opts: &AmplitudeOptions) -> Result<f64, AmplitudeError> {
    Ok(amplitude(spec, opts)?.norm_sqr())
}

/// Closed-form coherent-basis amplitude `ν' = <β| D(α) U(U) S(λ) |0>`; no
/// hafnian is involved because coherent states are left eigenstates of the
/// destruction operators, so the creation-operator polynomials evaluate at
/// `β*`.
pub fn coherent_amplitude(
    beta: &CVec,
    alpha: &CVec,
    u: &CMat,
    lambda: &RVec,
    tol: &GaussTolerances,
) -> Result<C64, AmplitudeError> {
    let l = beta.len();
    if alpha.len() != l || u.nrows() != l || u.ncols() != l || lambda.len() != l {
        return Err(AmplitudeError::InvalidSpec(
            "coherent amplitude inputs have mismatched dimensions".into(),
        ));
    }
    let uerr = linalg::unitarity_error(u);
    if uerr > tol.constraint {
        return Err(AmplitudeError::InvalidSpec(format!(
            "U is not unitary: residual {uerr:.3e}"
        )));
    }
    let tanh = CMat::from_fn(l, l, |i, j| {
        if i == j {
            C64::new(lambda[i].tanh(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let b = symmetrize(&(u * tanh * u.transpose()));
    let alpha_conj = alpha.map(|z| z.conj());
    let beta_conj = beta.map(|z| z.conj());
    let zeta = alpha - &b * &alpha_conj;

    let alpha_norm_sq: f64 = alpha.iter().map(|z| z.norm_sqr()).sum();
    let beta_norm_sq: f64 = beta.iter().map(|z| z.norm_sqr()).sum();
    let quad_alpha: C64 = (alpha_conj.transpose() * &b * &alpha_conj)[(0, 0)];
    let a_poly: C64 = 0.5 * (beta_conj.transpose() * &b * &beta_conj)[(0, 0)];
    let c_poly: C64 = zeta
        .iter()
        .zip(beta_conj.iter())
        .map(|(z, bc)| z * bc)
        .sum();
    let log_cosh: f64 = lambda.iter().map(|&x| x.cosh().ln()).sum();

    let exponent = -0.5 * (C64::new(alpha_norm_sq, 0.0) - quad_alpha) + a_poly + c_poly
        - C64::new(0.5 * beta_norm_sq + 0.5 * log_cosh, 0.0);
    Ok(exponent.exp())
}
