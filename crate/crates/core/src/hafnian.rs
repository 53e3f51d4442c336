//! Fast loop-hafnian and hafnian kernels, plus the repetition expansion used
//! by the amplitude pipeline.
//!
//! The kernel is the subset inclusion-exclusion over power traces: pair the
//! vertices as `(0,1)(2,3)...`, and for every subset `Z` of the `m = n/2`
//! pairs accumulate `(-1)^{m-|Z|} [x^m] exp(Σ_k c_k(Z) x^k)` where
//!
//! ```text
//! c_k(Z) = tr((X A_Z)^k) / (2k)  +  (1/2) vᵀ X (A_Z X)^{k-1} v
//! ```
//!
//! with `X` the pairwise swap, `v = diag(A_Z)` (dropped for the plain
//! hafnian) and `A_Z` the restriction of `A` to the pairs in `Z`. The trace
//! term sums alternating cycles, the `v` term sums open chains terminated by
//! loops; walk contributions that revisit a pair cancel in the subset sum.
//! Power traces come from the characteristic polynomial (Householder
//! Hessenberg reduction, then the La Budde recurrence, then Newton
//! identities), so each subset costs `O(n^3)` and the whole kernel
//! `O(n^3 2^(n/2))`.
//!
//! Several evaluation strategies live behind the [`HafnianStrategy`] trait
//! and are registered by name; `powertrace` is the default, `enumeration`
//! delegates to the brute-force oracle in [`crate::matchgraph`].

use std::sync::LazyLock;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{CMat, CVec};
use crate::matchgraph::{self, EnumerationLimits, SymmetricMatrix};

#[derive(Debug, Error)]
pub enum HafnianError {
    #[error("dimension {n} exceeds kernel cap {cap}")]
    DimensionCap { n: usize, cap: usize },
    #[error("repetition vector length {p_len} does not match matrix dimension {dim}")]
    RepetitionMismatch { p_len: usize, dim: usize },
    #[error(transparent)]
    Enumeration(#[from] matchgraph::MatchGraphError),
    #[error("unknown hafnian strategy '{0}'")]
    UnknownStrategy(String),
}

/// Runtime knobs for the fast kernel.
#[derive(Debug, Clone)]
pub struct KernelOptions {
    /// Hard cap on the matrix dimension (2^(n/2) growth).
    pub max_dim: usize,
    /// Kahan-compensated accumulation of the subset sum.
    pub compensated: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            max_dim: 50,
            compensated: false,
        }
    }
}

/// Multiplicities `p_j >= 0` for the repetition expansion of Sec. 5-style
/// amplitude pipelines; `total()` is `P = Σ p_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepetitionVector {
    p: Vec<usize>,
}

impl RepetitionVector {
    pub fn new(p: Vec<usize>) -> Self {
        RepetitionVector { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn total(&self) -> usize {
        self.p.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.p
    }
}

impl From<&[usize]> for RepetitionVector {
    fn from(p: &[usize]) -> Self {
        RepetitionVector { p: p.to_vec() }
    }
}

/// Rows/columns of `b` repeated according to `p` (dropped when `p_j = 0`),
/// with the expanded diagonal overwritten by the expanded `zeta`. The result
/// is the `P x P` matrix fed to the loop-hafnian kernel.
pub fn expand_repetition(
    b: &SymmetricMatrix,
    zeta: &CVec,
    p: &RepetitionVector,
    opts: &KernelOptions,
) -> Result<SymmetricMatrix, HafnianError> {
    let dim = b.dim();
    if p.len() != dim || zeta.len() != dim {
        return Err(HafnianError::RepetitionMismatch {
            p_len: p.len().min(zeta.len()),
            dim,
        });
    }
    let total = p.total();
    if total > opts.max_dim {
        return Err(HafnianError::DimensionCap {
            n: total,
            cap: opts.max_dim,
        });
    }
    let mut multiset = Vec::with_capacity(total);
    for (j, &pj) in p.as_slice().iter().enumerate() {
        multiset.extend(std::iter::repeat(j).take(pj));
    }
    Ok(SymmetricMatrix::from_fn(total, |r, c| {
        if r == c {
            zeta[multiset[r]]
        } else {
            b.get(multiset[r], multiset[c])
        }
    }))
}

/// Loop hafnian via the power-trace kernel.
pub fn lhaf_fast(a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
    let n = a.dim();
    if n > opts.max_dim {
        return Err(HafnianError::DimensionCap {
            n,
            cap: opts.max_dim,
        });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if n % 2 == 1 {
        // Append a unit-weight loop vertex: every perfect matching of the
        // padded graph must take that loop, so the loop hafnian is unchanged.
        let padded = SymmetricMatrix::from_fn(n + 1, |i, j| {
            if i < n && j < n {
                a.get(i, j)
            } else if i == n && j == n {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        return Ok(powertrace_kernel(&padded, true, opts));
    }
    Ok(powertrace_kernel(a, true, opts))
}

/// Hafnian via the power-trace kernel (diagonal ignored; odd dimension is 0).
pub fn haf_fast(a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
    let n = a.dim();
    if n > opts.max_dim {
        return Err(HafnianError::DimensionCap {
            n,
            cap: opts.max_dim,
        });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(powertrace_kernel(&a.with_zero_diagonal(), false, opts))
}

/// Complex Kahan accumulator; compensation tracked per component.
#[derive(Clone, Copy, Default)]
struct KahanSum {
    sum: C64,
    comp: C64,
}

impl KahanSum {
    fn add(&mut self, x: C64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn powertrace_kernel(a: &SymmetricMatrix, loops: bool, opts: &KernelOptions) -> C64 {
    let n = a.dim();
    debug_assert!(n % 2 == 0 && n > 0);
    let m = n / 2;

    // Fixed chunking of the ascending subset range: the grouping (and hence
    // the floating-point result) is a function of m alone, independent of
    // the worker count.
    let total: u64 = 1u64 << m;
    let chunk_count: u64 = total.min(256);
    let chunk_len = total / chunk_count;

    let partials: Vec<C64> = (0..chunk_count)
        .into_par_iter()
        .map(|c| {
            let lo = (c * chunk_len).max(1);
            let hi = if c == chunk_count - 1 {
                total
            } else {
                (c + 1) * chunk_len
            };
            let mut plain = C64::new(0.0, 0.0);
            let mut kahan = KahanSum::default();
            let mut scratch = SubsetScratch::new(n, m);
            for z in lo..hi {
                let term = scratch.subset_term(a, z, loops);
                if opts.compensated {
                    kahan.add(term);
                } else {
                    plain += term;
                }
            }
            if opts.compensated {
                kahan.sum
            } else {
                plain
            }
        })
        .collect();

    // Merge in chunk order, once, on the caller thread.
    let mut total_sum = C64::new(0.0, 0.0);
    for p in partials {
        total_sum += p;
    }
    total_sum
}

/// Per-worker buffers for one subset evaluation.
struct SubsetScratch {
    pair_indices: Vec<usize>,
    sub: CMat,
    diag: Vec<C64>,
    vec_a: Vec<C64>,
    vec_b: Vec<C64>,
    coeffs: Vec<C64>,
    poly: Vec<C64>,
    m: usize,
}

impl SubsetScratch {
    fn new(n: usize, m: usize) -> Self {
        SubsetScratch {
            pair_indices: Vec::with_capacity(m),
            sub: CMat::zeros(n, n),
            diag: vec![C64::new(0.0, 0.0); n],
            vec_a: vec![C64::new(0.0, 0.0); n],
            vec_b: vec![C64::new(0.0, 0.0); n],
            coeffs: Vec::new(),
            poly: vec![C64::new(0.0, 0.0); m + 1],
            m,
        }
    }

    /// `(-1)^{m-|Z|} [x^m] exp(Σ_k c_k(Z) x^k)` for the subset encoded in the
    /// bits of `z`.
    fn subset_term(&mut self, a: &SymmetricMatrix, z: u64, loops: bool) -> C64 {
        let m = self.m;
        self.pair_indices.clear();
        for pair in 0..m {
            if z >> pair & 1 == 1 {
                self.pair_indices.push(pair);
            }
        }
        let s = self.pair_indices.len();
        let dim = 2 * s;

        // A_Z with rows swapped pairwise, i.e. B = X A_Z, plus the diagonal
        // of A_Z for the chain terms.
        for (bi, &pi) in self.pair_indices.iter().enumerate() {
            for (bj, &pj) in self.pair_indices.iter().enumerate() {
                let (r0, r1) = (2 * pi, 2 * pi + 1);
                let (c0, c1) = (2 * pj, 2 * pj + 1);
                self.sub[(2 * bi, 2 * bj)] = a.get(r1, c0);
                self.sub[(2 * bi, 2 * bj + 1)] = a.get(r1, c1);
                self.sub[(2 * bi + 1, 2 * bj)] = a.get(r0, c0);
                self.sub[(2 * bi + 1, 2 * bj + 1)] = a.get(r0, c1);
            }
            self.diag[2 * bi] = a.get(2 * pi, 2 * pi);
            self.diag[2 * bi + 1] = a.get(2 * pi + 1, 2 * pi + 1);
        }

        // c_k = tr(B^k)/(2k) + (1/2) vᵀ X (A_Z X)^{k-1} v. Chain terms are
        // accumulated first because the trace computation reduces `sub` to
        // Hessenberg form in place. The iteration y_1 = v,
        // y_{k+1} = A_Z X y_k uses A_Z[i, j] = (X A_Z)[ī, j].
        let mut c_k = vec![C64::new(0.0, 0.0); m + 1];
        if loops {
            self.vec_a[..dim].copy_from_slice(&self.diag[..dim]);
            for k in 1..=m {
                // w_k = (1/2) (X v) · y_k with y_k in vec_a.
                let mut w = C64::new(0.0, 0.0);
                for i in 0..s {
                    w += self.diag[2 * i + 1] * self.vec_a[2 * i];
                    w += self.diag[2 * i] * self.vec_a[2 * i + 1];
                }
                c_k[k] = 0.5 * w;
                if k == m {
                    break;
                }
                for i in 0..dim {
                    let ibar = i ^ 1;
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..dim {
                        acc += self.sub[(ibar, j)] * self.vec_a[j ^ 1];
                    }
                    self.vec_b[i] = acc;
                }
                self.vec_a[..dim].copy_from_slice(&self.vec_b[..dim]);
            }
        }

        let traces = power_traces(&mut self.sub, dim, m, &mut self.coeffs);
        for k in 1..=m {
            c_k[k] += traces[k - 1] / (2.0 * k as f64);
        }

        self.poly.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        self.poly[0] = C64::new(1.0, 0.0);

        // [x^m] of exp(Σ c_k x^k) by the standard derivative recurrence.
        for j in 1..=m {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=j {
                acc += c_k[k] * self.poly[j - k] * (k as f64);
            }
            self.poly[j] = acc / (j as f64);
        }

        if (m - s) % 2 == 0 {
            self.poly[m]
        } else {
            -self.poly[m]
        }
    }
}

/// Power traces `tr(B^k)` for `k = 1..=count` of the top-left `dim x dim`
/// block of `b`, which is overwritten by its Hessenberg form.
///
/// Householder reduction to Hessenberg, La Budde recurrence for the
/// characteristic polynomial, then Newton identities.
fn power_traces(b: &mut CMat, dim: usize, count: usize, coeffs: &mut Vec<C64>) -> Vec<C64> {
    hessenberg_in_place(b, dim);
    char_poly_hessenberg(b, dim, coeffs);
    // coeffs[k] is the coefficient of x^{dim-k}: p(x) = x^d + c_1 x^{d-1} + ...
    let mut traces = vec![C64::new(0.0, 0.0); count];
    for k in 1..=count {
        let mut acc = if k <= dim {
            -(k as f64) * coeffs[k]
        } else {
            C64::new(0.0, 0.0)
        };
        for i in 1..k.min(dim + 1) {
            acc -= coeffs[i] * traces[k - i - 1];
        }
        traces[k - 1] = acc;
    }
    traces
}

/// In-place Householder reduction of the leading `dim x dim` block to upper
/// Hessenberg form (similarity transform, trace spectrum preserved).
fn hessenberg_in_place(a: &mut CMat, dim: usize) {
    if dim < 3 {
        return;
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for k in 0..dim - 2 {
        let mut norm_sq = 0.0;
        for i in k + 1..dim {
            norm_sq += a[(i, k)].norm_sqr();
        }
        let x0 = a[(k + 1, k)];
        let alpha_norm = norm_sq.sqrt();
        if alpha_norm < 1e-300 {
            continue;
        }
        let phase = if x0.norm() > 0.0 {
            -x0 / x0.norm()
        } else {
            C64::new(-1.0, 0.0)
        };
        let alpha = phase * alpha_norm;
        // v = x - alpha e1, normalized.
        let mut vnorm_sq = 0.0;
        for i in k + 1..dim {
            let vi = if i == k + 1 { a[(i, k)] - alpha } else { a[(i, k)] };
            v[i] = vi;
            vnorm_sq += vi.norm_sqr();
        }
        if vnorm_sq < 1e-300 {
            continue;
        }
        let inv = 1.0 / vnorm_sq.sqrt();
        for item in v.iter_mut().take(dim).skip(k + 1) {
            *item *= inv;
        }
        // A <- (I - 2vv†) A: rows k+1..dim.
        for j in k..dim {
            let mut dot = C64::new(0.0, 0.0);
            for i in k + 1..dim {
                dot += v[i].conj() * a[(i, j)];
            }
            let two_dot = 2.0 * dot;
            for i in k + 1..dim {
                let delta = v[i] * two_dot;
                a[(i, j)] -= delta;
            }
        }
        // A <- A (I - 2vv†): columns k+1..dim.
        for i in 0..dim {
            let mut dot = C64::new(0.0, 0.0);
            for j in k + 1..dim {
                dot += a[(i, j)] * v[j];
            }
            let two_dot = 2.0 * dot;
            for j in k + 1..dim {
                let delta = two_dot * v[j].conj();
                a[(i, j)] -= delta;
            }
        }
        // Clean the annihilated column.
        a[(k + 1, k)] = alpha;
        for i in k + 2..dim {
            a[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

/// La Budde recurrence: characteristic polynomial of an upper Hessenberg
/// matrix. On return `coeffs[k]` is the coefficient of `x^{dim-k}` with
/// `coeffs[0] = 1`.
fn char_poly_hessenberg(h: &CMat, dim: usize, coeffs: &mut Vec<C64>) {
    // p_k(x) = char poly of the leading k x k block, stored as coefficient
    // rows in ascending k; p_k has degree k.
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut polys: Vec<Vec<C64>> = Vec::with_capacity(dim + 1);
    polys.push(vec![one]);
    for k in 1..=dim {
        let hkk = h[(k - 1, k - 1)];
        let prev = &polys[k - 1];
        // (x - h_kk) * p_{k-1}
        let mut p = vec![zero; k + 1];
        for (deg, &c) in prev.iter().enumerate() {
            p[deg + 1] += c;
            p[deg] -= hkk * c;
        }
        // - Σ_m h_{k-m,k} (β_{k-1} ... β_{k-m}) p_{k-m-1}
        let mut beta_prod = one;
        for mm in 1..k {
            beta_prod *= h[(k - mm, k - mm - 1)];
            let coupling = h[(k - mm - 1, k - 1)] * beta_prod;
            if coupling.norm_sqr() == 0.0 {
                continue;
            }
            for (deg, &c) in polys[k - mm - 1].iter().enumerate() {
                p[deg] -= coupling * c;
            }
        }
        polys.push(p);
    }
    let full = &polys[dim];
    coeffs.clear();
    coeffs.resize(dim + 1, zero);
    // full[deg] is the coefficient of x^deg; convert to descending indexing.
    for deg in 0..=dim {
        coeffs[dim - deg] = full[deg];
    }
}

/// A named hafnian evaluation algorithm. All strategies satisfy the same
/// contract; they differ in cost and in what they are allowed to assume.
pub trait HafnianStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn lhaf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError>;
    fn haf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError>;
}

struct PowerTraceStrategy;

impl HafnianStrategy for PowerTraceStrategy {
    fn name(&self) -> &'static str {
        "powertrace"
    }
    fn lhaf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
        lhaf_fast(a, opts)
    }
    fn haf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
        haf_fast(a, opts)
    }
}

struct EnumerationStrategy;

impl HafnianStrategy for EnumerationStrategy {
    fn name(&self) -> &'static str {
        "enumeration"
    }
    fn lhaf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
        let limits = EnumerationLimits {
            max_with_loops: opts.max_dim.min(EnumerationLimits::default().max_with_loops),
            ..Default::default()
        };
        Ok(matchgraph::lhaf_bruteforce(a, &limits)?)
    }
    fn haf(&self, a: &SymmetricMatrix, opts: &KernelOptions) -> Result<C64, HafnianError> {
        let limits = EnumerationLimits {
            max_loopless: opts.max_dim.min(EnumerationLimits::default().max_loopless),
            ..Default::default()
        };
        Ok(matchgraph::haf_bruteforce(a, &limits)?)
    }
}

static REGISTRY: LazyLock<Vec<Box<dyn HafnianStrategy>>> =
    LazyLock::new(|| vec![Box::new(PowerTraceStrategy), Box::new(EnumerationStrategy)]);

/// All registered strategies, default first.
pub fn strategies() -> &'static [Box<dyn HafnianStrategy>] {
    &REGISTRY
}

/// Look up a strategy by its registered name.
pub fn strategy(name: &str) -> Result<&'static dyn HafnianStrategy, HafnianError> {
    REGISTRY
        .iter()
        .find(|s| s.name() == name)
        .map(|s| s.as_ref())
        .ok_or_else(|| HafnianError::UnknownStrategy(name.to_string()))
}

pub fn default_strategy() -> &'static dyn HafnianStrategy {
    REGISTRY[0].as_ref()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_complex_symmetric;
    use crate::matchgraph::{haf_bruteforce, lhaf_bruteforce};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(fast: C64, oracle: C64) -> f64 {
        (fast - oracle).norm() / (1.0 + oracle.norm())
    }

    #[test]
    fn power_traces_match_direct_matrix_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in [1usize, 2, 3, 5, 8] {
            let a = CMat::from_fn(dim, dim, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let mut work = a.clone();
            let mut coeffs = Vec::new();
            let traces = power_traces(&mut work, dim, 6, &mut coeffs);
            let mut power = CMat::identity(dim, dim);
            for (k, tr) in traces.iter().enumerate() {
                power = &power * &a;
                let direct: C64 = (0..dim).map(|i| power[(i, i)]).sum();
                assert!(
                    (tr - direct).norm() < 1e-9 * (1.0 + direct.norm()),
                    "trace mismatch dim={dim} k={}",
                    k + 1
                );
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let opts = KernelOptions::default();
        let a = SymmetricMatrix::from_fn(2, |i, j| {
            if i == j {
                C64::new(0.4 + i as f64, -0.2)
            } else {
                C64::new(1.5, 0.7)
            }
        });
        // lhaf = A01 + A00*A11.
        let expected = a.get(0, 1) + a.get(0, 0) * a.get(1, 1);
        assert!((lhaf_fast(&a, &opts).unwrap() - expected).norm() < 1e-14);
        assert!((haf_fast(&a, &opts).unwrap() - a.get(0, 1)).norm() < 1e-14);
    }

    #[test]
    fn paper_example_graph() {
        let opts = KernelOptions::default();
        let g = crate::matchgraph::example_graph_g1();
        let h = haf_fast(&g, &opts).unwrap();
        let lh = lhaf_fast(&g, &opts).unwrap();
        assert!((h - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((lh - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_and_empty_matrix() {
        let opts = KernelOptions::default();
        let z = SymmetricMatrix::zeros(6);
        assert_eq!(lhaf_fast(&z, &opts).unwrap(), C64::new(0.0, 0.0));
        let empty = SymmetricMatrix::zeros(0);
        assert_eq!(lhaf_fast(&empty, &opts).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(haf_fast(&empty, &opts).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn odd_dimension_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let opts = KernelOptions::default();
        let limits = EnumerationLimits::default();
        for n in [1usize, 3, 5, 7] {
            let a = SymmetricMatrix::new(random_complex_symmetric(n, 1.0, &mut rng)).unwrap();
            assert_eq!(haf_fast(&a, &opts).unwrap(), C64::new(0.0, 0.0));
            let fast = lhaf_fast(&a, &opts).unwrap();
            let brute = lhaf_bruteforce(&a, &limits).unwrap();
            assert!(rel_err(fast, brute) < 1e-11, "odd n={n}");
        }
    }

    #[test]
    fn matches_bruteforce_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let opts = KernelOptions::default();
        let limits = EnumerationLimits::default();
        for n in 2..=10usize {
            for _ in 0..6 {
                let a =
                    SymmetricMatrix::new(random_complex_symmetric(n, 1.0, &mut rng)).unwrap();
                let lf = lhaf_fast(&a, &opts).unwrap();
                let lb = lhaf_bruteforce(&a, &limits).unwrap();
                assert!(rel_err(lf, lb) < 1e-10, "lhaf n={n}: {lf} vs {lb}");
                let hf = haf_fast(&a, &opts).unwrap();
                let hb = haf_bruteforce(&a, &limits).unwrap();
                assert!(rel_err(hf, hb) < 1e-10, "haf n={n}: {hf} vs {hb}");
            }
        }
    }

    #[test]
    fn haf_equals_lhaf_of_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let opts = KernelOptions::default();
        for n in [4usize, 8, 12] {
            let a = SymmetricMatrix::new(random_complex_symmetric(n, 1.0, &mut rng)).unwrap();
            let h = haf_fast(&a, &opts).unwrap();
            let l0 = lhaf_fast(&a.with_zero_diagonal(), &opts).unwrap();
            assert!(rel_err(h, l0) < 1e-12);
        }
    }

    #[test]
    fn compensated_summation_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let a = SymmetricMatrix::new(random_complex_symmetric(10, 1.0, &mut rng)).unwrap();
        let plain = lhaf_fast(&a, &KernelOptions::default()).unwrap();
        let comp = lhaf_fast(
            &a,
            &KernelOptions {
                compensated: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rel_err(plain, comp) < 1e-12);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let opts = KernelOptions {
            max_dim: 8,
            ..Default::default()
        };
        let a = SymmetricMatrix::zeros(10);
        assert!(matches!(
            lhaf_fast(&a, &opts),
            Err(HafnianError::DimensionCap { .. })
        ));
    }

    #[test]
    fn expansion_examples() {
        let opts = KernelOptions::default();
        // 4x4 base matrix with distinct entries, p = (1,3,0,2): the layout of
        // the Sec. 5.1 block display, with zeta on the diagonal.
        let b = SymmetricMatrix::from_fn(4, |i, j| C64::new((10 * (i + 1) + j + 1) as f64, 0.0));
        let zeta = CVec::from_fn(4, |i, _| C64::new(-(i as f64 + 1.0), 0.0));
        let p = RepetitionVector::new(vec![1, 3, 0, 2]);
        let e = expand_repetition(&b, &zeta, &p, &opts).unwrap();
        assert_eq!(e.dim(), 6);
        let s = [0usize, 1, 1, 1, 3, 3];
        for r in 0..6 {
            for c in 0..6 {
                let expected = if r == c { zeta[s[r]] } else { b.get(s[r], s[c]) };
                assert_eq!(e.get(r, c), expected, "entry ({r},{c})");
            }
        }

        // Identity repetition: b with its diagonal replaced by zeta.
        let p_one = RepetitionVector::new(vec![1; 4]);
        let e_one = expand_repetition(&b, &zeta, &p_one, &opts).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r == c { zeta[r] } else { b.get(r, c) };
                assert_eq!(e_one.get(r, c), expected);
            }
        }

        // All-zero repetition: empty matrix, lhaf 1.
        let p_zero = RepetitionVector::new(vec![0; 4]);
        let e_zero = expand_repetition(&b, &zeta, &p_zero, &opts).unwrap();
        assert_eq!(e_zero.dim(), 0);
        assert_eq!(lhaf_fast(&e_zero, &opts).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn expansion_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let opts = KernelOptions::default();
        let dim = 4;
        let b = SymmetricMatrix::new(random_complex_symmetric(dim, 0.7, &mut rng)).unwrap();
        let zeta = CVec::from_fn(dim, |_, _| {
            C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
        });
        let p = vec![2usize, 1, 0, 3];
        let perm = vec![2usize, 0, 3, 1];
        let base = lhaf_fast(
            &expand_repetition(&b, &zeta, &RepetitionVector::new(p.clone()), &opts).unwrap(),
            &opts,
        )
        .unwrap();
        let b_perm = b.permuted(&perm);
        let zeta_perm = CVec::from_fn(dim, |i, _| zeta[perm[i]]);
        let p_perm: Vec<usize> = perm.iter().map(|&k| p[k]).collect();
        let permuted = lhaf_fast(
            &expand_repetition(&b_perm, &zeta_perm, &RepetitionVector::new(p_perm), &opts)
                .unwrap(),
            &opts,
        )
        .unwrap();
        assert!(rel_err(base, permuted) < 1e-10);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(default_strategy().name(), "powertrace");
        assert!(strategy("enumeration").is_ok());
        assert!(matches!(
            strategy("does-not-exist"),
            Err(HafnianError::UnknownStrategy(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = SymmetricMatrix::new(random_complex_symmetric(6, 1.0, &mut rng)).unwrap();
        let opts = KernelOptions::default();
        let v_fast = strategy("powertrace").unwrap().lhaf(&a, &opts).unwrap();
        let v_enum = strategy("enumeration").unwrap().lhaf(&a, &opts).unwrap();
        assert!(rel_err(v_fast, v_enum) < 1e-11);
    }
}
