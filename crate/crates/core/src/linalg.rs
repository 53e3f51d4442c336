//! Shared dense linear-algebra helpers: complex/real matrix aliases, error
//! norms, the Takagi factorization of complex symmetric matrices, a matrix
//! exponential, and random test-matrix generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use self::rand_distr_free::StandardNormalish;
use thiserror::Error;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |A[i][j] - A[j][i]| = {0:.3e}")]
    NotSymmetric(f64),
    #[error("SVD did not converge")]
    SvdFailed,
    #[error("Takagi residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    TakagiResidual { residual: f64, tol: f64 },
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry magnitude of the difference `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff_real(a: &RMat, b: &RMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff_real");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Entrywise complex conjugate (not the adjoint).
pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

/// `max |A A† - I|`.
pub fn unitarity_error(a: &CMat) -> f64 {
    let n = a.nrows();
    if a.ncols() != n {
        return f64::INFINITY;
    }
    max_abs_diff(&(a * a.adjoint()), &CMat::identity(n, n))
}

/// `max |A - Aᵀ|`.
pub fn symmetry_error(a: &CMat) -> f64 {
    max_abs_diff(a, &a.transpose())
}

pub fn symmetrize(a: &CMat) -> CMat {
    (a + a.transpose()).scale(0.5)
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_vec(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
///
/// Intended for the moderate-norm generators built by the Fock oracle; the
/// argument is scaled below 1/4 in 1-norm, expanded to machine precision and
/// squared back up.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a.map(|z| z * scale);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=24 {
        term = (&term * &b).map(|z| z / k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Exponential of the real skew-symmetric tridiagonal matrix with
/// subdiagonal `sub` (dimension `sub.len() + 1`), via the similarity
/// `T = D (-iB) D⁻¹` with `D = diag(i^k)` and `B` the real symmetric
/// tridiagonal with the same subdiagonal: one real eigendecomposition
/// instead of a dense exponential.
pub fn exp_skew_tridiag(sub: &[f64]) -> CMat {
    let n = sub.len() + 1;
    if n == 1 {
        return CMat::identity(1, 1);
    }
    let mut b = RMat::zeros(n, n);
    for (k, &s) in sub.iter().enumerate() {
        b[(k + 1, k)] = s;
        b[(k, k + 1)] = s;
    }
    let (vals, vecs) = sym_eigen_sorted(&b);
    // exp(-iB) = V exp(-iΛ) Vᵀ, then conjugate by diag(i^k).
    let phases: Vec<C64> = (0..n)
        .map(|k| C64::new(0.0, 1.0).powu((k % 4) as u32))
        .collect();
    let mut out = CMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                let e = C64::from_polar(1.0, -vals[j]);
                acc += e * (vecs[(r, j)] * vecs[(c, j)]);
            }
            out[(r, c)] = phases[r] * acc * phases[c].conj();
        }
    }
    out
}

/// Sorted eigendecomposition of a real symmetric matrix (ascending
/// eigenvalues, eigenvectors as columns).
pub fn sym_eigen_sorted(a: &RMat) -> (RVec, RMat) {
    let se = nalgebra::SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = RVec::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let vecs = RMat::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Takagi factorization of a complex symmetric matrix: `A = Q diag(σ) Qᵀ`
/// with `Q` unitary and `σ ≥ 0` sorted descending.
///
/// Built on the SVD `A = U Σ V†`: symmetry forces `Y = V† conj(U)` to be a
/// symmetric unitary on each subspace of equal singular values, and a square
/// root of `Y` (obtained by jointly diagonalizing the commuting real and
/// imaginary parts) rotates `U` into the Takagi frame. Degenerate and zero
/// singular values are handled blockwise.
pub fn takagi(a: &CMat, residual_tol: f64) -> Result<(CMat, RVec), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((CMat::identity(0, 0), RVec::zeros(0)));
    }
    let sym_err = symmetry_error(a);
    let scale = max_abs(a).max(1.0);
    if sym_err > 1e-10 * scale {
        return Err(LinalgError::NotSymmetric(sym_err));
    }
    let a = symmetrize(a);

    let svd = a.clone().svd(true, true);
    let mut u = svd.u.ok_or(LinalgError::SvdFailed)?;
    let vt = svd.v_t.ok_or(LinalgError::SvdFailed)?;
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    // Descending order, explicitly (do not rely on the SVD's internal order).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let u_sorted = CMat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let vt_sorted = CMat::from_fn(n, n, |i, j| vt[(order[i], j)]);
    sigma = order.iter().map(|&k| sigma[k]).collect();
    u = u_sorted;
    let v = vt_sorted.adjoint();

    let y = v.adjoint() * conj(&u);

    // Group near-equal singular values; exact degeneracies (the common case
    // here) land well inside the window.
    let sig0 = sigma[0].max(1.0);
    let group_tol = 1e-7 * sig0;
    let zero_tol = 1e-12 * sig0;
    let mut q = CMat::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sigma[end - 1] - sigma[end] <= group_tol {
            end += 1;
        }
        let width = end - start;
        let u_block = u.columns(start, width).clone_owned();
        if sigma[start] <= zero_tol {
            // Null space of A: any orthonormal basis is a valid Takagi block.
            q.view_mut((0, start), (n, width)).copy_from(&u_block);
        } else {
            let y_block = {
                let mut yb = CMat::zeros(width, width);
                for i in 0..width {
                    for j in 0..width {
                        yb[(i, j)] = y[(start + i, start + j)];
                    }
                }
                symmetrize(&yb)
            };
            let s_half = symmetric_unitary_sqrt(&y_block);
            let rotated = u_block * s_half;
            q.view_mut((0, start), (n, width)).copy_from(&rotated);
        }
        start = end;
    }

    let sig_vec = RVec::from_vec(sigma);
    let recon = &q * CMat::from_diagonal(&to_complex_vec(&sig_vec)) * q.transpose();
    let residual = max_abs_diff(&recon, &a);
    if residual > residual_tol * scale {
        return Err(LinalgError::TakagiResidual {
            residual,
            tol: residual_tol * scale,
        });
    }
    Ok((q, sig_vec))
}

/// Square root `S` of a symmetric unitary `Y` with `S Sᵀ = Y`.
///
/// `Y` symmetric unitary means `Re Y` and `Im Y` are commuting real
/// symmetric matrices; a joint real orthogonal eigenbasis `O` turns `Y` into
/// `O diag(e^{iθ}) Oᵀ`, so `S = O diag(e^{iθ/2})`.
fn symmetric_unitary_sqrt(y: &CMat) -> CMat {
    let n = y.nrows();
    let x = y.map(|z| z.re);
    let z = y.map(|z| z.im);
    let (xvals, xvecs) = sym_eigen_sorted(&x);

    // Within degenerate eigenspaces of Re Y, diagonalize the restriction of
    // Im Y to fix the basis.
    let mut o = xvecs.clone();
    let tol = 1e-8 * xvals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (xvals[end] - xvals[start]).abs() <= tol {
            end += 1;
        }
        let width = end - start;
        if width > 1 {
            let block = xvecs.columns(start, width).clone_owned();
            let z_small = block.transpose() * &z * &block;
            let (_, zvecs) = sym_eigen_sorted(&z_small);
            let rotated = block * zvecs;
            o.view_mut((0, start), (n, width)).copy_from(&rotated);
        }
        start = end;
    }

    let xo = o.transpose() * &x * &o;
    let zo = o.transpose() * &z * &o;
    let half_phases = CVec::from_fn(n, |j, _| {
        let theta = zo[(j, j)].atan2(xo[(j, j)]);
        C64::from_polar(1.0, 0.5 * theta)
    });
    to_complex(&o) * CMat::from_diagonal(&half_phases)
}

/// Householder-QR based Haar-ish random unitary (test input generator).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormalish), rng.sample(StandardNormalish))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix the phase freedom so the distribution does not depend on the QR
    // sign conventions.
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random real orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    let g = RMat::from_fn(n, n, |_, _| rng.sample(StandardNormalish));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random complex symmetric matrix with entries of magnitude up to `radius`.
pub fn random_complex_symmetric<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> CMat {
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = C64::new(
                rng.gen_range(-radius..=radius),
                rng.gen_range(-radius..=radius),
            );
            a[(i, j)] = z;
            a[(j, i)] = z;
        }
    }
    a
}

/// Marsaglia polar Gaussian sampler, local so the crate does not need the
/// `rand_distr` dependency for one distribution.
mod rand_distr_free {
    use rand::distributions::Distribution;
    use rand::Rng;

    pub struct StandardNormalish;

    impl Distribution<f64> for StandardNormalish {
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            loop {
                let u: f64 = rng.gen_range(-1.0..1.0);
                let v: f64 = rng.gen_range(-1.0..1.0);
                let s = u * u + v * v;
                if s > 0.0 && s < 1.0 {
                    return u * (-2.0 * s.ln() / s).sqrt();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expm_matches_scalar_exponential() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(0.3, -0.2),
            C64::new(-1.1, 0.4),
        ]));
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(0.3, -0.2).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(-1.1, 0.4).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_inverse_is_negated_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = CMat::from_fn(6, 6, |_, _| {
            C64::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8))
        });
        let prod = expm(&a) * expm(&(-&a));
        assert!(max_abs_diff(&prod, &CMat::identity(6, 6)) < 1e-12);
    }

    #[test]
    fn skew_tridiag_exponential_matches_dense_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in [1usize, 2, 5, 9] {
            let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fast = exp_skew_tridiag(&sub);
            let mut gen = CMat::zeros(n, n);
            for (k, &s) in sub.iter().enumerate() {
                gen[(k + 1, k)] = C64::new(s, 0.0);
                gen[(k, k + 1)] = C64::new(-s, 0.0);
            }
            let dense = expm(&gen);
            assert!(
                max_abs_diff(&fast, &dense) < 1e-12,
                "skew exp mismatch at n={n}"
            );
        }
    }

    #[test]
    fn takagi_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 3, 5, 8] {
            let a = random_complex_symmetric(n, 1.0, &mut rng);
            let (q, sigma) = takagi(&a, 1e-10).unwrap();
            assert!(unitarity_error(&q) < 1e-12, "Q not unitary at n={n}");
            let recon = &q * CMat::from_diagonal(&to_complex_vec(&sigma)) * q.transpose();
            assert!(max_abs_diff(&recon, &symmetrize(&a)) < 1e-12);
            for w in sigma.as_slice().windows(2) {
                assert!(w[0] >= w[1] - 1e-12, "singular values not descending");
            }
        }
    }

    #[test]
    fn takagi_handles_degenerate_and_zero_blocks() {
        // Off-diagonal pair block: both Takagi values equal, plus a zero row.
        let x = C64::new(0.6, 0.3);
        let mut a = CMat::zeros(3, 3);
        a[(0, 1)] = x;
        a[(1, 0)] = x;
        let (q, sigma) = takagi(&a, 1e-10).unwrap();
        assert!((sigma[0] - x.norm()).abs() < 1e-12);
        assert!((sigma[1] - x.norm()).abs() < 1e-12);
        assert!(sigma[2].abs() < 1e-12);
        assert!(unitarity_error(&q) < 1e-12);

        // Negative real diagonal: values must come out non-negative.
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-0.7, 0.0),
            C64::new(0.2, 0.0),
        ]));
        let (q2, sigma2) = takagi(&d, 1e-10).unwrap();
        assert!((sigma2[0] - 0.7).abs() < 1e-14);
        assert!((sigma2[1] - 0.2).abs() < 1e-14);
        let recon = &q2 * CMat::from_diagonal(&to_complex_vec(&sigma2)) * q2.transpose();
        assert!(max_abs_diff(&recon, &d) < 1e-13);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(7, &mut rng);
        assert!(unitarity_error(&u) < 1e-12);
        let o = random_orthogonal(6, &mut rng);
        let ot = o.transpose() * &o;
        assert!(max_abs_diff_real(&ot, &RMat::identity(6, 6)) < 1e-12);
    }
}
