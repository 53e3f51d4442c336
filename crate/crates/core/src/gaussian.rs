//! Gaussian unitaries as Heisenberg-picture linear maps on mode operators.
//!
//! A [`GaussianMap`] stores the action of conjugation by a Gaussian unitary
//! `W` on annihilation operators:
//!
//! ```text
//! W† a_i W = Σ_j E[i][j] a_j + F[i][j] a†_j + δ_i
//! ```
//!
//! Preservation of the commutation relations forces `E E† - F F† = I` and
//! `E Fᵀ` symmetric; every constructor and [`compose`] maintain these.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{
    self, conj, max_abs_diff, max_abs_vec, symmetrize, takagi, to_complex, to_complex_vec, CMat,
    CVec, RMat, RVec,
};

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("mode count mismatch: {0} vs {1}")]
    ModeMismatch(usize, usize),
    #[error("two-mode squeezer needs two distinct modes, got {0} and {1}")]
    EqualModes(usize, usize),
    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },
    #[error("matrix is not unitary: max |U U† - I| = {0:.3e}")]
    NotUnitary(f64),
    #[error("map violates the bosonic constraints: residual {0:.3e}")]
    ConstraintViolation(f64),
    #[error("map has nonzero displacement (|δ| = {0:.3e}) where none is allowed")]
    UnexpectedDisplacement(f64),
    #[error("input is numerically singular: singular value {0:.3e}")]
    SingularInput(f64),
    #[error("decomposition failed: {0}")]
    Decomposition(#[from] linalg::LinalgError),
    #[error("squeezing magnitude not representable: tanh value {0}")]
    IllConditioned(f64),
}

/// Tolerances shared by the Gaussian-algebra operations.
#[derive(Debug, Clone)]
pub struct GaussTolerances {
    /// Constraint residuals (commutation preservation, unitarity of inputs).
    pub constraint: f64,
    /// Acceptable reconstruction error of decompositions.
    pub reconstruction: f64,
    /// Singular values at or below this are treated as zero.
    pub singular: f64,
}

impl Default for GaussTolerances {
    fn default() -> Self {
        GaussTolerances {
            constraint: 1e-10,
            reconstruction: 1e-8,
            singular: 1e-12,
        }
    }
}

/// Heisenberg action of a Gaussian unitary on the mode operators.
#[derive(Debug, Clone)]
pub struct GaussianMap {
    e: CMat,
    f: CMat,
    delta: CVec,
}

impl GaussianMap {
    pub fn modes(&self) -> usize {
        self.e.nrows()
    }

    pub fn e(&self) -> &CMat {
        &self.e
    }

    pub fn f(&self) -> &CMat {
        &self.f
    }

    pub fn delta(&self) -> &CVec {
        &self.delta
    }

    pub fn identity(modes: usize) -> Self {
        GaussianMap {
            e: CMat::identity(modes, modes),
            f: CMat::zeros(modes, modes),
            delta: CVec::zeros(modes),
        }
    }

    /// `max` of the two constraint residuals `|E E† - F F† - I|` and
    /// `|E Fᵀ - F Eᵀ|`.
    pub fn constraint_error(&self) -> f64 {
        let n = self.modes();
        let comm = &self.e * self.e.adjoint() - &self.f * self.f.adjoint();
        let r1 = max_abs_diff(&comm, &CMat::identity(n, n));
        let sym = &self.e * self.f.transpose();
        let r2 = max_abs_diff(&sym, &sym.transpose());
        r1.max(r2)
    }

    pub fn check_invariants(&self, tol: &GaussTolerances) -> Result<(), GaussianError> {
        let err = self.constraint_error();
        if err > tol.constraint {
            Err(GaussianError::ConstraintViolation(err))
        } else {
            Ok(())
        }
    }

    /// The affine action on stacked quadratures `(R, P)`: returns `(S, c)`
    /// with `W† (R, P) W = S (R, P) + c`.
    pub fn quadrature_action(&self) -> (RMat, RVec) {
        let n = self.modes();
        let epf = &self.e + &self.f;
        let emf = &self.e - &self.f;
        let mut s = RMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = epf[(i, j)].re;
                s[(i, n + j)] = -emf[(i, j)].im;
                s[(n + i, j)] = epf[(i, j)].im;
                s[(n + i, n + j)] = emf[(i, j)].re;
            }
        }
        let mut c = RVec::zeros(2 * n);
        for i in 0..n {
            c[i] = std::f64::consts::SQRT_2 * self.delta[i].re;
            c[n + i] = std::f64::consts::SQRT_2 * self.delta[i].im;
        }
        (s, c)
    }
}

/// `D(α)`: `a_j -> a_j + α_j`.
pub fn displacement_map(alpha: &CVec) -> GaussianMap {
    let n = alpha.len();
    GaussianMap {
        e: CMat::identity(n, n),
        f: CMat::zeros(n, n),
        delta: alpha.clone(),
    }
}

/// `S(λ)`: `a_j -> a_j cosh λ_j + a†_j sinh λ_j`.
pub fn squeeze_map(lambda: &RVec) -> GaussianMap {
    let n = lambda.len();
    GaussianMap {
        e: CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(lambda[i].cosh(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
        f: CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(lambda[i].sinh(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
        delta: CVec::zeros(n),
    }
}

/// `T_{i,j}(t) = exp(t (a†_i a†_j - a_i a_j))` on `modes` modes.
pub fn two_mode_squeeze_map(
    modes: usize,
    t: f64,
    i: usize,
    j: usize,
) -> Result<GaussianMap, GaussianError> {
    if i == j {
        return Err(GaussianError::EqualModes(i, j));
    }
    for &k in [i, j].iter() {
        if k >= modes {
            return Err(GaussianError::ModeOutOfRange { index: k, modes });
        }
    }
    let mut e = CMat::identity(modes, modes);
    e[(i, i)] = C64::new(t.cosh(), 0.0);
    e[(j, j)] = C64::new(t.cosh(), 0.0);
    let mut f = CMat::zeros(modes, modes);
    f[(i, j)] = C64::new(t.sinh(), 0.0);
    f[(j, i)] = C64::new(t.sinh(), 0.0);
    Ok(GaussianMap {
        e,
        f,
        delta: CVec::zeros(modes),
    })
}

/// Passive (linear-optical) transformation `U(U)`: `a_i -> Σ_j U[i][j] a_j`.
pub fn passive_map(u: &CMat, tol: &GaussTolerances) -> Result<GaussianMap, GaussianError> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(GaussianError::ModeMismatch(u.nrows(), u.ncols()));
    }
    let uerr = linalg::unitarity_error(u);
    if uerr > tol.constraint {
        return Err(GaussianError::NotUnitary(uerr));
    }
    Ok(GaussianMap {
        e: u.clone(),
        f: CMat::zeros(n, n),
        delta: CVec::zeros(n),
    })
}

/// Map of the operator product `W_1 W_2` given the maps of `W_1` ("first",
/// the left factor) and `W_2`:
///
/// ```text
/// E = E1 E2 + F1 F2*,   F = E1 F2 + F1 E2*,   δ = E1 δ2 + F1 δ2* + δ1
/// ```
pub fn compose(first: &GaussianMap, second: &GaussianMap) -> Result<GaussianMap, GaussianError> {
    if first.modes() != second.modes() {
        return Err(GaussianError::ModeMismatch(first.modes(), second.modes()));
    }
    let e = &first.e * &second.e + &first.f * conj(&second.f);
    let f = &first.e * &second.f + &first.f * conj(&second.e);
    let delta =
        &first.e * &second.delta + &first.f * second.delta.map(|z| z.conj()) + &first.delta;
    Ok(GaussianMap { e, f, delta })
}

/// Map of a circuit given as factors in application order (`factors[0]` acts
/// on the state first), i.e. the operator product
/// `factors[k-1] · ... · factors[1] · factors[0]`.
pub fn compose_circuit(factors: &[GaussianMap]) -> Result<GaussianMap, GaussianError> {
    let Some(last) = factors.last() else {
        return Ok(GaussianMap::identity(0));
    };
    let mut acc = last.clone();
    for f in factors[..factors.len() - 1].iter().rev() {
        acc = compose(&acc, f)?;
    }
    Ok(acc)
}

/// The passive–squeeze–passive factorization `W = U(Ũ) S(λ̃) U(Ũ′)` of a
/// zero-displacement Gaussian unitary, canonicalized so that `λ̃ ≥ 0` sorted
/// descending (signs are phase-absorbed into the unitaries).
#[derive(Debug, Clone)]
pub struct BlochMessiahFactors {
    pub u: CMat,
    pub lambda: RVec,
    pub u_prime: CMat,
}

impl BlochMessiahFactors {
    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    /// `(E, F)` of the product `U(Ũ) S(λ̃) U(Ũ′)`:
    /// `E = Ũ cosh(Λ̃) Ũ′`, `F = Ũ sinh(Λ̃) Ũ′*`.
    pub fn reconstruct(&self) -> GaussianMap {
        let n = self.modes();
        let cosh = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.lambda[i].cosh(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let sinh = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.lambda[i].sinh(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        GaussianMap {
            e: &self.u * cosh * &self.u_prime,
            f: &self.u * sinh * conj(&self.u_prime),
            delta: CVec::zeros(n),
        }
    }
}

/// Bloch-Messiah decomposition of a zero-displacement [`GaussianMap`].
///
/// Uses the identity `B = F (E*)⁻¹ = Ũ tanh(Λ̃) Ũᵀ`: a Takagi factorization
/// of `B` yields `Ũ` and `λ̃ = atanh(σ)`, and `Ũ′ = cosh(Λ̃)⁻¹ Ũ† E` is then
/// unitary whenever the input satisfies the bosonic constraints. Degenerate
/// squeezing values (including the λ = 0 block) are handled inside the
/// Takagi routine; factors are not unique, only the reconstruction is.
pub fn bloch_messiah(
    map: &GaussianMap,
    tol: &GaussTolerances,
) -> Result<BlochMessiahFactors, GaussianError> {
    let n = map.modes();
    let delta_norm = max_abs_vec(&map.delta);
    if delta_norm > tol.constraint {
        return Err(GaussianError::UnexpectedDisplacement(delta_norm));
    }
    map.check_invariants(tol)?;
    if n == 0 {
        return Ok(BlochMessiahFactors {
            u: CMat::identity(0, 0),
            lambda: RVec::zeros(0),
            u_prime: CMat::identity(0, 0),
        });
    }

    let e_conj = conj(&map.e);
    let e_conj_inv = e_conj
        .clone()
        .try_inverse()
        .ok_or(GaussianError::SingularInput(0.0))?;
    let b = symmetrize(&(&map.f * e_conj_inv));

    let (u, tanh_vals) = takagi(&b, tol.reconstruction)?;
    let mut lambda = RVec::zeros(n);
    for (k, &tv) in tanh_vals.iter().enumerate() {
        if tv >= 1.0 {
            return Err(GaussianError::IllConditioned(tv));
        }
        lambda[k] = tv.atanh();
    }
    let inv_cosh = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0 / lambda[i].cosh(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let u_prime = inv_cosh * u.adjoint() * &map.e;

    let factors = BlochMessiahFactors { u, lambda, u_prime };
    let recon = factors.reconstruct();
    let err = max_abs_diff(&recon.e, &map.e).max(max_abs_diff(&recon.f, &map.f));
    if err > tol.reconstruction {
        return Err(GaussianError::ConstraintViolation(err));
    }
    Ok(factors)
}

/// Factorization of the Heisenberg position action `R -> A R + d` into
/// elementary Gaussian unitaries via the SVD `A = O_L L O_Rᵀ`:
///
/// ```text
/// W = U(O_Rᵀ) · S(log l) · U(O_L) · D(d/√2)      (application order)
/// ```
///
/// The returned factors are in application order (first entry acts on states
/// first); [`compose_circuit`] of the list is a map whose
/// [`GaussianMap::quadrature_action`] sends `R` to `A R + d` and `P` to
/// `A⁻ᵀ P`. Singular-vector signs are fixed by making the largest-magnitude
/// entry of each left singular vector positive, so the factors are
/// reproducible across platforms.
pub fn doktorov_factorize(
    a: &RMat,
    d: &RVec,
    tol: &GaussTolerances,
) -> Result<Vec<GaussianMap>, GaussianError> {
    let n = a.nrows();
    if a.ncols() != n || d.len() != n {
        return Err(GaussianError::ModeMismatch(a.nrows(), a.ncols().min(d.len())));
    }
    let (o_l, log_l, o_r_t) = doktorov_components(a, tol)?;
    let half_d = to_complex_vec(d).map(|z| z / std::f64::consts::SQRT_2);
    Ok(vec![
        passive_map(&to_complex(&o_r_t), tol)?,
        squeeze_map(&log_l),
        passive_map(&to_complex(&o_l), tol)?,
        displacement_map(&half_d),
    ])
}

/// The sign-fixed SVD pieces behind [`doktorov_factorize`]:
/// `A = O_L diag(exp(log_l)) O_Rᵀ` with singular values sorted descending
/// and the largest-magnitude entry of every left singular vector positive.
pub fn doktorov_components(
    a: &RMat,
    tol: &GaussTolerances,
) -> Result<(RMat, RVec, RMat), GaussianError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GaussianError::ModeMismatch(a.nrows(), a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let mut o_l = svd.u.ok_or(GaussianError::SingularInput(0.0))?;
    let mut o_r_t = svd.v_t.ok_or(GaussianError::SingularInput(0.0))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let o_l_sorted = RMat::from_fn(n, n, |i, j| o_l[(i, order[j])]);
    let o_r_t_sorted = RMat::from_fn(n, n, |i, j| o_r_t[(order[i], j)]);
    sv = order.iter().map(|&k| sv[k]).collect();
    o_l = o_l_sorted;
    o_r_t = o_r_t_sorted;

    for (j, &s) in sv.iter().enumerate() {
        if s <= tol.singular {
            return Err(GaussianError::SingularInput(s));
        }
        let mut arg = 0usize;
        for i in 0..n {
            if o_l[(i, j)].abs() > o_l[(arg, j)].abs() {
                arg = i;
            }
        }
        if o_l[(arg, j)] < 0.0 {
            for i in 0..n {
                o_l[(i, j)] = -o_l[(i, j)];
                o_r_t[(j, i)] = -o_r_t[(j, i)];
            }
        }
    }

    let log_l = RVec::from_fn(n, |j, _| sv[j].ln());
    Ok((o_l, log_l, o_r_t))
}
