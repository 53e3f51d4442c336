//! Chemistry-facing layer: two-surface harmonic models, Duschinsky/Doktorov
//! assembly, Franck-Condon factors and vibronic spectra.
//!
//! A [`VibronicModel`] holds the normal-mode frequencies of both electronic
//! surfaces, the Duschinsky rotation between their normal axes and the
//! frequency-weighted displacement of their minima. The FCF between quanta
//! `n` on the initial surface and `m` on the final surface is evaluated
//! through the amplitude pipeline using the SVD `A = O_L L O_Rᵀ` of the
//! dimensionless coordinate map `A = Ω_f^{1/2} O_D Ω_i^{-1/2}`:
//!
//! ```text
//! FCF(n, m) = <m| D(d/√2) U(O_L) S(log l) U(O_Rᵀ) |n>
//! ```
//!
//! i.e. the matrix element of the Doktorov operator whose Heisenberg
//! position action is `R -> A R + d` (the parameterization with the
//! opposite signs evaluates the inverse operator instead, which breaks the
//! surface-exchange symmetry and the textbook 0-0 overlap for unequal
//! frequencies). The result is real for the real inputs used here —
//! asserted, not assumed. Everything is unit-agnostic internally (`A` and
//! `d` are dimensionless); loaders convert from cm⁻¹ at the boundary.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::amplitude::{AmplitudeEngine, AmplitudeError, AmplitudeOptions, AmplitudeSpec};
use crate::gaussian::{doktorov_components, GaussTolerances, GaussianError};
use crate::linalg::{max_abs_diff_real, to_complex, RMat, RVec};

/// 1 hartree in wavenumbers.
pub const CM1_PER_HARTREE: f64 = 219474.6313632;

#[derive(Debug, Error)]
pub enum VibronicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("frequency {value} at mode {mode} is not positive")]
    NonPositiveFrequency { mode: usize, value: f64 },
    #[error("Duschinsky matrix is not orthogonal: residual {0:.3e}")]
    NotOrthogonal(f64),
    #[error("Hessian is not symmetric: residual {0:.3e}")]
    AsymmetricHessian(f64),
    #[error("Hessian is not positive definite: eigenvalue {0:.3e}")]
    NotBound(f64),
    #[error("amplitude has non-negligible imaginary part {im:.3e}; convention bug")]
    ImaginaryResidue { im: f64 },
    #[error(transparent)]
    Amplitude(#[from] AmplitudeError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// A two-surface harmonic problem in frequency-weighted normal coordinates.
#[derive(Debug, Clone)]
pub struct VibronicModel {
    omega_in: RVec,
    omega_final: RVec,
    duschinsky: RMat,
    displacement: RVec,
    e_offset: f64,
}

impl VibronicModel {
    /// Frequencies in atomic units (or any consistent unit: only ratios and
    /// the dimensionless displacement enter the FCFs; the unit shows up in
    /// spectrum energies alone).
    pub fn new(
        omega_in: RVec,
        omega_final: RVec,
        duschinsky: RMat,
        displacement: RVec,
        e_offset: f64,
    ) -> Result<Self, VibronicError> {
        let l = omega_in.len();
        if omega_final.len() != l
            || duschinsky.nrows() != l
            || duschinsky.ncols() != l
            || displacement.len() != l
        {
            return Err(VibronicError::Dimension(format!(
                "modes disagree: omega_in={}, omega_final={}, duschinsky={}x{}, d={}",
                l,
                omega_final.len(),
                duschinsky.nrows(),
                duschinsky.ncols(),
                displacement.len()
            )));
        }
        for (mode, &w) in omega_in.iter().chain(omega_final.iter()).enumerate() {
            if !(w > 0.0) {
                return Err(VibronicError::NonPositiveFrequency {
                    mode: mode % l.max(1),
                    value: w,
                });
            }
        }
        let gram = duschinsky.transpose() * &duschinsky;
        let residual = max_abs_diff_real(&gram, &RMat::identity(l, l));
        if residual > 1e-8 {
            return Err(VibronicError::NotOrthogonal(residual));
        }
        Ok(VibronicModel {
            omega_in,
            omega_final,
            duschinsky,
            displacement,
            e_offset,
        })
    }

    pub fn modes(&self) -> usize {
        self.omega_in.len()
    }

    pub fn omega_in(&self) -> &RVec {
        &self.omega_in
    }

    pub fn omega_final(&self) -> &RVec {
        &self.omega_final
    }

    pub fn duschinsky(&self) -> &RMat {
        &self.duschinsky
    }

    pub fn displacement(&self) -> &RVec {
        &self.displacement
    }

    pub fn e_offset(&self) -> f64 {
        self.e_offset
    }

    pub fn set_e_offset(&mut self, e: f64) {
        self.e_offset = e;
    }

    /// The dimensionless coordinate map `A = Ω_f^{1/2} O_D Ω_i^{-1/2}`.
    pub fn coordinate_map(&self) -> RMat {
        let l = self.modes();
        RMat::from_fn(l, l, |i, j| {
            self.omega_final[i].sqrt() * self.duschinsky[(i, j)] / self.omega_in[j].sqrt()
        })
    }

    /// Exchanges the roles of the surfaces: the coordinate map inverts and
    /// the displacement transforms accordingly.
    pub fn swapped(&self) -> Result<Self, VibronicError> {
        let a_inv = self
            .coordinate_map()
            .try_inverse()
            .expect("coordinate map of a valid model is invertible");
        let d_swapped = -(&a_inv * &self.displacement);
        VibronicModel::new(
            self.omega_final.clone(),
            self.omega_in.clone(),
            self.duschinsky.transpose(),
            d_swapped,
            -self.e_offset,
        )
    }
}

/// One electronic surface given as a mass-weighted Hessian and equilibrium
/// geometry (atomic units).
#[derive(Debug, Clone)]
pub struct SurfaceData {
    pub hessian: RMat,
    pub geometry: RVec,
}

/// Normal-mode data of one surface: frequencies ascending, eigenvector
/// signs fixed by the largest-magnitude component, degenerate blocks
/// re-orthonormalized by QR in index order.
fn normal_modes(surface: &SurfaceData) -> Result<(RVec, RMat), VibronicError> {
    let h = &surface.hessian;
    let n = h.nrows();
    if h.ncols() != n || surface.geometry.len() != n {
        return Err(VibronicError::Dimension(format!(
            "hessian {}x{}, geometry {}",
            h.nrows(),
            h.ncols(),
            surface.geometry.len()
        )));
    }
    let asym = max_abs_diff_real(h, &h.transpose());
    if asym > 1e-10 {
        return Err(VibronicError::AsymmetricHessian(asym));
    }
    let sym = (h + h.transpose()).scale(0.5);
    let (vals, mut vecs) = crate::linalg::sym_eigen_sorted(&sym);
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for &v in vals.iter() {
        if v <= 1e-12 * scale {
            return Err(VibronicError::NotBound(v));
        }
    }

    // Deterministic bases on degenerate blocks: QR of the block in index
    // order. The FCFs do not depend on this choice, only reproducibility of
    // the Duschinsky factors does.
    let tol = 1e-8 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[start]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let block = vecs.columns(start, end - start).clone_owned();
            let q = block.qr().q();
            vecs.view_mut((0, start), (n, end - start)).copy_from(&q);
        }
        start = end;
    }
    for j in 0..n {
        let mut arg = 0usize;
        for i in 0..n {
            if vecs[(i, j)].abs() > vecs[(arg, j)].abs() {
                arg = i;
            }
        }
        if vecs[(arg, j)] < 0.0 {
            for i in 0..n {
                vecs[(i, j)] = -vecs[(i, j)];
            }
        }
    }
    let omega = RVec::from_fn(n, |i, _| vals[i].sqrt());
    Ok((omega, vecs))
}

/// Builds the Duschinsky model from the two surfaces:
/// `O_D = O_fᵀ O_i` and `d = Ω_f^{1/2} O_fᵀ (R⁰_i - R⁰_f)`.
pub fn model_from_surfaces(
    initial: &SurfaceData,
    final_: &SurfaceData,
) -> Result<VibronicModel, VibronicError> {
    let (omega_in, o_in) = normal_modes(initial)?;
    let (omega_final, o_final) = normal_modes(final_)?;
    if omega_in.len() != omega_final.len() {
        return Err(VibronicError::Dimension(format!(
            "surfaces have {} and {} modes",
            omega_in.len(),
            omega_final.len()
        )));
    }
    let duschinsky = o_final.transpose() * &o_in;
    let delta = &initial.geometry - &final_.geometry;
    let rotated = o_final.transpose() * delta;
    let displacement = RVec::from_fn(omega_in.len(), |i, _| omega_final[i].sqrt() * rotated[i]);
    VibronicModel::new(omega_in, omega_final, duschinsky, displacement, 0.0)
}

/// Prepared FCF evaluator for a fixed model and initial quanta `n`; the
/// Doktorov factorization and the doubled Bloch-Messiah run once and every
/// final vector `m` costs one repetition expansion plus one loop hafnian.
pub struct FcfEngine {
    engine: AmplitudeEngine,
}

/// The [`AmplitudeSpec`] equivalent to `FCF(n, m)` for this model: the
/// Doktorov operator `D(d/√2) U(O_L) S(log l) U(O_Rᵀ)` between ket `n`
/// (initial-surface quanta) and bra `m` (final-surface quanta).
pub fn doktorov_amplitude_spec(
    model: &VibronicModel,
    n: &[usize],
    m: &[usize],
) -> Result<AmplitudeSpec, VibronicError> {
    let l = model.modes();
    if n.len() != l || m.len() != l {
        return Err(VibronicError::Dimension(format!(
            "quanta vectors have {} and {} entries for {} modes",
            n.len(),
            m.len(),
            l
        )));
    }
    let a = model.coordinate_map();
    let tol = GaussTolerances::default();
    let (o_l, log_l, o_r_t) = doktorov_components(&a, &tol)?;
    let alpha = model
        .displacement
        .map(|x| C64::new(x / std::f64::consts::SQRT_2, 0.0));
    Ok(AmplitudeSpec::new(
        m.to_vec(),
        n.to_vec(),
        alpha,
        to_complex(&o_l),
        to_complex(&o_r_t),
        log_l,
    )?)
}

impl FcfEngine {
    pub fn new(
        model: &VibronicModel,
        n: &[usize],
        opts: &AmplitudeOptions,
    ) -> Result<Self, VibronicError> {
        let spec = doktorov_amplitude_spec(model, n, &vec![0; model.modes()])?;
        Ok(FcfEngine {
            engine: AmplitudeEngine::for_spec(&spec, opts)?,
        })
    }

    /// The real overlap `<m_final | n_initial>`; errors out if the computed
    /// amplitude has a non-negligible imaginary part, which would signal a
    /// convention bug rather than a numerical issue.
    pub fn fcf(&self, m: &[usize]) -> Result<f64, VibronicError> {
        let v = self.engine.amplitude_for(m)?;
        if v.im.abs() > 1e-10 * (1.0 + v.norm()) {
            return Err(VibronicError::ImaginaryResidue { im: v.im });
        }
        Ok(v.re)
    }
}

/// One-shot Franck-Condon factor between `n` quanta on the initial surface
/// and `m` quanta on the final surface.
pub fn fcf(
    model: &VibronicModel,
    n: &[usize],
    m: &[usize],
    opts: &AmplitudeOptions,
) -> Result<f64, VibronicError> {
    FcfEngine::new(model, n, opts)?.fcf(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumLine {
    /// Transition energy in the model's frequency unit.
    pub energy: f64,
    /// Final-surface quanta of the line.
    pub quanta: Vec<usize>,
    /// Squared FCF.
    pub intensity: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Lines at or above the reporting threshold, sorted by energy.
    pub lines: Vec<SpectrumLine>,
    /// Probability summed over every enumerated final state, including the
    /// ones below the threshold.
    pub total_probability: f64,
}

/// All final vectors `m` with `Σ m_j <= max_total`, lexicographic.
fn bounded_quanta(modes: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; modes];
    fn rec(cur: &mut Vec<usize>, mode: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if mode == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[mode] = v;
            rec(cur, mode + 1, left - v, out);
        }
        cur[mode] = 0;
    }
    rec(&mut cur, 0, max_total, &mut out);
    out
}

/// Exhaustive vibronic spectrum from initial quanta `n` over all final
/// states with at most `max_total_quanta`: line positions are
/// `E_offset + Σ m_j ω_f,j - Σ n_j ω_i,j`, intensities are squared FCFs.
/// Lines below `threshold` are dropped from the output but still counted
/// in `total_probability`.
pub fn spectrum(
    model: &VibronicModel,
    n: &[usize],
    max_total_quanta: usize,
    threshold: f64,
    opts: &AmplitudeOptions,
) -> Result<Spectrum, VibronicError> {
    let engine = FcfEngine::new(model, n, opts)?;
    let base: f64 = model.e_offset
        - n.iter()
            .zip(model.omega_in.iter())
            .map(|(&nj, &w)| nj as f64 * w)
            .sum::<f64>();
    let finals = bounded_quanta(model.modes(), max_total_quanta);
    let evaluated: Vec<Result<SpectrumLine, VibronicError>> = finals
        .into_par_iter()
        .map(|m| {
            let value = engine.fcf(&m)?;
            let energy = base
                + m.iter()
                    .zip(model.omega_final.iter())
                    .map(|(&mj, &w)| mj as f64 * w)
                    .sum::<f64>();
            Ok(SpectrumLine {
                energy,
                quanta: m,
                intensity: value * value,
            })
        })
        .collect();

    let mut total = 0.0;
    let mut lines = Vec::new();
    for item in evaluated {
        let line = item?;
        total += line.intensity;
        if line.intensity >= threshold {
            lines.push(line);
        }
    }
    lines.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.quanta.cmp(&b.quanta)));
    Ok(Spectrum {
        lines,
        total_probability: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_oracle::oracle_amplitude;
    use crate::linalg::random_orthogonal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> AmplitudeOptions {
        AmplitudeOptions::default()
    }

    fn ln_fact(k: usize) -> f64 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    }

    /// One-mode model with equal frequencies and frequency-weighted
    /// displacement `d`.
    fn displaced_oscillator(d: f64, omega: f64) -> VibronicModel {
        VibronicModel::new(
            RVec::from_vec(vec![omega]),
            RVec::from_vec(vec![omega]),
            RMat::identity(1, 1),
            RVec::from_vec(vec![d]),
            0.0,
        )
        .unwrap()
    }

    fn random_model(l: usize, rng: &mut ChaCha8Rng) -> VibronicModel {
        VibronicModel::new(
            RVec::from_fn(l, |_, _| rng.gen_range(0.002..0.02)),
            RVec::from_fn(l, |_, _| rng.gen_range(0.002..0.02)),
            random_orthogonal(l, rng),
            RVec::from_fn(l, |_, _| rng.gen_range(-0.9..0.9)),
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn identical_surfaces_give_kronecker_fcfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let h = {
            let o = random_orthogonal(3, &mut rng);
            let d = RMat::from_fn(3, 3, |i, j| {
                if i == j {
                    rng.gen_range(0.0005..0.01)
                } else {
                    0.0
                }
            });
            &o * d * o.transpose()
        };
        let s = SurfaceData {
            hessian: h,
            geometry: RVec::from_vec(vec![0.1, -0.4, 0.2]),
        };
        let model = model_from_surfaces(&s, &s).unwrap();
        assert!(max_abs_diff_real(model.duschinsky(), &RMat::identity(3, 3)) < 1e-10);
        assert!(model.displacement().iter().all(|x| x.abs() < 1e-12));
        for (n, m, expected) in [
            (vec![0, 0, 0], vec![0, 0, 0], 1.0),
            (vec![1, 0, 2], vec![1, 0, 2], 1.0),
            (vec![1, 0, 0], vec![0, 1, 0], 0.0),
        ] {
            let v = fcf(&model, &n, &m, &opts()).unwrap();
            assert!((v - expected).abs() < 1e-9, "n={n:?} m={m:?}: {v}");
        }
    }

    #[test]
    fn pure_shift_gives_frequency_weighted_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let o = random_orthogonal(2, &mut rng);
        let freqs = [0.004, 0.011];
        let h = &o
            * RMat::from_fn(2, 2, |i, j| if i == j { freqs[i] * freqs[i] } else { 0.0 })
            * o.transpose();
        let shift = RVec::from_vec(vec![0.7, -0.3]);
        let s_in = SurfaceData {
            hessian: h.clone(),
            geometry: shift.clone(),
        };
        let s_final = SurfaceData {
            hessian: h,
            geometry: RVec::zeros(2),
        };
        let model = model_from_surfaces(&s_in, &s_final).unwrap();
        assert!(max_abs_diff_real(model.duschinsky(), &RMat::identity(2, 2)) < 1e-10);
        // d = Ω^{1/2} O_fᵀ Δ with Δ = R⁰_in - R⁰_final = shift.
        let (omega, o_f) = normal_modes(&s_final).unwrap();
        let expected = {
            let r = o_f.transpose() * &shift;
            RVec::from_fn(2, |i, _| omega[i].sqrt() * r[i])
        };
        for i in 0..2 {
            assert!((model.displacement()[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_surfaces_give_orthogonal_duschinsky() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..4 {
            let mut mk = |rng: &mut ChaCha8Rng| {
                let o = random_orthogonal(2, rng);
                let d = RMat::from_fn(2, 2, |i, j| {
                    if i == j {
                        rng.gen_range(0.001..0.02)
                    } else {
                        0.0
                    }
                });
                SurfaceData {
                    hessian: &o * d * o.transpose(),
                    geometry: RVec::from_fn(2, |_, _| rng.gen_range(-0.5..0.5)),
                }
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let model = model_from_surfaces(&a, &b).unwrap();
            let g = model.duschinsky().transpose() * model.duschinsky();
            assert!(max_abs_diff_real(&g, &RMat::identity(2, 2)) < 1e-10);
        }
    }

    #[test]
    fn displaced_oscillator_follows_poisson_law() {
        let d = 1.0;
        let model = displaced_oscillator(d, 0.01);
        let engine = FcfEngine::new(&model, &[0], &opts()).unwrap();
        let delta = d * d / 2.0;
        for m in 0..=8usize {
            let fcf2 = engine.fcf(&[m]).unwrap().powi(2);
            let poisson = (-delta).exp() * delta.powi(m as i32) / ln_fact(m).exp();
            assert!((fcf2 - poisson).abs() < 1e-9, "m={m}: {fcf2} vs {poisson}");
        }
    }

    #[test]
    fn zero_zero_overlap_matches_gaussian_integral() {
        // <0_f|0_in> for two 1-d harmonic ground states with frequencies
        // ω_i, ω_f and minima separated by Δ (mass-weighted):
        //   (2 √(ω_i ω_f) / (ω_i + ω_f))^{1/2} exp(-ω_i ω_f Δ² / (2 (ω_i + ω_f)))
        for (wi, wf, delta) in [
            (0.01f64, 0.02f64, 3.0f64),
            (0.015, 0.006, -5.0),
            (0.01, 0.01, 4.0),
        ] {
            let d = wf.sqrt() * delta; // frequency-weighted displacement
            let model = VibronicModel::new(
                RVec::from_vec(vec![wi]),
                RVec::from_vec(vec![wf]),
                RMat::identity(1, 1),
                RVec::from_vec(vec![d]),
                0.0,
            )
            .unwrap();
            let got = fcf(&model, &[0], &[0], &opts()).unwrap();
            let expected = (2.0 * (wi * wf).sqrt() / (wi + wf)).sqrt()
                * (-wi * wf * delta * delta / (2.0 * (wi + wf))).exp();
            assert!(
                (got - expected).abs() < 1e-12,
                "wi={wi} wf={wf}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_displacement_odd_fcfs_vanish_exactly() {
        let model = VibronicModel::new(
            RVec::from_vec(vec![0.01]),
            RVec::from_vec(vec![0.016]),
            RMat::identity(1, 1),
            RVec::zeros(1),
            0.0,
        )
        .unwrap();
        let engine = FcfEngine::new(&model, &[0], &opts()).unwrap();
        for m in [1usize, 3, 5, 7] {
            assert_eq!(engine.fcf(&[m]).unwrap(), 0.0);
        }
        // Even ones are real and nonzero.
        assert!(engine.fcf(&[2]).unwrap().abs() > 1e-4);
    }

    #[test]
    fn surface_exchange_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let model = random_model(2, &mut rng);
        let swapped = model.swapped().unwrap();
        for (n, m) in [
            (vec![0, 0], vec![2, 1]),
            (vec![1, 0], vec![0, 3]),
            (vec![2, 1], vec![1, 1]),
        ] {
            let forward = fcf(&model, &n, &m, &opts()).unwrap();
            let backward = fcf(&swapped, &m, &n, &opts()).unwrap();
            assert!(
                (forward - backward).abs() < 1e-9,
                "n={n:?} m={m:?}: {forward} vs {backward}"
            );
        }
    }

    #[test]
    fn completeness_grows_monotonically_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let model = VibronicModel::new(
            RVec::from_vec(vec![0.008, 0.012]),
            RVec::from_vec(vec![0.010, 0.009]),
            random_orthogonal(2, &mut rng),
            RVec::from_vec(vec![0.6, -0.4]),
            0.0,
        )
        .unwrap();
        let mut prev = 0.0;
        for cap in [2usize, 6, 10, 14] {
            let s = spectrum(&model, &[0, 0], cap, 0.0, &opts()).unwrap();
            assert!(s.total_probability >= prev - 1e-12);
            assert!(s.total_probability <= 1.0 + 1e-9);
            prev = s.total_probability;
        }
        assert!(prev > 0.999, "completeness reached only {prev}");
    }

    #[test]
    fn fcf_is_invariant_under_global_frequency_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let base = random_model(2, &mut rng);
        let scaled = VibronicModel::new(
            base.omega_in() * 3.7,
            base.omega_final() * 3.7,
            base.duschinsky().clone(),
            base.displacement().clone(),
            base.e_offset(),
        )
        .unwrap();
        for (n, m) in [(vec![0, 0], vec![2, 0]), (vec![1, 1], vec![0, 2])] {
            let a = fcf(&base, &n, &m, &opts()).unwrap();
            let b = fcf(&scaled, &n, &m, &opts()).unwrap();
            assert!((a - b).abs() < 1e-10, "rescaling changed FCF: {a} vs {b}");
        }
    }

    #[test]
    fn fcf_matches_fock_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let model = random_model(2, &mut rng);
        let a = model.coordinate_map();
        let tol = GaussTolerances::default();
        let (o_l, log_l, o_r_t) = doktorov_components(&a, &tol).unwrap();
        let alpha = model
            .displacement()
            .map(|x| C64::new(x / std::f64::consts::SQRT_2, 0.0));
        for m in [[0usize, 0], [1, 1], [2, 0], [3, 1]] {
            let spec = AmplitudeSpec::new(
                m.to_vec(),
                vec![0, 0],
                alpha.clone(),
                to_complex(&o_l),
                to_complex(&o_r_t),
                log_l.clone(),
            )
            .unwrap();
            let direct = fcf(&model, &[0, 0], &m, &opts()).unwrap();
            let oracle = oracle_amplitude(&spec, 18).unwrap();
            assert!(
                (direct - oracle.value.re).abs() < 1e-8 && oracle.value.im.abs() < 1e-8,
                "m={m:?}: {direct} vs {}",
                oracle.value
            );
        }
    }

    #[test]
    fn spectrum_of_identical_surfaces_is_a_single_line() {
        let h = RMat::from_fn(2, 2, |i, j| if i == j { 1e-4 } else { 0.0 });
        let s = SurfaceData {
            hessian: h,
            geometry: RVec::zeros(2),
        };
        let mut model = model_from_surfaces(&s, &s).unwrap();
        model.set_e_offset(0.05);
        let spec = spectrum(&model, &[0, 0], 3, 1e-12, &opts()).unwrap();
        assert_eq!(spec.lines.len(), 1);
        assert!((spec.lines[0].energy - 0.05).abs() < 1e-12);
        assert!((spec.lines[0].intensity - 1.0).abs() < 1e-9);
        assert!((spec.total_probability - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectrum_threshold_filters_output_but_not_probability() {
        let model = displaced_oscillator(1.0, 0.01);
        let all = spectrum(&model, &[0], 8, 0.0, &opts()).unwrap();
        let filtered = spectrum(&model, &[0], 8, 1e-2, &opts()).unwrap();
        assert!(filtered.lines.len() < all.lines.len());
        assert!((filtered.total_probability - all.total_probability).abs() < 1e-14);
        for w in filtered.lines.windows(2) {
            assert!(w[0].energy <= w[1].energy);
        }
        // Poisson envelope at the expected spacings.
        let delta = 0.5f64;
        for line in &all.lines {
            let m = line.quanta[0];
            let poisson = (-delta).exp() * delta.powi(m as i32) / ln_fact(m).exp();
            assert!((line.intensity - poisson).abs() < 1e-9);
            assert!((line.energy - m as f64 * 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_frequencies_are_handled() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        // Two exactly degenerate modes mixed by a rotation, plus a third.
        let o = random_orthogonal(3, &mut rng);
        let d = RMat::from_fn(3, 3, |i, j| {
            if i == j {
                if i < 2 {
                    4e-5
                } else {
                    9e-5
                }
            } else {
                0.0
            }
        });
        let s_in = SurfaceData {
            hessian: &o * &d * o.transpose(),
            geometry: RVec::from_vec(vec![0.2, 0.0, -0.1]),
        };
        let s_final = SurfaceData {
            hessian: d,
            geometry: RVec::zeros(3),
        };
        let model = model_from_surfaces(&s_in, &s_final).unwrap();
        let g = model.duschinsky().transpose() * model.duschinsky();
        assert!(max_abs_diff_real(&g, &RMat::identity(3, 3)) < 1e-8);
        let v = fcf(&model, &[0, 0, 0], &[0, 0, 0], &opts()).unwrap();
        assert!(v.abs() > 0.1, "0-0 overlap suspiciously small: {v}");
    }

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(
            VibronicModel::new(
                RVec::from_vec(vec![0.01, -0.01]),
                RVec::from_vec(vec![0.01, 0.01]),
                RMat::identity(2, 2),
                RVec::zeros(2),
                0.0,
            ),
            Err(VibronicError::NonPositiveFrequency { .. })
        ));
        let skew = RMat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.3 });
        assert!(matches!(
            VibronicModel::new(
                RVec::from_vec(vec![0.01, 0.01]),
                RVec::from_vec(vec![0.01, 0.01]),
                skew,
                RVec::zeros(2),
                0.0,
            ),
            Err(VibronicError::NotOrthogonal(_))
        ));
        let unbound = SurfaceData {
            hessian: RMat::from_fn(1, 1, |_, _| -1.0),
            geometry: RVec::zeros(1),
        };
        assert!(matches!(
            normal_modes(&unbound),
            Err(VibronicError::NotBound(_))
        ));
    }
}
