//! File formats shared by the library and the CLI.
//!
//! * Matrix JSON: `{"n": int, "entries": [[[re, im], ...], ...]}` row-major;
//!   symmetric loads reject inputs with `max |G[i][j] - G[j][i]| > 1e-12`.
//! * Amplitude-spec JSON: `{"l", "m", "n", "alpha", "U", "Uprime", "lambda"}`
//!   with complex entries as `[re, im]` pairs and matrices in the same
//!   row-major nesting as the matrix file's `entries`.
//! * Vibronic model JSON: either precomputed mode data
//!   (`frequencies_in_cm1`, `frequencies_final_cm1`, `duschinsky`,
//!   `displacement`, `e_offset_cm1`) or raw surfaces (`hessian_in`,
//!   `hessian_final`, `geometry_in`, `geometry_final` in mass-weighted
//!   atomic units, plus an optional `e_offset_cm1`).
//! * Spectrum CSV: header `energy_cm1,intensity`, ascending energies,
//!   12 significant digits.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amplitude::{AmplitudeError, AmplitudeSpec};
use crate::linalg::{CMat, CVec, RMat, RVec};
use crate::matchgraph::{MatchGraphError, SymmetricMatrix};
use crate::vibronic::{
    model_from_surfaces, Spectrum, SurfaceData, VibronicError, VibronicModel, CM1_PER_HARTREE,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent data: {0}")]
    Shape(String),
    #[error(transparent)]
    Matrix(#[from] MatchGraphError),
    #[error(transparent)]
    Spec(#[from] AmplitudeError),
    #[error(transparent)]
    Model(#[from] VibronicError),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

fn parse_complex_matrix(entries: &[Vec<[f64; 2]>], n: usize) -> Result<CMat, IoError> {
    if entries.len() != n || entries.iter().any(|row| row.len() != n) {
        return Err(IoError::Shape(format!(
            "expected {n}x{n} entries, got {} rows",
            entries.len()
        )));
    }
    Ok(CMat::from_fn(n, n, |i, j| {
        C64::new(entries[i][j][0], entries[i][j][1])
    }))
}

/// Loads the shared matrix format and enforces symmetry.
pub fn load_symmetric_matrix(path: &Path) -> Result<SymmetricMatrix, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_symmetric_matrix(&text)
}

pub fn parse_symmetric_matrix(text: &str) -> Result<SymmetricMatrix, IoError> {
    let file: MatrixFile = serde_json::from_str(text)?;
    let raw = parse_complex_matrix(&file.entries, file.n)?;
    Ok(SymmetricMatrix::new(raw)?)
}

/// Loads the shared matrix format without the symmetry requirement (for the
/// permanent, which accepts any square matrix).
pub fn load_square_matrix(path: &Path) -> Result<CMat, IoError> {
    let text = std::fs::read_to_string(path)?;
    let file: MatrixFile = serde_json::from_str(&text)?;
    parse_complex_matrix(&file.entries, file.n)
}

pub fn matrix_to_json(m: &SymmetricMatrix) -> String {
    let n = m.dim();
    let entries: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|i| (0..n).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
        .collect();
    serde_json::to_string_pretty(&MatrixFile { n, entries }).expect("serializable")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AmplitudeSpecFile {
    pub l: usize,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub alpha: Vec<[f64; 2]>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "Uprime")]
    pub u_prime: Vec<Vec<[f64; 2]>>,
    pub lambda: Vec<f64>,
}

pub fn load_amplitude_spec(path: &Path) -> Result<AmplitudeSpec, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_amplitude_spec(&text)
}

pub fn parse_amplitude_spec(text: &str) -> Result<AmplitudeSpec, IoError> {
    let file: AmplitudeSpecFile = serde_json::from_str(text)?;
    let l = file.l;
    if file.m.len() != l || file.n.len() != l || file.alpha.len() != l || file.lambda.len() != l {
        return Err(IoError::Shape(format!(
            "vector lengths disagree with l = {l}"
        )));
    }
    let alpha = CVec::from_fn(l, |i, _| C64::new(file.alpha[i][0], file.alpha[i][1]));
    let u = parse_complex_matrix(&file.u, l)?;
    let u_prime = parse_complex_matrix(&file.u_prime, l)?;
    Ok(AmplitudeSpec::new(
        file.m,
        file.n,
        alpha,
        u,
        u_prime,
        RVec::from_vec(file.lambda),
    )?)
}

pub fn amplitude_spec_to_json(spec: &AmplitudeSpec) -> String {
    let l = spec.modes();
    let cm = |m: &CMat| -> Vec<Vec<[f64; 2]>> {
        (0..l)
            .map(|i| (0..l).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    };
    let file = AmplitudeSpecFile {
        l,
        m: spec.bra_photons().to_vec(),
        n: spec.ket_photons().to_vec(),
        alpha: spec.alpha().iter().map(|z| [z.re, z.im]).collect(),
        u: cm(spec.unitary()),
        u_prime: cm(spec.unitary_prime()),
        lambda: spec.lambda().iter().copied().collect(),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

/// Vibronic model input: precomputed mode data or raw surfaces.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Modes {
        frequencies_in_cm1: Vec<f64>,
        frequencies_final_cm1: Vec<f64>,
        duschinsky: Vec<Vec<f64>>,
        displacement: Vec<f64>,
        e_offset_cm1: f64,
    },
    Surfaces {
        hessian_in: Vec<Vec<f64>>,
        hessian_final: Vec<Vec<f64>>,
        geometry_in: Vec<f64>,
        geometry_final: Vec<f64>,
        #[serde(default)]
        e_offset_cm1: Option<f64>,
    },
}

fn parse_real_matrix(entries: &[Vec<f64>], what: &str) -> Result<RMat, IoError> {
    let n = entries.len();
    if entries.iter().any(|row| row.len() != n) {
        return Err(IoError::Shape(format!("{what} is not square")));
    }
    Ok(RMat::from_fn(n, n, |i, j| entries[i][j]))
}

pub fn load_model(path: &Path) -> Result<VibronicModel, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

/// Frequencies arrive in cm⁻¹ and are converted to atomic units; Hessians
/// and geometries are taken as mass-weighted atomic units directly.
pub fn parse_model(text: &str) -> Result<VibronicModel, IoError> {
    let file: ModelFile = serde_json::from_str(text)?;
    match file {
        ModelFile::Modes {
            frequencies_in_cm1,
            frequencies_final_cm1,
            duschinsky,
            displacement,
            e_offset_cm1,
        } => {
            let l = frequencies_in_cm1.len();
            let to_au = |v: &[f64]| RVec::from_fn(v.len(), |i, _| v[i] / CM1_PER_HARTREE);
            let dusch = parse_real_matrix(&duschinsky, "duschinsky")?;
            if dusch.nrows() != l {
                return Err(IoError::Shape(format!(
                    "duschinsky is {}x{} for {l} modes",
                    dusch.nrows(),
                    dusch.ncols()
                )));
            }
            Ok(VibronicModel::new(
                to_au(&frequencies_in_cm1),
                to_au(&frequencies_final_cm1),
                dusch,
                RVec::from_vec(displacement),
                e_offset_cm1 / CM1_PER_HARTREE,
            )?)
        }
        ModelFile::Surfaces {
            hessian_in,
            hessian_final,
            geometry_in,
            geometry_final,
            e_offset_cm1,
        } => {
            let initial = SurfaceData {
                hessian: parse_real_matrix(&hessian_in, "hessian_in")?,
                geometry: RVec::from_vec(geometry_in),
            };
            let final_ = SurfaceData {
                hessian: parse_real_matrix(&hessian_final, "hessian_final")?,
                geometry: RVec::from_vec(geometry_final),
            };
            let mut model = model_from_surfaces(&initial, &final_)?;
            model.set_e_offset(e_offset_cm1.unwrap_or(0.0) / CM1_PER_HARTREE);
            Ok(model)
        }
    }
}

/// `%.{sig}g`-style formatting: up to `sig` significant digits, positional
/// notation for moderate exponents, trailing zeros trimmed. Round-trips
/// doubles when `sig = 17`; `sig = 15` is the repo-wide output precision.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig.saturating_sub(1), x);
    let (mantissa, exp_str) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp_str.parse().expect("exponent");
    if exp >= -4 && (exp as i64) < sig as i64 {
        let decimals = (sig as i64 - 1 - exp as i64).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        let trimmed = if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        };
        if trimmed == "-0" {
            "0".to_string()
        } else {
            trimmed
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

/// Spectrum CSV: `energy_cm1,intensity`, ascending, 12 significant digits.
/// Energies are converted from the model's internal atomic units.
pub fn write_spectrum_csv(mut w: impl Write, spectrum: &Spectrum) -> Result<(), IoError> {
    writeln!(w, "energy_cm1,intensity")?;
    for line in &spectrum.lines {
        writeln!(
            w,
            "{},{}",
            fmt_sig(line.energy * CM1_PER_HARTREE, 12),
            fmt_sig(line.intensity, 12)
        )?;
    }
    Ok(())
}
