//! Trajectory geometry and spectral diagnostics.

use std::f64::consts::FRAC_PI_2;
use std::io::{self, Write};

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("need {need} valid angles, have {have}")]
    InsufficientData { have: usize, need: usize },
    #[error("basis columns are not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("subspaces coincide; the Friedrichs angle is undefined")]
    DegenerateIntersection,
    #[error("bases live in different ambient spaces ({0} vs {1})")]
    AmbientMismatch(usize, usize),
}

/// `cos` of the angle between consecutive differences, clamped to `[-1, 1]`.
pub fn trajectory_angle(v: &DVector<f64>, v_prev: &DVector<f64>) -> Option<f64> {
    let (a, b) = (v.norm(), v_prev.norm());
    if a < 1e-300 || b < 1e-300 {
        return None;
    }
    let c = v.dot(v_prev) / (a * b);
    c.is_finite().then(|| c.clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    StraightLine,
    Spiral,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    /// Number of trailing valid angles examined.
    pub window: usize,
    /// Straight line when the trailing mean is at least `1 - straight_tol`.
    pub straight_tol: f64,
    /// Spiral needs the trailing mean at most `1 - spiral_gap`.
    pub spiral_gap: f64,
    /// Spiral when the trailing standard deviation is at most this.
    pub spiral_spread: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            window: 50,
            straight_tol: 1e-3,
            spiral_gap: 1e-2,
            spiral_spread: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleSeries {
    /// `cos theta_k`; `None` where a difference vanished.
    pub values: Vec<Option<f64>>,
    pub kind: TrajectoryKind,
    /// Trailing mean, the estimate of `cos alpha_F` for spirals.
    pub limit: Option<f64>,
    /// Smallest and largest trailing value.
    pub band: Option<(f64, f64)>,
}

/// Angles along a sequence of differences `v_1, v_2, ...`.
pub fn angles_of_differences(diffs: &[DVector<f64>]) -> Vec<Option<f64>> {
    diffs
        .windows(2)
        .map(|w| trajectory_angle(&w[1], &w[0]))
        .collect()
}

/// Keeps the prefix of `values` whose difference norms stay above `floor`.
pub fn truncate_at_noise(values: &[Option<f64>], norms: &[f64], floor: f64) -> Vec<Option<f64>> {
    values
        .iter()
        .zip(norms)
        .take_while(|(_, &n)| n > floor)
        .map(|(v, _)| *v)
        .collect()
}

pub fn classify_trajectory(values: &[Option<f64>], config: &ClassifyConfig) -> Result<AngleSeries, SpectraError> {
    let valid: Vec<f64> = values.iter().flatten().copied().collect();
    let undetermined = AngleSeries {
        values: values.to_vec(),
        kind: TrajectoryKind::Undetermined,
        limit: None,
        band: None,
    };
    if valid.is_empty() {
        return Ok(undetermined);
    }
    if valid.len() < config.window || config.window == 0 {
        return Err(SpectraError::InsufficientData {
            have: valid.len(),
            need: config.window.max(1),
        });
    }
    let tail = &valid[valid.len() - config.window..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let spread = (tail.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let kind = if mean >= 1.0 - config.straight_tol {
        TrajectoryKind::StraightLine
    } else if mean <= 1.0 - config.spiral_gap && (spread <= config.spiral_spread || oscillates(tail, mean)) {
        TrajectoryKind::Spiral
    } else {
        TrajectoryKind::Undetermined
    };
    Ok(AngleSeries {
        kind,
        limit: Some(mean),
        band: Some((lo, hi)),
        ..undetermined
    })
}

/// Bounded oscillation: the series keeps crossing its mean and never settles at 1.
fn oscillates(tail: &[f64], mean: f64) -> bool {
    let crossings = tail
        .windows(2)
        .filter(|w| (w[0] - mean).signum() != (w[1] - mean).signum())
        .count();
    crossings * 4 >= tail.len()
}

fn orthonormality_gap(u: &DMatrix<f64>) -> f64 {
    let k = u.ncols();
    (u.tr_mul(u) - DMatrix::identity(k, k)).amax()
}

fn check_bases(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<(), SpectraError> {
    if u1.nrows() != u2.nrows() {
        return Err(SpectraError::AmbientMismatch(u1.nrows(), u2.nrows()));
    }
    for u in [u1, u2] {
        let deviation = orthonormality_gap(u);
        if deviation > 1e-10 {
            return Err(SpectraError::NotOrthonormal { deviation });
        }
    }
    Ok(())
}

/// Principal angles in ascending order, `min(dim T1, dim T2)` of them.
///
/// Large angles come from the cosines (singular values of `U1^T U2`), small
/// ones from the sines (singular values of `(I - U1 U1^T) U2`), which keeps
/// both ends accurate.
pub fn principal_angles(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<Vec<f64>, SpectraError> {
    check_bases(u1, u2)?;
    let (big, small) = if u1.ncols() >= u2.ncols() { (u1, u2) } else { (u2, u1) };
    let count = small.ncols();
    if count == 0 {
        return Ok(Vec::new());
    }
    let cross = big.tr_mul(small);
    let mut cosines: Vec<f64> = cross.singular_values().iter().copied().collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    let residual = small - big * &cross;
    let mut sines: Vec<f64> = residual.singular_values().iter().copied().collect();
    sines.sort_by(|a, b| a.total_cmp(b));
    Ok((0..count)
        .map(|i| {
            let c = cosines[i].min(1.0);
            let s = sines.get(i).copied().unwrap_or(0.0).min(1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

/// Angles below this count toward the intersection `T1 ∩ T2`.
pub const ZERO_ANGLE: f64 = 1e-8;

/// The smallest nonzero principal angle. When one subspace contains the
/// other the complements are orthogonal and the result is `pi/2`.
pub fn friedrichs_angle(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<f64, SpectraError> {
    let angles = principal_angles(u1, u2)?;
    match angles.iter().find(|&&a| a >= ZERO_ANGLE) {
        Some(&a) => Ok(a),
        None if u1.ncols() == u2.ncols() => Err(SpectraError::DegenerateIntersection),
        None => Ok(FRAC_PI_2),
    }
}

/// `P1 P2 + (I - P1)(I - P2)` for orthogonal projectors onto the given spans.
pub fn polyhedral_admm_matrix(t_ar: &DMatrix<f64>, t_bj: &DMatrix<f64>) -> Result<DMatrix<f64>, SpectraError> {
    check_bases(t_ar, t_bj)?;
    let p = t_ar.nrows();
    let id = DMatrix::<f64>::identity(p, p);
    let p1 = t_ar * t_ar.transpose();
    let p2 = t_bj * t_bj.transpose();
    Ok(&p1 * &p2 + (&id - &p1) * (&id - &p2))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues()
        .iter()
        .map(|c: &Complex<f64>| Complex64::new(c.re, c.im))
        .collect()
}

/// Roots of `rho^2 - (1 + a) eta rho + a eta = 0`, larger modulus first.
pub fn inertial_roots(eta: Complex64, a: f64) -> [Complex64; 2] {
    let sum = eta * (1.0 + a);
    let product = eta * a;
    let disc = (sum * sum - product * 4.0).sqrt();
    // pick the sign without cancellation, then use the product of the roots
    let big = if (sum + disc).norm() >= (sum - disc).norm() {
        (sum + disc) * 0.5
    } else {
        (sum - disc) * 0.5
    };
    let other = if big.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { product / big };
    [big, other]
}

/// Modulus of the dominant root.
pub fn inertial_spectral_radius(eta: Complex64, a: f64) -> f64 {
    let [r1, r2] = inertial_roots(eta, a);
    r1.norm().max(r2.norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeRow {
    pub eta: Complex64,
    pub a: f64,
    pub rho_abs: f64,
    pub accelerates: bool,
    pub converges: bool,
}

pub fn inertial_regime_map(etas: &[Complex64], a_grid: &[f64]) -> Vec<RegimeRow> {
    etas.iter()
        .flat_map(|&eta| {
            a_grid.iter().map(move |&a| {
                let rho_abs = inertial_spectral_radius(eta, a);
                RegimeRow {
                    eta,
                    a,
                    rho_abs,
                    accelerates: rho_abs < eta.norm(),
                    converges: rho_abs < 1.0,
                }
            })
        })
        .collect()
}

/// `cos(alpha) e^{i alpha}` for `alpha = k * pi / steps`, `k = 1..=count`.
pub fn rotation_etas(steps: usize, count: usize) -> Vec<Complex64> {
    (1..=count)
        .map(|k| {
            let alpha = k as f64 * std::f64::consts::PI / steps as f64;
            Complex64::from_polar(alpha.cos(), alpha)
        })
        .collect()
}

pub const REGIME_HEADER: &str = "re_eta,im_eta,a,rho_abs,accelerates,converges";

pub fn write_regime_csv(rows: &[RegimeRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{REGIME_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.eta.re, r.eta.im, r.a, r.rho_abs, r.accelerates, r.converges
        )?;
    }
    Ok(())
}
