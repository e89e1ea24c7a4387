//! Trajectory-following extrapolation.
//!
//! The last `q + 1` differences `v_j = z_j - z_{j-1}` are kept newest first.
//! A least-squares fit `v_k ≈ sum_j c_j v_{k-j}` defines the companion matrix
//! `C = H(c)`, and the trajectory is continued by powers of `C`:
//!
//! ```text
//! z_{k,s} = z_k + V_k (C + C^2 + ... + C^s)[:, 0]
//! z_{k,∞} = z_{k-1} + V_k ((I - C)^{-1})[:, 0]
//! ```
//!
//! where `V_k = [v_k, ..., v_{k-q+1}]`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// `|1 - sum(c)|` at or below this declines the infinite-depth extrapolation.
pub const NEAR_SINGULAR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtrapError {
    #[error("dimension mismatch: window holds vectors of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need {need} differences, window holds {have}")]
    InsufficientHistory { have: usize, need: usize },
    #[error("eigenvalue computation failed")]
    EigenFailure,
    #[error("|1 - sum(c)| = {gap:e} is too small for the closed form")]
    NearSingular { gap: f64 },
    #[error("spectral radius {rho} >= 1; the power series does not converge")]
    SpectralRadius { rho: f64 },
    #[error("constrained least-squares system is singular")]
    DegenerateConstraint,
    #[error("series diverges: {0}")]
    DivergentSeries(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Ring of the most recent differences, column 0 newest.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffWindow {
    dim: usize,
    capacity: usize,
    columns: VecDeque<DVector<f64>>,
}

impl DiffWindow {
    pub fn new(dim: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        Self {
            dim,
            capacity,
            columns: VecDeque::with_capacity(capacity),
        }
    }

    /// Window sized for fitting `q` coefficients: `q + 1` columns.
    pub fn for_order(dim: usize, q: usize) -> Self {
        Self::new(dim, q + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.columns.len() == self.capacity
    }

    pub fn column(&self, j: usize) -> &DVector<f64> {
        &self.columns[j]
    }

    pub fn clear(&mut self) {
        self.columns.clear();
    }

    pub fn push_difference(&mut self, v: DVector<f64>) -> Result<(), ExtrapError> {
        if v.len() != self.dim {
            return Err(ExtrapError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if self.columns.len() == self.capacity {
            self.columns.pop_back();
        }
        self.columns.push_front(v);
        Ok(())
    }

    /// Columns `start..start + count` as a `dim x count` matrix.
    pub fn matrix(&self, start: usize, count: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, count, |i, j| self.columns[start + j][i])
    }

    /// `z_{k-j}` reconstructed from `z_k` and the newest `j` differences.
    pub fn past_iterate(&self, z: &DVector<f64>, j: usize) -> DVector<f64> {
        let mut out = z.clone();
        for col in self.columns.iter().take(j) {
            out -= col;
        }
        out
    }
}

/// Result of fitting `v_k ≈ V_{k-1} c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionFit {
    pub coeffs: DVector<f64>,
    pub companion: DMatrix<f64>,
    pub spectral_radius: f64,
    /// `||V_{k-1} c - v_k||`.
    pub residual: f64,
    pub coeff_sum: f64,
}

impl CompanionFit {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `(C^i e_1)` for `i = 1, 2, ...`, using the sparsity of `H(c)`.
    fn first_column_powers(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        let mut w = DVector::zeros(self.order());
        w[0] = 1.0;
        std::iter::repeat(()).map(move |_| {
            w = companion_mul(&self.coeffs, &w);
            w.clone()
        })
    }
}

/// `H(c)`: first column `c`, identity above the diagonal, zeros elsewhere.
pub fn companion_matrix(c: &DVector<f64>) -> DMatrix<f64> {
    let q = c.len();
    let mut h = DMatrix::zeros(q, q);
    for i in 0..q {
        h[(i, 0)] = c[i];
        if i + 1 < q {
            h[(i, i + 1)] = 1.0;
        }
    }
    h
}

/// `H(c) w` in O(q).
fn companion_mul(c: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let q = c.len();
    DVector::from_fn(q, |i, _| c[i] * w[0] + if i + 1 < q { w[i + 1] } else { 0.0 })
}

/// Minimum-norm least squares. Full-rank systems go through Householder QR;
/// rank deficiency, detected with column pivoting, falls back to the SVD.
pub(crate) fn least_squares_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (p, q) = a.shape();
    if q == 0 {
        return DVector::zeros(0);
    }
    let tol = (p.max(q) as f64) * f64::EPSILON;
    let pivoted = a.clone().col_piv_qr();
    let r = pivoted.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..p.min(q)).filter(|&i| lead > 0.0 && r[(i, i)].abs() > tol * lead).count();
    if rank == 0 {
        return DVector::zeros(q);
    }
    if rank == q {
        let qr = a.clone().qr();
        let rhs = qr.q().tr_mul(b);
        if let Some(x) = qr.r().solve_upper_triangular(&rhs) {
            return x;
        }
    }
    let svd = a.clone().svd(true, true);
    let cutoff = tol * svd.singular_values.max();
    svd.solve(b, cutoff).unwrap_or_else(|_| DVector::zeros(q))
}

pub fn fit_coefficients(window: &DiffWindow) -> Result<CompanionFit, ExtrapError> {
    let need = window.capacity();
    if need < 2 {
        return Err(ExtrapError::InvalidParameter(
            "window must hold at least two differences".into(),
        ));
    }
    if window.len() < need {
        return Err(ExtrapError::InsufficientHistory {
            have: window.len(),
            need,
        });
    }
    let q = need - 1;
    let history = window.matrix(1, q);
    let target = window.column(0);
    let coeffs = least_squares_min_norm(&history, target);
    let residual = (&history * &coeffs - target).norm();
    let spectral_radius = spectral_radius(&coeffs)?;
    Ok(CompanionFit {
        coeff_sum: coeffs.sum(),
        companion: companion_matrix(&coeffs),
        coeffs,
        spectral_radius,
        residual,
    })
}

/// Largest eigenvalue modulus of `H(c)`.
pub fn spectral_radius(c: &DVector<f64>) -> Result<f64, ExtrapError> {
    match c.len() {
        0 => Ok(0.0),
        1 => Ok(c[0].abs()),
        _ => {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(ExtrapError::EigenFailure);
            }
            let eig = companion_matrix(c).complex_eigenvalues();
            let rho = eig.iter().map(|l| l.norm()).fold(0.0_f64, f64::max);
            if rho.is_finite() {
                Ok(rho)
            } else {
                Err(ExtrapError::EigenFailure)
            }
        }
    }
}

fn check_window(z: &DVector<f64>, window: &DiffWindow, q: usize) -> Result<(), ExtrapError> {
    if z.len() != window.dim() {
        return Err(ExtrapError::DimensionMismatch {
            expected: window.dim(),
            got: z.len(),
        });
    }
    if window.len() < q {
        return Err(ExtrapError::InsufficientHistory {
            have: window.len(),
            need: q,
        });
    }
    Ok(())
}

/// `z_k + V_k (sum_{i=1}^s C^i)[:, 0]`.
pub fn extrapolate_finite(
    z: &DVector<f64>,
    window: &DiffWindow,
    fit: &CompanionFit,
    s: usize,
) -> Result<DVector<f64>, ExtrapError> {
    let q = fit.order();
    check_window(z, window, q)?;
    if s == 0 {
        return Err(ExtrapError::InvalidParameter("depth s must be at least 1".into()));
    }
    let sum = fit
        .first_column_powers()
        .take(s)
        .fold(DVector::zeros(q), |acc, w| acc + w);
    Ok(z + window.matrix(0, q) * sum)
}

/// `z_{k-1} + V_k ((I - C)^{-1})[:, 0]`, via one `q x q` solve.
pub fn extrapolate_infinite(
    z: &DVector<f64>,
    window: &DiffWindow,
    fit: &CompanionFit,
) -> Result<DVector<f64>, ExtrapError> {
    let q = fit.order();
    check_window(z, window, q)?;
    if fit.spectral_radius >= 1.0 {
        return Err(ExtrapError::SpectralRadius {
            rho: fit.spectral_radius,
        });
    }
    let gap = 1.0 - fit.coeff_sum;
    if gap.abs() <= NEAR_SINGULAR {
        return Err(ExtrapError::NearSingular { gap: gap.abs() });
    }
    let mut e1 = DVector::zeros(q);
    e1[0] = 1.0;
    let system = DMatrix::identity(q, q) - &fit.companion;
    let g = system.lu().solve(&e1).ok_or(ExtrapError::NearSingular { gap: gap.abs() })?;
    let out = (z - window.column(0)) + window.matrix(0, q) * g;

    #[cfg(debug_assertions)]
    {
        let weighted = extrapolate_infinite_weighted(z, window, fit)?;
        let scale = (z.norm() + (1..=q).map(|j| fit.coeffs[j - 1].abs() * window.past_iterate(z, j).norm()).sum::<f64>())
            / gap.abs();
        debug_assert!(
            (&weighted - &out).norm() <= 1e-6 * scale + 1e-300,
            "closed forms disagree: {:e} vs scale {:e}",
            (&weighted - &out).norm(),
            scale
        );
    }
    Ok(out)
}

/// The weighted-iterate form `(z_k - sum_{j=1}^q c_j z_{k-j}) / (1 - sum c)`.
pub fn extrapolate_infinite_weighted(
    z: &DVector<f64>,
    window: &DiffWindow,
    fit: &CompanionFit,
) -> Result<DVector<f64>, ExtrapError> {
    let q = fit.order();
    check_window(z, window, q)?;
    let gap = 1.0 - fit.coeff_sum;
    if gap.abs() <= NEAR_SINGULAR {
        return Err(ExtrapError::NearSingular { gap: gap.abs() });
    }
    let mut acc = z.clone();
    for j in 1..=q {
        acc -= window.past_iterate(z, j) * fit.coeffs[j - 1];
    }
    Ok(acc / gap)
}

/// Weights `g` with `sum g = 1` minimizing `||sum_i g_i v_{k-i}||` over the whole window.
pub fn rre_coefficients(window: &DiffWindow) -> Result<DVector<f64>, ExtrapError> {
    let cols = window.capacity();
    if window.len() < cols {
        return Err(ExtrapError::InsufficientHistory {
            have: window.len(),
            need: cols,
        });
    }
    // g = e_0 + sum_i t_i (e_i - e_0) turns the constraint into plain least squares
    let head = window.column(0);
    let reduced = DMatrix::from_fn(window.dim(), cols - 1, |i, j| window.column(j + 1)[i] - head[i]);
    if cols > 1 {
        let rank_tol = (window.dim().max(cols) as f64) * f64::EPSILON;
        let sv = reduced.singular_values();
        let top = sv.max();
        let rank = sv.iter().filter(|&&s| s > rank_tol * top).count();
        if top == 0.0 && head.norm() == 0.0 || rank < cols - 1 && top > 0.0 {
            return Err(ExtrapError::DegenerateConstraint);
        }
    }
    let t = least_squares_min_norm(&reduced, &(-head));
    let mut g = DVector::zeros(cols);
    g[0] = 1.0 - t.sum();
    g.rows_mut(1, cols - 1).copy_from(&t);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(ExtrapError::DegenerateConstraint);
    }
    Ok(g)
}

/// `sum_i g_i z_{k-i}`.
pub fn rre_extrapolate(z: &DVector<f64>, window: &DiffWindow, weights: &DVector<f64>) -> Result<DVector<f64>, ExtrapError> {
    check_window(z, window, weights.len().saturating_sub(1))?;
    let mut out = DVector::zeros(z.len());
    for (i, g) in weights.iter().enumerate() {
        out += window.past_iterate(z, i) * *g;
    }
    Ok(out)
}

fn first_entry_partial_sums(fit: &CompanionFit, upto: usize) -> Vec<f64> {
    // sums[j] = sum_{i=0}^{j} (C^i)_{11}
    let mut sums = Vec::with_capacity(upto + 1);
    let mut acc = 1.0;
    sums.push(acc);
    for w in fit.first_column_powers().take(upto) {
        acc += w[0];
        sums.push(acc);
    }
    sums
}

/// `B_s = sum_{l=1}^s ||M^l|| * |sum_{i=0}^{s-l} (C^i)_{11}|`, with
/// `power_norms[l - 1] = ||M^l||`.
pub fn fitting_error_bound(fit: &CompanionFit, power_norms: &[f64], s: usize) -> Result<f64, ExtrapError> {
    if fit.spectral_radius >= 1.0 {
        return Err(ExtrapError::DivergentSeries(format!(
            "rho(C) = {}",
            fit.spectral_radius
        )));
    }
    if power_norms.len() < s {
        return Err(ExtrapError::InvalidParameter(format!(
            "need ||M^l|| for l = 1..{s}, got {}",
            power_norms.len()
        )));
    }
    if power_norms.iter().any(|x| !x.is_finite()) {
        return Err(ExtrapError::DivergentSeries("non-finite ||M^l||".into()));
    }
    let sums = first_entry_partial_sums(fit, s);
    Ok((1..=s).map(|l| power_norms[l - 1] * sums[s - l].abs()).sum())
}

/// `B_inf = |1 - sum c|^{-1} sum_{l>=1} ||M||^l`.
pub fn fitting_error_bound_infinite(fit: &CompanionFit, m_norm: f64) -> Result<f64, ExtrapError> {
    if fit.spectral_radius >= 1.0 {
        return Err(ExtrapError::DivergentSeries(format!(
            "rho(C) = {}",
            fit.spectral_radius
        )));
    }
    if !(m_norm < 1.0) {
        return Err(ExtrapError::DivergentSeries(format!("||M|| = {m_norm}")));
    }
    let gap = (1.0 - fit.coeff_sum).abs();
    if gap <= NEAR_SINGULAR {
        return Err(ExtrapError::NearSingular { gap });
    }
    Ok(m_norm / (1.0 - m_norm) / gap)
}
