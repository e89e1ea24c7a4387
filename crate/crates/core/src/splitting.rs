//! The ADMM family written as one-step transitions on the four-point state
//! `(x, y, psi, z)`, plus the dual Douglas–Rachford / Peaceman–Rachford
//! fixed-point iterations used to cross-check them.
//!
//! Problems have the form
//!
//! ```text
//! min_{x, y}  R(x) + J(y)   subject to   A x + B y = b
//! ```
//!
//! Steps run in the order `y, psi, x, z`, starting from the point `z_bar`
//! carried by the state, so that an accelerator only ever modifies `z`:
//!
//! ```text
//! y    = argmin J(y) + gamma/2 || B y + (z_bar - gamma b) / gamma ||^2
//! psi  = z_bar + gamma (B y - b)
//! x    = argmin R(x) + gamma/2 || A x - (z_bar - 2 psi) / gamma ||^2
//! z    = psi + gamma A x                                  (standard)
//! z    = psi + gamma (phi A x - (1 - phi)(B y - b))       (relaxed)
//! z    = psi + gamma (2 A x + B y - b)                    (symmetric)
//! ```

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::a3dmm::InnerSolver;
use crate::linear::LinearMap;
use crate::prox::{ProxError, ProxOracle};

/// Growth of `||v_k||` over the first difference that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(transparent)]
    Subproblem(#[from] ProxError),
    #[error("relaxation parameter phi = {0} outside ]0, 2[")]
    BadRelaxation(f64),
    #[error("penalty gamma = {0} must be positive and finite")]
    BadGamma(f64),
    #[error("iteration diverged at k = {k}: ||v_k|| = {norm:e}")]
    Divergence { k: usize, norm: f64 },
    #[error("inconsistent dimensions: {0}")]
    Dimensions(String),
}

/// A subproblem solved only approximately, by an inner iterative method.
pub trait IterativeSubproblem: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// Approximate `argmin f(x) + gamma/2 ||M x - w||^2`, starting from `warm`.
    fn solve(
        &self,
        w: &DVector<f64>,
        gamma: f64,
        warm: &DVector<f64>,
        inner: &InnerSolver,
    ) -> Result<DVector<f64>, ProxError>;

    fn default_inner(&self) -> InnerSolver;

    fn value(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// How the x-subproblem is answered.
#[derive(Clone, Debug)]
pub enum Subproblem {
    Exact(Arc<dyn ProxOracle>),
    Iterative(Arc<dyn IterativeSubproblem>),
}

impl Subproblem {
    pub fn dim(&self) -> usize {
        match self {
            Subproblem::Exact(o) => o.dim(),
            Subproblem::Iterative(o) => o.dim(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Subproblem::Exact(o) => o.name(),
            Subproblem::Iterative(o) => o.name(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            Subproblem::Exact(o) => o.value(x),
            Subproblem::Iterative(o) => o.value(x),
        }
    }

    fn solve(
        &self,
        w: &DVector<f64>,
        gamma: f64,
        warm: &DVector<f64>,
        inner: Option<&InnerSolver>,
    ) -> Result<DVector<f64>, ProxError> {
        match self {
            Subproblem::Exact(o) => o.evaluate(w, gamma),
            Subproblem::Iterative(o) => match inner {
                Some(cfg) => o.solve(w, gamma, warm, cfg),
                None => o.solve(w, gamma, warm, &o.default_inner()),
            },
        }
    }
}

/// `min R(x) + J(y)  s.t.  A x + B y = b`.
#[derive(Clone, Debug)]
pub struct SplitProblem {
    r: Subproblem,
    j: Arc<dyn ProxOracle>,
    a: LinearMap,
    b_map: LinearMap,
    offset: DVector<f64>,
}

impl SplitProblem {
    pub fn new(
        r: Subproblem,
        j: Arc<dyn ProxOracle>,
        a: LinearMap,
        b_map: LinearMap,
        offset: DVector<f64>,
    ) -> Result<Self, SplitError> {
        let p = offset.len();
        if a.rows() != p || b_map.rows() != p {
            return Err(SplitError::Dimensions(format!(
                "A is {}x{}, B is {}x{}, b has length {p}",
                a.rows(),
                a.cols(),
                b_map.rows(),
                b_map.cols()
            )));
        }
        if r.dim() != a.cols() {
            return Err(SplitError::Dimensions(format!(
                "R acts on R^{} but A has {} columns",
                r.dim(),
                a.cols()
            )));
        }
        if j.dim() != b_map.cols() {
            return Err(SplitError::Dimensions(format!(
                "J acts on R^{} but B has {} columns",
                j.dim(),
                b_map.cols()
            )));
        }
        Ok(Self {
            r,
            j,
            a,
            b_map,
            offset,
        })
    }

    /// `(n, m, p)`: sizes of `x`, `y` and the constraint.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.cols(), self.b_map.cols(), self.offset.len())
    }

    pub fn r(&self) -> &Subproblem {
        &self.r
    }

    pub fn j(&self) -> &Arc<dyn ProxOracle> {
        &self.j
    }

    pub fn a(&self) -> &LinearMap {
        &self.a
    }

    pub fn b_map(&self) -> &LinearMap {
        &self.b_map
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Same problem with the x-subproblem swapped out.
    pub fn with_r(&self, r: Subproblem) -> Result<Self, SplitError> {
        Self::new(r, self.j.clone(), self.a.clone(), self.b_map.clone(), self.offset.clone())
    }

    /// `R(x) + J(y)` when both parts can be evaluated.
    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        Some(self.r.value(x)? + self.j.value(y)?)
    }

    /// `||A x + B y - b||`.
    pub fn primal_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.a.apply(x) + self.b_map.apply(y) - &self.offset).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    Standard,
    Relaxed,
    Symmetric,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Variant::Standard),
            "relaxed" => Ok(Variant::Relaxed),
            "symmetric" => Ok(Variant::Symmetric),
            other => Err(format!("unknown variant '{other}' (standard|relaxed|symmetric)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Relaxed => "relaxed",
            Variant::Symmetric => "symmetric",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub phi: f64,
    pub variant: Variant,
    /// Stop once `||v_k|| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            phi: 1.0,
            variant: Variant::Standard,
            tol: 1e-10,
            max_iter: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SplitError::BadGamma(self.gamma));
        }
        if self.variant == Variant::Relaxed && !(self.phi > 0.0 && self.phi < 2.0) {
            return Err(SplitError::BadRelaxation(self.phi));
        }
        Ok(())
    }

    pub fn z_update(&self) -> ZUpdate {
        match self.variant {
            Variant::Standard => ZUpdate::Standard,
            Variant::Relaxed => ZUpdate::Relaxed(self.phi),
            Variant::Symmetric => ZUpdate::Symmetric,
        }
    }
}

/// Which rule produces the new `z` from `(x, y, psi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZUpdate {
    Standard,
    Relaxed(f64),
    Symmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub psi: DVector<f64>,
    pub z: DVector<f64>,
    /// The point the next step starts from; equals `z` unless an accelerator moved it.
    pub z_bar: DVector<f64>,
    /// `z_k - z_{k-1}`.
    pub v: DVector<f64>,
    pub k: usize,
    /// `||v_1||`, the scale used by the divergence detector and safeguards.
    pub first_diff_norm: Option<f64>,
}

impl IterateState {
    pub fn initial(problem: &SplitProblem) -> Self {
        let (n, m, p) = problem.dims();
        Self::with_z0(n, m, DVector::zeros(p))
    }

    pub fn with_z0(n: usize, m: usize, z0: DVector<f64>) -> Self {
        let p = z0.len();
        Self {
            x: DVector::zeros(n),
            y: DVector::zeros(m),
            psi: DVector::zeros(p),
            z_bar: z0.clone(),
            z: z0,
            v: DVector::zeros(p),
            k: 0,
            first_diff_norm: None,
        }
    }
}

/// One step of the selected scheme. `inner` only matters for iterative x-subproblems.
pub fn step(
    problem: &SplitProblem,
    state: &IterateState,
    gamma: f64,
    update: ZUpdate,
    inner: Option<&InnerSolver>,
) -> Result<IterateState, SplitError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SplitError::BadGamma(gamma));
    }
    if let ZUpdate::Relaxed(phi) = update {
        if !(phi > 0.0 && phi < 2.0) {
            return Err(SplitError::BadRelaxation(phi));
        }
    }
    let b = &problem.offset;
    let z_bar = &state.z_bar;

    let w_y = b - z_bar / gamma;
    let y = problem.j.evaluate(&w_y, gamma)?;
    let by_minus_b = problem.b_map.apply(&y) - b;
    let psi = z_bar + &by_minus_b * gamma;

    let w_x = (z_bar - &psi * 2.0) / gamma;
    let x = problem.r.solve(&w_x, gamma, &state.x, inner)?;
    let ax = problem.a.apply(&x);

    let z = match update {
        ZUpdate::Standard => &psi + &ax * gamma,
        ZUpdate::Relaxed(phi) => &psi + (&ax * phi - &by_minus_b * (1.0 - phi)) * gamma,
        ZUpdate::Symmetric => &psi + (&ax * 2.0 + &by_minus_b) * gamma,
    };
    let v = &z - &state.z;
    let k = state.k + 1;
    let first_diff_norm = state.first_diff_norm.or_else(|| {
        let n = v.norm();
        (n > 0.0).then_some(n)
    });
    Ok(IterateState {
        x,
        y,
        psi,
        z_bar: z.clone(),
        z,
        v,
        k,
        first_diff_norm,
    })
}

pub fn admm_step(problem: &SplitProblem, state: &IterateState, gamma: f64) -> Result<IterateState, SplitError> {
    step(problem, state, gamma, ZUpdate::Standard, None)
}

pub fn relaxed_step(
    problem: &SplitProblem,
    state: &IterateState,
    gamma: f64,
    phi: f64,
) -> Result<IterateState, SplitError> {
    step(problem, state, gamma, ZUpdate::Relaxed(phi), None)
}

/// Symmetric (Peaceman–Rachford) step; reports divergence once `||v_k||`
/// exceeds [`DIVERGENCE_FACTOR`] times the first difference.
pub fn symmetric_step(
    problem: &SplitProblem,
    state: &IterateState,
    gamma: f64,
) -> Result<IterateState, SplitError> {
    let next = step(problem, state, gamma, ZUpdate::Symmetric, None)?;
    check_divergence(&next)?;
    Ok(next)
}

pub(crate) fn check_divergence(state: &IterateState) -> Result<(), SplitError> {
    let norm = state.v.norm();
    match state.first_diff_norm {
        Some(first) if norm > DIVERGENCE_FACTOR * first || !norm.is_finite() => {
            Err(SplitError::Divergence { k: state.k, norm })
        }
        _ if !norm.is_finite() => Err(SplitError::Divergence { k: state.k, norm }),
        _ => Ok(()),
    }
}

/// `z_k + a (z_k - z_{k-1}) + b (z_{k-1} - z_{k-2})`; the last term is skipped
/// when `z_{k-2}` or `b` is absent.
pub fn inertial_predict(
    z: &DVector<f64>,
    z_prev: &DVector<f64>,
    z_prev2: Option<&DVector<f64>>,
    a: f64,
    b: Option<f64>,
) -> DVector<f64> {
    let mut out = z + (z - z_prev) * a;
    if let (Some(zz), Some(b)) = (z_prev2, b) {
        out += (z_prev - zz) * b;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DualScheme {
    /// Relaxed Douglas–Rachford; `phi = 1` is plain Douglas–Rachford.
    DouglasRachford { phi: f64 },
    PeacemanRachford,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualStep {
    pub u: DVector<f64>,
    pub z_next: DVector<f64>,
    pub psi: DVector<f64>,
}

/// `(I + gamma d(f* o -M^T))^{-1}(w)`, through the block's primal oracle:
/// with `x = argmin f(x) + gamma/2 ||M x + w/gamma||^2`, the resolvent is `w + gamma M x`.
fn dual_resolvent_x(problem: &SplitProblem, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, SplitError> {
    let warm = DVector::zeros(problem.a.cols());
    let x = problem.r.solve(&(-w / gamma), gamma, &warm, None)?;
    Ok(w + problem.a.apply(&x) * gamma)
}

fn dual_resolvent_y(problem: &SplitProblem, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, SplitError> {
    let y = problem.j.evaluate(&(-w / gamma), gamma)?;
    Ok(w + problem.b_map.apply(&y) * gamma)
}

/// One Douglas–Rachford (or Peaceman–Rachford) step on the dual problem,
/// taken from the fixed-point variable `z`.
pub fn dr_dual_step(
    problem: &SplitProblem,
    z: &DVector<f64>,
    gamma: f64,
    scheme: DualScheme,
) -> Result<DualStep, SplitError> {
    let psi = dual_resolvent_y(problem, &(z - &problem.offset * gamma), gamma)?;
    let u = dual_resolvent_x(problem, &(&psi * 2.0 - z), gamma)?;
    let z_next = match scheme {
        DualScheme::DouglasRachford { phi } => {
            if !(phi > 0.0 && phi < 2.0) {
                return Err(SplitError::BadRelaxation(phi));
            }
            z + (&u - &psi) * phi
        }
        DualScheme::PeacemanRachford => z + (&u - &psi) * 2.0,
    };
    Ok(DualStep { u, z_next, psi })
}

/// `||z - F(z)||` for the standard scheme: zero exactly at fixed points.
pub fn fixed_point_residual(problem: &SplitProblem, z: &DVector<f64>, gamma: f64) -> Result<f64, SplitError> {
    let step = dr_dual_step(problem, z, gamma, DualScheme::DouglasRachford { phi: 1.0 })?;
    Ok((step.z_next - z).norm())
}
