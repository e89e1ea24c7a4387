//! Solver drivers: plain, inertial and extrapolated runs of the ADMM family,
//! with optional inexact x-subproblems.
//!
//! Every `q_bar = q + i` iterations the last `q + 1` differences are fitted,
//! and when the companion matrix is a contraction the next step starts from
//!
//! ```text
//! z_bar = z_k + a_k (E(z_k, ...) - z_k)
//! ```
//!
//! where `E` is the finite- or infinite-depth extrapolation and `a_k` the
//! safeguard coefficient.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::extrapolate::{
    extrapolate_finite, extrapolate_infinite, fit_coefficients, DiffWindow, NEAR_SINGULAR,
};
use crate::linear::LinearMap;
use crate::prox::{ProxError, ProxOracle};
use crate::spectra::trajectory_angle;
use crate::splitting::{
    check_divergence, inertial_predict, step, IterateState, IterativeSubproblem, SolverConfig,
    SplitError, SplitProblem, Variant, ZUpdate,
};
use crate::trace::{IterRecord, TraceSink};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<ProxError> for RunError {
    fn from(e: ProxError) -> Self {
        RunError::Split(SplitError::Subproblem(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarmStart {
    /// Start from the previous outer iterate's `x`.
    Previous,
    Zero,
}

/// Budget for an inner iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolver {
    pub max_inner_steps: usize,
    /// Early exit once an inner step moves less than `tol * (1 + ||x||)`; `0` runs every step.
    pub tol: f64,
    pub warm_start: WarmStart,
}

impl InnerSolver {
    /// Exactly `steps` inner iterations, warm-started.
    pub fn fixed(steps: usize) -> Self {
        Self {
            max_inner_steps: steps,
            tol: 0.0,
            warm_start: WarmStart::Previous,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_inner_steps == 0 {
            return Err(RunError::Config("max_inner_steps must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(RunError::Config(format!("inner tol {} must be non-negative", self.tol)));
        }
        Ok(())
    }
}

/// Extrapolation depth `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    Finite(usize),
    Infinite,
}

impl FromStr for Depth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Depth::Infinite),
            t => match t.parse::<usize>() {
                Ok(0) => Err("depth must be at least 1".into()),
                Ok(n) => Ok(Depth::Finite(n)),
                Err(_) => Err(format!("expected a positive integer or 'inf', got '{t}'")),
            },
        }
    }
}

impl std::fmt::Display for Depth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Depth::Finite(n) => write!(f, "{n}"),
            Depth::Infinite => f.write_str("inf"),
        }
    }
}

/// The constant `b` of the safeguard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SafeguardScale {
    Absolute(f64),
    /// Multiple of `||v_1||`, the first nonzero difference of the run.
    RelativeToFirstDiff(f64),
}

/// Which norm the safeguard divides by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SafeguardRule {
    /// `||E||`, so that `||a_k E|| <= b / k^(1 + delta)`.
    IncrementNorm,
    /// `||z_k - z_{k-1}||`, the rule as usually stated.
    DifferenceNorm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Safeguard {
    pub a: f64,
    pub b: SafeguardScale,
    pub delta: f64,
    pub rule: SafeguardRule,
}

impl Default for Safeguard {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: SafeguardScale::RelativeToFirstDiff(1e6),
            delta: 3.0,
            rule: SafeguardRule::IncrementNorm,
        }
    }
}

/// `min(a, b / (k^(1 + delta) * norm))`; a zero norm gives `a`.
pub fn safeguard_coefficient(k: usize, a: f64, b: f64, delta: f64, norm: f64) -> f64 {
    if norm <= 0.0 {
        return a;
    }
    let cap = b / ((k as f64).powf(1.0 + delta) * norm);
    a.min(cap).max(0.0)
}

/// Which differences feed the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WindowSource {
    /// `z_k - z_{k-1}` from the unextrapolated sequence.
    #[default]
    Raw,
    /// `z_k - z_bar_{k-1}`, the actual step taken, so that the window after an
    /// extrapolation only holds plain iterations.
    Anchored,
}

impl FromStr for WindowSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "raw" => Ok(WindowSource::Raw),
            "anchored" => Ok(WindowSource::Anchored),
            t => Err(format!("expected 'raw' or 'anchored', got '{t}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrapConfig {
    pub q: usize,
    pub s: Depth,
    /// `i` in `q_bar = q + i`.
    pub cadence_offset: usize,
    pub safeguard: Option<Safeguard>,
    pub window: WindowSource,
    pub enabled: bool,
}

impl ExtrapConfig {
    pub fn new(q: usize, s: Depth) -> Self {
        Self {
            q,
            s,
            cadence_offset: 1,
            safeguard: Some(Safeguard::default()),
            window: WindowSource::Raw,
            enabled: true,
        }
    }

    pub fn cadence(&self) -> usize {
        self.q + self.cadence_offset
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.q == 0 {
            return Err(RunError::Config("q must be at least 1".into()));
        }
        if self.cadence_offset == 0 {
            return Err(RunError::Config("cadence offset i must be at least 1".into()));
        }
        if self.s == Depth::Finite(0) {
            return Err(RunError::Config("depth s must be at least 1".into()));
        }
        if let Some(g) = &self.safeguard {
            let b = match g.b {
                SafeguardScale::Absolute(b) | SafeguardScale::RelativeToFirstDiff(b) => b,
            };
            if !(0.0..=1.0).contains(&g.a) || !(b > 0.0) || !(g.delta > 0.0) {
                return Err(RunError::Config(format!(
                    "safeguard needs a in [0, 1], b > 0, delta > 0 (got a = {}, b = {b}, delta = {})",
                    g.a, g.delta
                )));
            }
        }
        Ok(())
    }
}

impl Default for ExtrapConfig {
    fn default() -> Self {
        Self::new(6, Depth::Infinite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Acceleration {
    None,
    /// `z_bar = z_k + a (z_k - z_{k-1}) + b (z_{k-1} - z_{k-2})` every iteration.
    Inertial { a: f64, b: Option<f64> },
    Extrapolation(ExtrapConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub state: IterateState,
    /// `||v_k|| <= tol` was reached before `max_iter`.
    pub converged: bool,
    pub iterations: usize,
    /// `sum_k ||a_k E_k||` over the applied extrapolations.
    pub perturbation_total: f64,
    pub extrapolations: usize,
}

/// Everything a run needs besides the problem and the sink.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub config: SolverConfig,
    pub accel: Acceleration,
    pub inner: Option<InnerSolver>,
    pub z0: Option<DVector<f64>>,
}

impl RunSpec {
    pub fn new(config: SolverConfig, accel: Acceleration) -> Self {
        Self {
            config,
            accel,
            inner: None,
            z0: None,
        }
    }
}

pub fn run(problem: &SplitProblem, spec: &RunSpec, sink: &mut dyn TraceSink) -> Result<RunOutcome, RunError> {
    let config = &spec.config;
    config.validate()?;
    if !(config.tol > 0.0) {
        return Err(RunError::Config(format!("tol {} must be positive", config.tol)));
    }
    if let Some(inner) = &spec.inner {
        inner.validate()?;
    }
    let (n, m, p) = problem.dims();
    let mut state = match &spec.z0 {
        Some(z0) if z0.len() != p => {
            return Err(RunError::Config(format!("z0 has length {}, expected {p}", z0.len())))
        }
        Some(z0) => IterateState::with_z0(n, m, z0.clone()),
        None => IterateState::initial(problem),
    };
    let mut window = match &spec.accel {
        Acceleration::Extrapolation(cfg) => {
            cfg.validate()?;
            cfg.enabled.then(|| DiffWindow::for_order(p, cfg.q))
        }
        _ => None,
    };
    let update = config.z_update();
    let started = Instant::now();
    let mut z_prev2: Option<DVector<f64>> = None;
    let mut outcome = RunOutcome {
        state: state.clone(),
        converged: false,
        iterations: 0,
        perturbation_total: 0.0,
        extrapolations: 0,
    };

    for _ in 0..config.max_iter {
        let mut next = step(problem, &state, config.gamma, update, spec.inner.as_ref())?;
        if update == ZUpdate::Symmetric || !next.v.norm().is_finite() {
            check_divergence(&next)?;
        }
        let k = next.k;
        let norm_v = next.v.norm();
        let cos_theta = if state.k >= 1 {
            trajectory_angle(&next.v, &state.v)
        } else {
            None
        };

        let mut extrapolated = false;
        match (&spec.accel, window.as_mut()) {
            (Acceleration::Inertial { a, b }, _) => {
                next.z_bar = inertial_predict(&next.z, &state.z, z_prev2.as_ref(), *a, *b);
            }
            (Acceleration::Extrapolation(cfg), Some(window)) => {
                let diff = match cfg.window {
                    WindowSource::Raw => next.v.clone(),
                    WindowSource::Anchored => &next.z - &state.z_bar,
                };
                window
                    .push_difference(diff)
                    .expect("window dimension matches the constraint space");
                if k % cfg.cadence() == 0 && window.is_full() {
                    if let Some(increment) = extrapolation_increment(&next.z, window, cfg) {
                        let coeff = match &cfg.safeguard {
                            None => 1.0,
                            Some(g) => {
                                let b = match g.b {
                                    SafeguardScale::Absolute(b) => b,
                                    SafeguardScale::RelativeToFirstDiff(f) => f * next.first_diff_norm.unwrap_or(0.0),
                                };
                                let norm = match g.rule {
                                    SafeguardRule::IncrementNorm => increment.norm(),
                                    SafeguardRule::DifferenceNorm => norm_v,
                                };
                                safeguard_coefficient(k, g.a, b, g.delta, norm)
                            }
                        };
                        let applied = increment * coeff;
                        outcome.perturbation_total += applied.norm();
                        next.z_bar = &next.z + applied;
                        outcome.extrapolations += 1;
                        extrapolated = true;
                    }
                }
            }
            _ => {}
        }

        let reference = sink.reference();
        let record = IterRecord {
            k,
            norm_v,
            cos_theta,
            dist_z: reference.map(|r| (&next.z - &r.z).norm()),
            dist_x: reference.map(|r| (&next.x - &r.x).norm()),
            objective: problem.objective(&next.x, &next.y).filter(|v| v.is_finite()),
            extrapolated,
            ms: started.elapsed().as_secs_f64() * 1e3,
        };
        sink.record(record);

        z_prev2 = Some(std::mem::replace(&mut state, next).z);
        outcome.iterations = k;
        if norm_v <= config.tol {
            outcome.converged = true;
            break;
        }
    }
    outcome.state = state;
    Ok(outcome)
}

/// `E(z_k, ...) - z_k`, or `None` when a guard declines.
fn extrapolation_increment(z: &DVector<f64>, window: &DiffWindow, cfg: &ExtrapConfig) -> Option<DVector<f64>> {
    let fit = fit_coefficients(window).ok()?;
    if !(fit.spectral_radius < 1.0) || (1.0 - fit.coeff_sum).abs() <= NEAR_SINGULAR {
        return None;
    }
    let target = match cfg.s {
        Depth::Finite(s) => extrapolate_finite(z, window, &fit, s),
        Depth::Infinite => {
            assert!(fit.spectral_radius < 1.0, "infinite extrapolation past the guard");
            extrapolate_infinite(z, window, &fit)
        }
    }
    .ok()?;
    let increment = target - z;
    increment.iter().all(|x| x.is_finite()).then_some(increment)
}

/// Standard ADMM with trajectory-following extrapolation.
pub fn run_a3dmm(
    problem: &SplitProblem,
    config: &SolverConfig,
    extrap: &ExtrapConfig,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome, RunError> {
    let config = SolverConfig {
        variant: Variant::Standard,
        ..config.clone()
    };
    run(problem, &RunSpec::new(config, Acceleration::Extrapolation(*extrap)), sink)
}

/// Extrapolation on top of the variant selected in `config`.
pub fn run_variant(
    problem: &SplitProblem,
    config: &SolverConfig,
    extrap: &ExtrapConfig,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome, RunError> {
    run(problem, &RunSpec::new(config.clone(), Acceleration::Extrapolation(*extrap)), sink)
}

/// Any acceleration with an iterative x-subproblem run under `inner`.
pub fn run_inexact(
    problem: &SplitProblem,
    inner: &InnerSolver,
    config: &SolverConfig,
    accel: &Acceleration,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome, RunError> {
    let spec = RunSpec {
        inner: Some(*inner),
        ..RunSpec::new(config.clone(), *accel)
    };
    run(problem, &spec, sink)
}

/// Accelerated proximal gradient (FISTA) for
///
/// ```text
/// argmin_x g(x) + 1/2 ||K x - f||^2 + gamma/2 ||M x - w||^2
/// ```
///
/// with `g` given by an identity-map prox oracle and the data term optional.
#[derive(Debug)]
pub struct AcceleratedSubproblem {
    name: String,
    prox: Arc<dyn ProxOracle>,
    map: LinearMap,
    data: Option<(LinearMap, DVector<f64>)>,
    map_norm_sq: f64,
    data_norm_sq: f64,
    default_inner: InnerSolver,
}

impl AcceleratedSubproblem {
    pub fn new(
        name: impl Into<String>,
        prox: Arc<dyn ProxOracle>,
        map: LinearMap,
        data: Option<(LinearMap, DVector<f64>)>,
        default_inner: InnerSolver,
    ) -> Result<Self, ProxError> {
        let n = prox.dim();
        if map.cols() != n {
            return Err(ProxError::DimensionMismatch {
                expected: n,
                got: map.cols(),
            });
        }
        if let Some((k, f)) = &data {
            if k.cols() != n || k.rows() != f.len() {
                return Err(ProxError::DimensionMismatch {
                    expected: n,
                    got: k.cols(),
                });
            }
        }
        // power iteration approaches the norm from below; pad the Lipschitz constant
        let pad = 1.01;
        let map_norm_sq = pad * map.operator_norm(1e-10, 5000).powi(2);
        let data_norm_sq = data
            .as_ref()
            .map_or(0.0, |(k, _)| pad * k.operator_norm(1e-10, 5000).powi(2));
        Ok(Self {
            name: name.into(),
            prox,
            map,
            data,
            map_norm_sq,
            data_norm_sq,
            default_inner,
        })
    }

    fn smooth_value(&self, x: &DVector<f64>, w: &DVector<f64>, gamma: f64) -> f64 {
        let fit = self
            .data
            .as_ref()
            .map_or(0.0, |(k, f)| 0.5 * (k.apply(x) - f).norm_squared());
        fit + 0.5 * gamma * (self.map.apply(x) - w).norm_squared()
    }

    fn smooth_gradient(&self, x: &DVector<f64>, w: &DVector<f64>, gamma: f64) -> DVector<f64> {
        let mut g = self.map.apply_adjoint(&(self.map.apply(x) - w)) * gamma;
        if let Some((k, f)) = &self.data {
            g += k.apply_adjoint(&(k.apply(x) - f));
        }
        g
    }

    fn objective(&self, x: &DVector<f64>, w: &DVector<f64>, gamma: f64) -> f64 {
        self.smooth_value(x, w, gamma) + self.prox.value(x).unwrap_or(0.0)
    }
}

impl IterativeSubproblem for AcceleratedSubproblem {
    fn dim(&self) -> usize {
        self.prox.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn solve(
        &self,
        w: &DVector<f64>,
        gamma: f64,
        warm: &DVector<f64>,
        inner: &InnerSolver,
    ) -> Result<DVector<f64>, ProxError> {
        let lipschitz = self.data_norm_sq + gamma * self.map_norm_sq;
        if !(lipschitz > 0.0) {
            return Err(ProxError::InvalidParameter("zero Lipschitz constant".into()));
        }
        let start = match inner.warm_start {
            WarmStart::Previous => warm.clone(),
            WarmStart::Zero => DVector::zeros(self.dim()),
        };
        let initial = self.objective(&start, w, gamma);
        let mut x = start.clone();
        let mut y = start;
        let mut t = 1.0_f64;
        for _ in 0..inner.max_inner_steps {
            let grad = self.smooth_gradient(&y, w, gamma);
            let x_next = self.prox.evaluate(&(&y - grad / lipschitz), lipschitz)?;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            let moved = (&x_next - &x).norm();
            x = x_next;
            t = t_next;
            if inner.tol > 0.0 && moved <= inner.tol * (1.0 + x.norm()) {
                break;
            }
        }
        let last = self.objective(&x, w, gamma);
        if initial.is_finite() && last > initial + 1e6 * (1.0 + initial.abs()) || last.is_nan() {
            return Err(ProxError::Subproblem(format!(
                "inner objective grew from {initial:e} to {last:e}"
            )));
        }
        Ok(x)
    }

    fn default_inner(&self) -> InnerSolver {
        self.default_inner
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let fit = self
            .data
            .as_ref()
            .map_or(Some(0.0), |(k, f)| Some(0.5 * (k.apply(x) - f).norm_squared()))?;
        Some(fit + self.prox.value(x)?)
    }
}
