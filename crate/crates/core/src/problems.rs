//! Problem gallery, data generation and ingestion.
//!
//! Every generator is a pure function of its parameters and seed. Instances
//! hold their raw data; [`ProblemInstance::split`] wires it into a
//! [`SplitProblem`] for a given penalty `gamma`, building the per-`gamma`
//! factorizations there.

use std::io::BufRead;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::a3dmm::{run, AcceleratedSubproblem, Acceleration, InnerSolver, RunError, RunSpec, WarmStart};
use crate::linear::{GridShape, LinearMap};
use crate::prox::{
    AffineIndicator, AffineProjector, BoxIndicator, CoordinateIndicator, GroupL12, Groups, L1Norm, Negated,
    NuclearNorm, ProxError, ProxOracle, QuadraticCache, QuadraticProx, SubspaceIndicator, ZeroFunction,
};
use crate::sparse::{SparseError, SparseMatrix};
use crate::splitting::{fixed_point_residual, IterateState, SolverConfig, SplitError, SplitProblem, Subproblem};
use crate::trace::{NullSink, Reference};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("bad image: {0}")]
    BadImage(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Run(#[from] RunError),
}

impl From<SparseError> for ProblemError {
    fn from(e: SparseError) -> Self {
        ProblemError::BadShape(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularizer {
    L1,
    /// Group norm over consecutive blocks of `block` entries.
    L12 { block: usize },
    /// Nuclear norm of a `rows x cols` matrix variable.
    Nuclear { rows: usize, cols: usize },
}

/// Raw data of a gallery problem.
#[derive(Clone, Debug)]
pub enum ProblemData {
    /// `min mu ||x||_1 + 1/2 ||K y - f||^2  s.t.  x - y = 0`.
    Lasso { k: DMatrix<f64>, f: DVector<f64>, mu: f64 },
    /// `min R(x)  s.t.  K x = f`, split as `R(x) + i_{K y = f}(y)`, `x - y = 0`.
    Affine {
        regularizer: Regularizer,
        projector: AffineProjector,
    },
    /// `min 1/2 x^T Q x + <q, x>  s.t.  lo <= x <= hi`.
    QpBox {
        q_mat: DMatrix<f64>,
        q_lin: DVector<f64>,
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    /// Find a point of `span(t1) ∩ span(t2)`.
    Feasibility { t1: DMatrix<f64>, t2: DMatrix<f64> },
    /// `min ||grad x||_1  s.t.  x_i = f_i on observed pixels`.
    TvInpainting {
        shape: GridShape,
        observed: Vec<usize>,
        /// Full-size image with unobserved pixels zeroed.
        values: DVector<f64>,
        inner: InnerSolver,
    },
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub data: ProblemData,
    /// Ground truth for synthetic data: the planted signal or clean image.
    pub truth: Option<DVector<f64>>,
    pub reference: Option<Arc<Reference>>,
    pub seed: u64,
    pub descriptor: String,
}

impl ProblemInstance {
    pub fn split(&self, gamma: f64) -> Result<SplitProblem, ProblemError> {
        let problem = match &self.data {
            ProblemData::Lasso { k, f, mu } => {
                let n = k.ncols();
                let cache = QuadraticCache::new(k.tr_mul(k), gamma)?;
                let data_fit = QuadraticProx::new(cache, -k.tr_mul(f))?;
                identity_split(
                    Subproblem::Exact(Arc::new(L1Norm { weight: *mu, dim: n })),
                    Arc::new(data_fit),
                    n,
                )?
            }
            ProblemData::Affine { regularizer, projector } => {
                let n = projector.matrix().ncols();
                let r: Arc<dyn ProxOracle> = match *regularizer {
                    Regularizer::L1 => Arc::new(L1Norm { weight: 1.0, dim: n }),
                    Regularizer::L12 { block } => Arc::new(GroupL12 {
                        weight: 1.0,
                        groups: Groups::contiguous(n, block)?,
                    }),
                    Regularizer::Nuclear { rows, cols } => Arc::new(NuclearNorm { weight: 1.0, rows, cols }),
                };
                identity_split(
                    Subproblem::Exact(r),
                    Arc::new(AffineIndicator {
                        projector: projector.clone(),
                    }),
                    n,
                )?
            }
            ProblemData::QpBox { q_mat, q_lin, lo, hi } => {
                let cache = QuadraticCache::new(q_mat.clone(), gamma)?;
                identity_split(
                    Subproblem::Exact(Arc::new(QuadraticProx::new(cache, q_lin.clone())?)),
                    Arc::new(BoxIndicator::new(lo.clone(), hi.clone())?),
                    q_lin.len(),
                )?
            }
            ProblemData::Feasibility { t1, t2 } => identity_split(
                Subproblem::Exact(Arc::new(SubspaceIndicator::new(t1.clone())?)),
                Arc::new(SubspaceIndicator::new(t2.clone())?),
                t1.nrows(),
            )?,
            ProblemData::TvInpainting {
                shape,
                observed,
                values,
                inner,
            } => {
                let grad = LinearMap::Gradient(*shape);
                let mask = CoordinateIndicator::new(observed.clone(), values.clone())?;
                let x_solver = AcceleratedSubproblem::new("tv-x", Arc::new(mask), grad.clone(), None, *inner)?;
                let p = grad.rows();
                SplitProblem::new(
                    Subproblem::Iterative(Arc::new(x_solver)),
                    Arc::new(Negated(Arc::new(L1Norm { weight: 1.0, dim: p }))),
                    grad,
                    LinearMap::neg_identity(p),
                    DVector::zeros(p),
                )?
            }
        };
        Ok(problem)
    }

    /// The LASSO with the roles swapped: the data term sits on the x side,
    /// where it is solved either exactly or by `inner` accelerated gradient steps.
    pub fn lasso_swapped(&self, gamma: f64, inner: Option<InnerSolver>) -> Result<SplitProblem, ProblemError> {
        let ProblemData::Lasso { k, f, mu } = &self.data else {
            return Err(ProblemError::BadShape("not a LASSO instance".into()));
        };
        let n = k.ncols();
        let x_side = match inner {
            None => {
                let cache = QuadraticCache::new(k.tr_mul(k), gamma)?;
                Subproblem::Exact(Arc::new(QuadraticProx::new(cache, -k.tr_mul(f))?))
            }
            Some(inner) => Subproblem::Iterative(Arc::new(AcceleratedSubproblem::new(
                "lasso-data-fista",
                Arc::new(ZeroFunction { dim: n }),
                LinearMap::identity(n),
                Some((LinearMap::Dense(k.clone()), f.clone())),
                inner,
            )?)),
        };
        identity_split(x_side, Arc::new(L1Norm { weight: *mu, dim: n }), n)
    }

    /// Penalty used when none is configured.
    pub fn default_gamma(&self) -> f64 {
        match &self.data {
            ProblemData::Lasso { k, .. } => k.singular_values().max().powi(2) / 10.0,
            _ => 1.0,
        }
    }

    /// Starting point when `z_0 = 0` is not informative: the feasibility
    /// problem has its solution at the origin, so it starts at a unit vector
    /// off both lines.
    pub fn initial_point(&self) -> Option<DVector<f64>> {
        match &self.data {
            ProblemData::Feasibility { t1, t2 } => {
                let a1 = t1[(1, 0)].atan2(t1[(0, 0)]);
                let a2 = t2[(1, 0)].atan2(t2[(0, 0)]);
                let t = 0.5 * (a1 + a2) + 1.0;
                Some(DVector::from_column_slice(&[t.cos(), t.sin()]))
            }
            _ => None,
        }
    }

    /// `||K||^2` for problems with a data matrix.
    pub fn k_norm_sq(&self) -> Option<f64> {
        match &self.data {
            ProblemData::Lasso { k, .. } => Some(LinearMap::Dense(k.clone()).operator_norm(1e-8, 10_000).powi(2)),
            ProblemData::Affine { projector, .. } => {
                Some(LinearMap::Dense(projector.matrix().clone()).operator_norm(1e-8, 10_000).powi(2))
            }
            _ => None,
        }
    }

    /// Runs standard ADMM with `10 * max_iter` iterations to `tol / 100` and
    /// stores the final `(z, x)` as the reference solution.
    pub fn compute_reference(&mut self, config: &SolverConfig) -> Result<ReferenceRun, ProblemError> {
        let problem = self.split(config.gamma)?;
        let long = SolverConfig {
            max_iter: config.max_iter.saturating_mul(10),
            tol: config.tol / 100.0,
            ..config.clone()
        };
        let spec = RunSpec {
            z0: self.initial_point(),
            ..RunSpec::new(long, Acceleration::None)
        };
        let outcome = run(&problem, &spec, &mut NullSink)?;
        let kkt = kkt_residual(&problem, &outcome.state, config.gamma).ok();
        let reference = Arc::new(Reference {
            z: outcome.state.z.clone(),
            x: outcome.state.x.clone(),
        });
        self.reference = Some(reference.clone());
        Ok(ReferenceRun {
            reference,
            converged: outcome.converged,
            iterations: outcome.iterations,
            kkt,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceRun {
    pub reference: Arc<Reference>,
    pub converged: bool,
    pub iterations: usize,
    /// `None` when the x-subproblem has no exact oracle.
    pub kkt: Option<f64>,
}

/// `A = I`, `B = -I`, `b = 0` with `J` retargeted to `-I`.
fn identity_split(r: Subproblem, j: Arc<dyn ProxOracle>, n: usize) -> Result<SplitProblem, ProblemError> {
    Ok(SplitProblem::new(
        r,
        Arc::new(Negated(j)),
        LinearMap::identity(n),
        LinearMap::neg_identity(n),
        DVector::zeros(n),
    )?)
}

/// `max(||A x + B y - b||, ||z - F(z)||)`: primal feasibility together with
/// the fixed-point residual, which vanishes exactly at dual solutions.
pub fn kkt_residual(problem: &SplitProblem, state: &IterateState, gamma: f64) -> Result<f64, SplitError> {
    if matches!(problem.r(), Subproblem::Iterative(_)) {
        return Err(SplitError::Dimensions("fixed-point residual needs an exact x-subproblem".into()));
    }
    let primal = problem.primal_residual(&state.x, &state.y);
    Ok(primal.max(fixed_point_residual(problem, &state.z, gamma)?))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| { let g: f64 = StandardNormal.sample(&mut *rng); std * g })
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng))
}

fn sparse_signal(rng: &mut ChaCha8Rng, n: usize, support: usize) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for i in rand::seq::index::sample(rng, n, support).into_vec() {
        x[i] = StandardNormal.sample(&mut *rng);
    }
    x
}

/// `m x n` Gaussian measurements with unit-norm columns and a planted
/// `sparsity`-sparse signal.
pub fn make_lasso(m: usize, n: usize, sparsity: usize, mu: f64, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if m == 0 || m >= n {
        return Err(ProblemError::BadShape(format!("need 0 < m < n, got m = {m}, n = {n}")));
    }
    if sparsity >= m {
        return Err(ProblemError::BadShape(format!("sparsity {sparsity} must be below m = {m}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ProblemError::BadShape(format!("mu = {mu} must be finite and positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = gaussian_matrix(&mut rng, m, n, (1.0 / m as f64).sqrt());
    for mut col in k.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let x = sparse_signal(&mut rng, n, sparsity);
    let f = &k * &x;
    Ok(ProblemInstance {
        data: ProblemData::Lasso { k, f, mu },
        truth: Some(x),
        reference: None,
        seed,
        descriptor: format!("lasso m={m} n={n} sparsity={sparsity} mu={mu}"),
    })
}

/// Desk-scale LASSO: 64 x 256 with a 13-sparse signal and `mu = 1`.
pub fn desk_lasso(seed: u64) -> ProblemInstance {
    make_lasso(64, 256, 13, 1.0, seed).expect("desk shape is valid")
}

/// Dimension of the desk-scale box QP.
pub const QP_DESK_N: usize = 64;

/// Shape of an affine-constrained instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffineShape {
    L1 { m: usize, n: usize, sparsity: usize },
    L12 { m: usize, n: usize, blocks: usize, block: usize },
    Nuclear { side: usize, rank: usize, measurements: usize },
}

impl AffineShape {
    pub const L1_DESK: AffineShape = AffineShape::L1 { m: 64, n: 256, sparsity: 12 };
    pub const L12_DESK: AffineShape = AffineShape::L12 {
        m: 64,
        n: 256,
        blocks: 8,
        block: 4,
    };
    pub const NUCLEAR_DESK: AffineShape = AffineShape::Nuclear {
        side: 24,
        rank: 2,
        measurements: 300,
    };
}

pub fn make_affine_constrained(shape: AffineShape, seed: u64) -> Result<ProblemInstance, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, regularizer, x, descriptor) = match shape {
        AffineShape::L1 { m, n, sparsity } => {
            if m == 0 || m >= n || sparsity >= m {
                return Err(ProblemError::BadShape(format!(
                    "l1 needs sparsity < m < n, got ({m}, {n}, {sparsity})"
                )));
            }
            let x = sparse_signal(&mut rng, n, sparsity);
            (m, n, Regularizer::L1, x, format!("affine-l1 m={m} n={n} sparsity={sparsity}"))
        }
        AffineShape::L12 { m, n, blocks, block } => {
            if m == 0 || m >= n || block == 0 || n % block != 0 || blocks * block >= m {
                return Err(ProblemError::BadShape(format!(
                    "l12 needs block | n and blocks * block < m < n, got ({m}, {n}, {blocks}, {block})"
                )));
            }
            let mut x = DVector::zeros(n);
            for g in rand::seq::index::sample(&mut rng, n / block, blocks).into_vec() {
                for i in g * block..(g + 1) * block {
                    x[i] = StandardNormal.sample(&mut rng);
                }
            }
            (
                m,
                n,
                Regularizer::L12 { block },
                x,
                format!("affine-l12 m={m} n={n} blocks={blocks}x{block}"),
            )
        }
        AffineShape::Nuclear {
            side,
            rank,
            measurements,
        } => {
            let n = side * side;
            if rank == 0 || rank >= side || measurements == 0 || measurements >= n {
                return Err(ProblemError::BadShape(format!(
                    "nuclear needs 0 < rank < side and 0 < measurements < side^2, got ({side}, {rank}, {measurements})"
                )));
            }
            let low_rank = gaussian_matrix(&mut rng, side, rank, 1.0) * gaussian_matrix(&mut rng, rank, side, 1.0);
            let x = DVector::from_column_slice(low_rank.as_slice());
            (
                measurements,
                n,
                Regularizer::Nuclear { rows: side, cols: side },
                x,
                format!("affine-nuclear side={side} rank={rank} measurements={measurements}"),
            )
        }
    };
    let k = gaussian_matrix(&mut rng, m, n, (1.0 / m as f64).sqrt());
    let f = &k * &x;
    let projector = AffineProjector::new(k, f)?;
    Ok(ProblemInstance {
        data: ProblemData::Affine { regularizer, projector },
        truth: Some(x),
        reference: None,
        seed,
        descriptor,
    })
}

/// Seeded box-constrained QP with `Q = G^T G + 0.1 I`.
pub fn make_qp_box(n: usize, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if n == 0 {
        return Err(ProblemError::BadShape("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, n, (1.0 / n as f64).sqrt());
    let q_mat = g.tr_mul(&g) + DMatrix::identity(n, n) * 0.1;
    let q_lin = gaussian_vector(&mut rng, n);
    let lo = DVector::from_fn(n, |_, _| -rng.random_range(0.1..1.0));
    let hi = DVector::from_fn(n, |i, _| lo[i] + rng.random_range(0.2..1.5));
    let mut instance = qp_box_from(q_mat, q_lin, lo, hi)?;
    instance.seed = seed;
    instance.descriptor = format!("qp-box n={n}");
    Ok(instance)
}

pub fn qp_box_from(
    q_mat: DMatrix<f64>,
    q_lin: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
) -> Result<ProblemInstance, ProblemError> {
    let n = q_lin.len();
    if q_mat.shape() != (n, n) || lo.len() != n || hi.len() != n {
        return Err(ProblemError::BadShape(format!("inconsistent QP sizes for n = {n}")));
    }
    // validates the box and the symmetry of Q up front
    BoxIndicator::new(lo.clone(), hi.clone())?;
    QuadraticCache::new(q_mat.clone(), 1.0)?;
    Ok(ProblemInstance {
        data: ProblemData::QpBox { q_mat, q_lin, lo, hi },
        truth: None,
        reference: None,
        seed: 0,
        descriptor: format!("qp-box n={n}"),
    })
}

fn line_basis(angle: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()])
}

/// Two lines through the origin of the plane meeting at `alpha`, rotated by a seeded angle.
pub fn make_feasibility(alpha: f64, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if !(alpha > 0.0 && alpha <= std::f64::consts::FRAC_PI_2) {
        return Err(ProblemError::BadShape(format!("alpha = {alpha} outside ]0, pi/2]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(0.0..std::f64::consts::TAU);
    Ok(ProblemInstance {
        data: ProblemData::Feasibility {
            t1: line_basis(base),
            t2: line_basis(base + alpha),
        },
        truth: Some(DVector::zeros(2)),
        reference: Some(Arc::new(Reference {
            z: DVector::zeros(2),
            x: DVector::zeros(2),
        })),
        seed,
        descriptor: format!("feasibility alpha={alpha}"),
    })
}

/// Inner budget used by the inpainting x-subproblem unless overridden.
pub const TV_INNER: InnerSolver = InnerSolver {
    max_inner_steps: 20,
    tol: 0.0,
    warm_start: WarmStart::Previous,
};

/// Keeps each pixel with probability `density`.
pub fn make_tv_inpainting(image: &DMatrix<f64>, density: f64, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if let Some(bad) = image.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ProblemError::BadImage(format!("pixel value {bad} outside [0, 1]")));
    }
    if image.is_empty() {
        return Err(ProblemError::BadImage("empty image".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(ProblemError::BadShape(format!("mask density {density} outside ]0, 1]")));
    }
    let shape = GridShape::new(image.nrows(), image.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = DVector::from_column_slice(image.as_slice());
    let observed: Vec<usize> = (0..shape.len()).filter(|_| rng.random::<f64>() < density).collect();
    let mut values = DVector::zeros(shape.len());
    for &i in &observed {
        values[i] = truth[i];
    }
    Ok(ProblemInstance {
        data: ProblemData::TvInpainting {
            shape,
            observed,
            values,
            inner: TV_INNER,
        },
        truth: Some(truth),
        reference: None,
        seed,
        descriptor: format!("tv-inpainting {}x{} density={density}", shape.rows, shape.cols),
    })
}

/// Axis-aligned rectangles of random constant intensity on a random background.
pub fn piecewise_constant_image(rows: usize, cols: usize, pieces: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = DMatrix::from_element(rows, cols, rng.random_range(0.1..0.9));
    for _ in 0..pieces {
        let (r0, c0) = (rng.random_range(0..rows), rng.random_range(0..cols));
        let (h, w) = (rng.random_range(1..=rows / 2 + 1), rng.random_range(1..=cols / 2 + 1));
        let level = rng.random_range(0.0..1.0);
        for j in c0..(c0 + w).min(cols) {
            for i in r0..(r0 + h).min(rows) {
                img[(i, j)] = level;
            }
        }
    }
    img
}

/// `10 log10(1 / MSE)` for images in `[0, 1]`.
pub fn psnr(x: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let mse = (x - truth).norm_squared() / truth.len() as f64;
    10.0 * (1.0 / mse).log10()
}

// ---------------------------------------------------------------------------
// LIBSVM

#[derive(Clone, Debug, PartialEq)]
pub struct LibsvmData {
    pub matrix: SparseMatrix,
    pub labels: Vec<f64>,
}

/// One sample per non-blank line: `label idx:val idx:val ...`, indices 1-based and ascending.
pub fn parse_libsvm(reader: impl BufRead) -> Result<LibsvmData, ProblemError> {
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut cols = 0;
    for (number, line) in reader.lines().enumerate() {
        let line_no = number + 1;
        let err = |reason: String| ProblemError::Parse { line: line_no, reason };
        let line = line.map_err(|e| err(e.to_string()))?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label: f64 = label.parse().map_err(|_| err(format!("bad label '{label}'")))?;
        let row = labels.len();
        labels.push(label);
        let mut last = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got '{token}'")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index '{idx}'")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("bad value '{val}'")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not follow {last}")));
            }
            last = idx;
            cols = cols.max(idx);
            entries.push((row, idx - 1, val));
        }
    }
    Ok(LibsvmData {
        matrix: SparseMatrix::from_triplets(labels.len(), cols, entries)?,
        labels,
    })
}

pub fn serialize_libsvm(data: &LibsvmData) -> String {
    let mut out = String::new();
    for (row, label) in data.labels.iter().enumerate() {
        out.push_str(&label.to_string());
        for (col, val) in data.matrix.row_entries(row) {
            out.push_str(&format!(" {}:{}", col + 1, val));
        }
        out.push('\n');
    }
    out
}

/// LASSO on a LIBSVM dataset: columns scaled by their max magnitude, labels as `f`.
pub fn lasso_from_libsvm(data: &LibsvmData, mu: f64, descriptor: &str) -> Result<ProblemInstance, ProblemError> {
    if data.labels.is_empty() || data.matrix.cols() == 0 {
        return Err(ProblemError::BadShape("empty dataset".into()));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ProblemError::BadShape(format!("mu = {mu} must be finite and positive")));
    }
    let k = data.matrix.scale_columns_max_abs().to_dense();
    Ok(ProblemInstance {
        data: ProblemData::Lasso {
            k,
            f: DVector::from_vec(data.labels.clone()),
            mu,
        },
        truth: None,
        reference: None,
        seed: 0,
        descriptor: format!("lasso-libsvm {descriptor} mu={mu}"),
    })
}

// ---------------------------------------------------------------------------
// PGM

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    binary: bool,
    /// Offset of the first byte after the header.
    data_start: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut at: usize) -> usize {
    while at < bytes.len() {
        if bytes[at].is_ascii_whitespace() {
            at += 1;
        } else if bytes[at] == b'#' {
            while at < bytes.len() && bytes[at] != b'\n' {
                at += 1;
            }
        } else {
            break;
        }
    }
    at
}

fn read_number(bytes: &[u8], at: usize, what: &str) -> Result<(usize, usize), ProblemError> {
    let start = skip_space_and_comments(bytes, at);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(ProblemError::Format {
            offset: start,
            reason: format!("expected {what}"),
        });
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text.parse().map_err(|_| ProblemError::Format {
        offset: start,
        reason: format!("{what} '{text}' out of range"),
    })?;
    Ok((value, end))
}

fn read_header(bytes: &[u8]) -> Result<Header, ProblemError> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => {
            return Err(ProblemError::Format {
                offset: 0,
                reason: "expected magic P2 or P5".into(),
            })
        }
    };
    let (width, at) = read_number(bytes, 2, "width")?;
    let (height, at) = read_number(bytes, at, "height")?;
    let (maxval, at) = read_number(bytes, at, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(ProblemError::Format {
            offset: at,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    if width == 0 || height == 0 {
        return Err(ProblemError::Format {
            offset: at,
            reason: "zero image dimension".into(),
        });
    }
    if binary && !bytes.get(at).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(ProblemError::Format {
            offset: at,
            reason: "expected a single whitespace byte before the raster".into(),
        });
    }
    Ok(Header {
        width,
        height,
        maxval,
        binary,
        data_start: at + 1,
    })
}

/// Reads an 8- or 16-bit grayscale PGM (P2 or P5) into `[0, 1]`, rows as image rows.
pub fn load_pgm(bytes: &[u8]) -> Result<DMatrix<f64>, ProblemError> {
    let h = read_header(bytes)?;
    let count = h.width * h.height;
    let scale = h.maxval as f64;
    let mut samples = Vec::with_capacity(count);
    if h.binary {
        let width = if h.maxval < 256 { 1 } else { 2 };
        let need = h.data_start + count * width;
        if bytes.len() < need {
            return Err(ProblemError::Format {
                offset: bytes.len(),
                reason: format!("raster truncated: need {need} bytes, have {}", bytes.len()),
            });
        }
        for i in 0..count {
            let at = h.data_start + i * width;
            let raw = if width == 1 {
                bytes[at] as usize
            } else {
                (bytes[at] as usize) << 8 | bytes[at + 1] as usize
            };
            if raw > h.maxval {
                return Err(ProblemError::Format {
                    offset: at,
                    reason: format!("sample {raw} exceeds maxval {}", h.maxval),
                });
            }
            samples.push(raw as f64 / scale);
        }
    } else {
        let mut at = h.data_start - 1;
        for _ in 0..count {
            let (raw, next) = read_number(bytes, at, "sample")?;
            if raw > h.maxval {
                return Err(ProblemError::Format {
                    offset: at,
                    reason: format!("sample {raw} exceeds maxval {}", h.maxval),
                });
            }
            samples.push(raw as f64 / scale);
            at = next;
        }
    }
    Ok(DMatrix::from_row_slice(h.height, h.width, &samples))
}

/// Binary 8-bit PGM of an image in `[0, 1]`.
pub fn write_pgm(image: &DMatrix<f64>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.ncols(), image.nrows()).into_bytes();
    for i in 0..image.nrows() {
        for j in 0..image.ncols() {
            out.push((image[(i, j)].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}
