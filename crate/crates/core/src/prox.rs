//! Proximal operators, projections and cached regularized solves.
//!
//! Every oracle answers the same question: for a fixed function `f` and a
//! fixed linear map `M`, return
//!
//! ```text
//! argmin_x f(x) + (gamma / 2) * ||M x - w||^2
//! ```
//!
//! Most oracles here use `M = I`. [`Negated`] turns an identity-map oracle into
//! one for `M = -I`, which is how the `B = -I` blocks of the gallery are wired.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("groups do not partition 0..{dim}: index {index} {problem}")]
    OverlappingGroups {
        dim: usize,
        index: usize,
        problem: &'static str,
    },
    #[error("singular value decomposition did not converge")]
    SvdFailure,
    #[error("empty box: lo[{index}] = {lo} > hi[{index}] = {hi}")]
    EmptyBox { index: usize, lo: f64, hi: f64 },
    #[error("K K^T is singular or numerically rank deficient")]
    RankDeficient,
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite after regularization")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("factorization cached for gamma = {cached}, called with gamma = {requested}")]
    GammaMismatch { cached: f64, requested: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("subproblem failure: {0}")]
    Subproblem(String),
}

fn check_dim(expected: usize, got: usize) -> Result<(), ProxError> {
    if expected != got {
        return Err(ProxError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Subproblem oracle for one block of a split problem.
pub trait ProxOracle: Send + Sync + fmt::Debug {
    /// Dimension of the variable the oracle returns.
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// `argmin_x f(x) + gamma/2 ||M x - w||^2` for the oracle's fixed `f` and `M`.
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError>;

    /// `f(x)`, when cheap to evaluate. Indicators return `0` or `+inf`.
    fn value(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }
}

// ---------------------------------------------------------------------------
// Closed-form operators

pub fn soft_threshold_l1(w: &DVector<f64>, tau: f64) -> DVector<f64> {
    w.map(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// A validated partition of `0..dim` into groups.
#[derive(Clone, Debug, PartialEq)]
pub struct Groups {
    dim: usize,
    groups: Vec<Vec<usize>>,
}

impl Groups {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>) -> Result<Self, ProxError> {
        let mut seen = vec![false; dim];
        for &i in groups.iter().flatten() {
            if i >= dim {
                return Err(ProxError::OverlappingGroups {
                    dim,
                    index: i,
                    problem: "is out of range",
                });
            }
            if seen[i] {
                return Err(ProxError::OverlappingGroups {
                    dim,
                    index: i,
                    problem: "appears twice",
                });
            }
            seen[i] = true;
        }
        if let Some(index) = seen.iter().position(|s| !s) {
            return Err(ProxError::OverlappingGroups {
                dim,
                index,
                problem: "is not covered",
            });
        }
        Ok(Self { dim, groups })
    }

    /// Consecutive blocks of `size` entries; `dim` must be a multiple of `size`.
    pub fn contiguous(dim: usize, size: usize) -> Result<Self, ProxError> {
        if size == 0 || !dim.is_multiple_of(size) {
            return Err(ProxError::InvalidParameter(format!(
                "block size {size} does not divide dimension {dim}"
            )));
        }
        Self::new(
            dim,
            (0..dim / size)
                .map(|g| (g * size..(g + 1) * size).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(|g| g.as_slice())
    }
}

pub fn prox_group_l12(w: &DVector<f64>, groups: &Groups, tau: f64) -> Result<DVector<f64>, ProxError> {
    check_dim(groups.dim(), w.len())?;
    let mut out = DVector::zeros(w.len());
    for g in groups.iter() {
        let norm = g.iter().map(|&i| w[i] * w[i]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let scale = (1.0 - tau / norm).max(0.0);
        for &i in g {
            out[i] = scale * w[i];
        }
    }
    Ok(out)
}

/// Singular value soft thresholding.
pub fn prox_nuclear(w: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>, ProxError> {
    let svd = w
        .clone()
        .try_svd(true, true, 1e-15, 10_000)
        .ok_or(ProxError::SvdFailure)?;
    let u = svd.u.as_ref().ok_or(ProxError::SvdFailure)?;
    let v_t = svd.v_t.as_ref().ok_or(ProxError::SvdFailure)?;
    let shrunk = svd.singular_values.map(|s| (s - tau).max(0.0));
    let mut scaled_u = u.clone();
    for (j, s) in shrunk.iter().enumerate() {
        scaled_u.column_mut(j).scale_mut(*s);
    }
    Ok(scaled_u * v_t)
}

pub fn project_box(w: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<DVector<f64>, ProxError> {
    check_dim(w.len(), lo.len())?;
    check_dim(w.len(), hi.len())?;
    check_box(lo, hi)?;
    Ok(DVector::from_fn(w.len(), |i, _| w[i].clamp(lo[i], hi[i])))
}

fn check_box(lo: &DVector<f64>, hi: &DVector<f64>) -> Result<(), ProxError> {
    for i in 0..lo.len() {
        if !(lo[i] <= hi[i]) {
            return Err(ProxError::EmptyBox {
                index: i,
                lo: lo[i],
                hi: hi[i],
            });
        }
    }
    Ok(())
}

fn min_max_diag(l: &DMatrix<f64>) -> (f64, f64) {
    l.diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())))
}

/// Projection onto `{x : K x = f}` with `K K^T` factorized once.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    k: DMatrix<f64>,
    f: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl AffineProjector {
    pub fn new(k: DMatrix<f64>, f: DVector<f64>) -> Result<Self, ProxError> {
        check_dim(k.nrows(), f.len())?;
        let kkt = &k * k.transpose();
        let gram = Cholesky::new(kkt).ok_or(ProxError::RankDeficient)?;
        let (lo, hi) = min_max_diag(gram.l_dirty());
        // pivots of L are square roots of the Schur complements
        if !(lo * lo > 1e-13 * hi * hi) {
            return Err(ProxError::RankDeficient);
        }
        Ok(Self { k, f, gram })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.f
    }

    fn correct(&self, w: &DVector<f64>) -> DVector<f64> {
        let r = &self.k * w - &self.f;
        w - self.k.tr_mul(&self.gram.solve(&r))
    }
}

pub fn project_affine(w: &DVector<f64>, projector: &AffineProjector) -> Result<DVector<f64>, ProxError> {
    check_dim(projector.k.ncols(), w.len())?;
    // one refinement pass absorbs the rounding of the first correction
    let once = projector.correct(w);
    Ok(projector.correct(&once))
}

/// Cholesky factor of `Q + gamma I`, keyed on the `(Q, gamma)` it was built from.
#[derive(Clone, Debug)]
pub struct QuadraticCache {
    q_mat: DMatrix<f64>,
    gamma: f64,
    factor: Cholesky<f64, Dyn>,
}

impl QuadraticCache {
    pub fn new(q_mat: DMatrix<f64>, gamma: f64) -> Result<Self, ProxError> {
        if !q_mat.is_square() {
            return Err(ProxError::DimensionMismatch {
                expected: q_mat.nrows(),
                got: q_mat.ncols(),
            });
        }
        if !(gamma > 0.0) {
            return Err(ProxError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let asymmetry = (&q_mat - q_mat.transpose()).amax();
        if asymmetry > 1e-10 {
            return Err(ProxError::NotSymmetric { asymmetry });
        }
        let n = q_mat.nrows();
        let shifted = &q_mat + DMatrix::identity(n, n) * gamma;
        let factor = Cholesky::new(shifted).ok_or(ProxError::NotPositiveDefinite)?;
        Ok(Self { q_mat, gamma, factor })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q_mat
    }
}

/// Solves `(Q + gamma I) x = gamma w - q` with the cached factorization.
pub fn solve_regularized_quadratic(
    cache: &QuadraticCache,
    q: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, ProxError> {
    let n = cache.q_mat.nrows();
    check_dim(n, q.len())?;
    check_dim(n, w.len())?;
    let rhs = w * cache.gamma - q;
    let mut x = cache.factor.solve(&rhs);
    let residual = &rhs - (&cache.q_mat * &x + &x * cache.gamma);
    x += cache.factor.solve(&residual);
    Ok(x)
}

/// `prox_{gamma f*}(z) = z - gamma prox_{f/gamma}(z / gamma)` for an identity-map oracle of `f`.
pub fn moreau_conjugate_prox(
    prox_f: &dyn ProxOracle,
    z: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>, ProxError> {
    let inner = prox_f.evaluate(&(z / gamma), gamma)?;
    Ok(z - inner * gamma)
}

// ---------------------------------------------------------------------------
// Oracles

#[derive(Clone, Debug)]
pub struct L1Norm {
    pub weight: f64,
    pub dim: usize,
}

impl ProxOracle for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> &str {
        "l1"
    }
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim, w.len())?;
        Ok(soft_threshold_l1(w, self.weight / gamma))
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        Some(self.weight * x.lp_norm(1))
    }
}

#[derive(Clone, Debug)]
pub struct GroupL12 {
    pub weight: f64,
    pub groups: Groups,
}

impl ProxOracle for GroupL12 {
    fn dim(&self) -> usize {
        self.groups.dim()
    }
    fn name(&self) -> &str {
        "l12"
    }
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError> {
        prox_group_l12(w, &self.groups, self.weight / gamma)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let total: f64 = self
            .groups
            .iter()
            .map(|g| g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
            .sum();
        Some(self.weight * total)
    }
}

/// Nuclear norm of a `rows x cols` matrix stored column-major in a vector.
#[derive(Clone, Debug)]
pub struct NuclearNorm {
    pub weight: f64,
    pub rows: usize,
    pub cols: usize,
}

impl ProxOracle for NuclearNorm {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }
    fn name(&self) -> &str {
        "nuclear"
    }
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim(), w.len())?;
        let m = DMatrix::from_column_slice(self.rows, self.cols, w.as_slice());
        let shrunk = prox_nuclear(&m, self.weight / gamma)?;
        Ok(DVector::from_column_slice(shrunk.as_slice()))
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let m = DMatrix::from_column_slice(self.rows, self.cols, x.as_slice());
        Some(self.weight * m.singular_values().sum())
    }
}

fn indicator_value(feasible: bool) -> Option<f64> {
    Some(if feasible { 0.0 } else { f64::INFINITY })
}

#[derive(Clone, Debug)]
pub struct BoxIndicator {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl BoxIndicator {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, ProxError> {
        check_dim(lo.len(), hi.len())?;
        check_box(&lo, &hi)?;
        Ok(Self { lo, hi })
    }
}

impl ProxOracle for BoxIndicator {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn name(&self) -> &str {
        "box"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        project_box(w, &self.lo, &self.hi)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let tol = 1e-9;
        indicator_value((0..x.len()).all(|i| x[i] >= self.lo[i] - tol && x[i] <= self.hi[i] + tol))
    }
}

#[derive(Clone, Debug)]
pub struct AffineIndicator {
    pub projector: AffineProjector,
}

impl ProxOracle for AffineIndicator {
    fn dim(&self) -> usize {
        self.projector.k.ncols()
    }
    fn name(&self) -> &str {
        "affine"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        project_affine(w, &self.projector)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let r = (&self.projector.k * x - &self.projector.f).norm();
        indicator_value(r <= 1e-8 * (1.0 + self.projector.f.norm()))
    }
}

/// `1/2 x^T Q x + <q, x>`.
#[derive(Clone, Debug)]
pub struct QuadraticProx {
    cache: QuadraticCache,
    linear: DVector<f64>,
}

impl QuadraticProx {
    pub fn new(cache: QuadraticCache, linear: DVector<f64>) -> Result<Self, ProxError> {
        check_dim(cache.q_mat.nrows(), linear.len())?;
        Ok(Self { cache, linear })
    }
}

impl ProxOracle for QuadraticProx {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn name(&self) -> &str {
        "quadratic"
    }
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError> {
        if gamma != self.cache.gamma {
            return Err(ProxError::GammaMismatch {
                cached: self.cache.gamma,
                requested: gamma,
            });
        }
        solve_regularized_quadratic(&self.cache, &self.linear, w)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        Some(0.5 * x.dot(&(&self.cache.q_mat * x)) + self.linear.dot(x))
    }
}

/// Indicator of the column span of an orthonormal basis.
#[derive(Clone, Debug)]
pub struct SubspaceIndicator {
    basis: DMatrix<f64>,
}

impl SubspaceIndicator {
    pub fn new(basis: DMatrix<f64>) -> Result<Self, ProxError> {
        let k = basis.ncols();
        let gap = (basis.tr_mul(&basis) - DMatrix::identity(k, k)).amax();
        if gap > 1e-10 {
            return Err(ProxError::InvalidParameter(format!(
                "basis columns are not orthonormal (deviation {gap:e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

impl ProxOracle for SubspaceIndicator {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }
    fn name(&self) -> &str {
        "subspace"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim(), w.len())?;
        Ok(&self.basis * self.basis.tr_mul(w))
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let r = (x - &self.basis * self.basis.tr_mul(x)).norm();
        indicator_value(r <= 1e-9 * (1.0 + x.norm()))
    }
}

/// `f = 0`; its prox is the identity.
#[derive(Clone, Debug)]
pub struct ZeroFunction {
    pub dim: usize,
}

impl ProxOracle for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> &str {
        "zero"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim, w.len())?;
        Ok(w.clone())
    }
    fn value(&self, _x: &DVector<f64>) -> Option<f64> {
        Some(0.0)
    }
}

/// Indicator of `{0}`; its prox is identically zero.
#[derive(Clone, Debug)]
pub struct OriginIndicator {
    pub dim: usize,
}

impl ProxOracle for OriginIndicator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> &str {
        "origin"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim, w.len())?;
        Ok(DVector::zeros(self.dim))
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        indicator_value(x.amax() == 0.0)
    }
}

/// Indicator of `{x : x_i = f_i for every observed i}`.
#[derive(Clone, Debug)]
pub struct CoordinateIndicator {
    observed: Vec<usize>,
    values: DVector<f64>,
}

impl CoordinateIndicator {
    /// `values` has full length; only the entries listed in `observed` are pinned.
    pub fn new(observed: Vec<usize>, values: DVector<f64>) -> Result<Self, ProxError> {
        if let Some(&bad) = observed.iter().find(|&&i| i >= values.len()) {
            return Err(ProxError::InvalidParameter(format!(
                "observed index {bad} outside 0..{}",
                values.len()
            )));
        }
        Ok(Self { observed, values })
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn project(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = w.clone();
        for &i in &self.observed {
            out[i] = self.values[i];
        }
        out
    }
}

impl ProxOracle for CoordinateIndicator {
    fn dim(&self) -> usize {
        self.values.len()
    }
    fn name(&self) -> &str {
        "observed-pixels"
    }
    fn evaluate(&self, w: &DVector<f64>, _gamma: f64) -> Result<DVector<f64>, ProxError> {
        check_dim(self.dim(), w.len())?;
        Ok(self.project(w))
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        indicator_value(self.observed.iter().all(|&i| (x[i] - self.values[i]).abs() <= 1e-9))
    }
}

/// Re-targets an identity-map oracle to the map `-I`:
/// `argmin f(y) + gamma/2 ||-y - w||^2 = prox(-w)`.
#[derive(Clone, Debug)]
pub struct Negated(pub Arc<dyn ProxOracle>);

impl ProxOracle for Negated {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn name(&self) -> &str {
        self.0.name()
    }
    fn evaluate(&self, w: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, ProxError> {
        self.0.evaluate(&-w, gamma)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        self.0.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold_l1(&dv(&[2.0]), 1.0), dv(&[1.0]));
        assert_eq!(soft_threshold_l1(&dv(&[0.5, -0.2]), 1.0), dv(&[0.0, 0.0]));
        assert_eq!(soft_threshold_l1(&dv(&[-3.0, 4.0]), 2.0), dv(&[-1.0, 2.0]));
    }

    #[test]
    fn group_examples() {
        let one = Groups::new(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(prox_group_l12(&dv(&[3.0, 4.0]), &one, 5.0).unwrap(), dv(&[0.0, 0.0]));
        assert_eq!(prox_group_l12(&dv(&[3.0, 4.0]), &one, 2.5).unwrap(), dv(&[1.5, 2.0]));
        let two = Groups::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let w = dv(&[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(prox_group_l12(&w, &two, 0.0).unwrap(), w);
        let zero = dv(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(prox_group_l12(&zero, &two, 1.0).unwrap(), zero);
    }

    #[test]
    fn invalid_partitions() {
        assert!(matches!(
            Groups::new(3, vec![vec![0, 1], vec![1, 2]]),
            Err(ProxError::OverlappingGroups { index: 1, .. })
        ));
        assert!(matches!(
            Groups::new(3, vec![vec![0, 1]]),
            Err(ProxError::OverlappingGroups { index: 2, .. })
        ));
        assert!(Groups::contiguous(10, 4).is_err());
    }

    #[test]
    fn nuclear_examples() {
        let d = DMatrix::from_diagonal(&dv(&[3.0, 1.0]));
        let out = prox_nuclear(&d, 2.0).unwrap();
        assert!((out - DMatrix::from_diagonal(&dv(&[1.0, 0.0]))).amax() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = DMatrix::from_fn(5, 3, |_, _| StandardNormal.sample(&mut rng));
        assert!((prox_nuclear(&w, 0.0).unwrap() - &w).amax() < 1e-12);

        let u = gaussian(&mut rng, 4).normalize();
        let v = gaussian(&mut rng, 3).normalize();
        let rank_one = &u * v.transpose();
        let out = prox_nuclear(&rank_one, 0.5).unwrap();
        assert!((out - rank_one * 0.5).amax() < 1e-14);
    }

    #[test]
    fn nuclear_on_diagonal_is_soft_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let diag = gaussian(&mut rng, 5);
            let tau = rng.random_range(0.0..1.5);
            let out = prox_nuclear(&DMatrix::from_diagonal(&diag), tau).unwrap();
            let expected = DMatrix::from_diagonal(&soft_threshold_l1(&diag, tau));
            assert!((out - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn box_examples() {
        assert_eq!(project_box(&dv(&[2.0]), &dv(&[0.0]), &dv(&[1.0])).unwrap(), dv(&[1.0]));
        assert_eq!(project_box(&dv(&[0.5]), &dv(&[0.0]), &dv(&[1.0])).unwrap(), dv(&[0.5]));
        assert_eq!(
            project_box(&dv(&[-1.0, 3.0]), &dv(&[0.0, 0.0]), &dv(&[2.0, 2.0])).unwrap(),
            dv(&[0.0, 2.0])
        );
        assert!(matches!(
            project_box(&dv(&[0.0]), &dv(&[1.0]), &dv(&[0.0])),
            Err(ProxError::EmptyBox { index: 0, .. })
        ));
    }

    #[test]
    fn affine_examples() {
        let f = dv(&[1.0, -2.0, 0.5]);
        let proj = AffineProjector::new(DMatrix::identity(3, 3), f.clone()).unwrap();
        assert!((project_affine(&dv(&[9.0, 9.0, 9.0]), &proj).unwrap() - &f).amax() < 1e-15);

        // K = [1 1], f = 2: minimize ||x - w||^2 s.t. x1 + x2 = 2 from w = 0.
        // KKT: x = w - K^T lambda, K x = f  =>  lambda = -1, x = (1, 1).
        let proj = AffineProjector::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[2.0])).unwrap();
        let x = project_affine(&dv(&[0.0, 0.0]), &proj).unwrap();
        assert!((x - dv(&[1.0, 1.0])).amax() < 1e-15);
        let inside = dv(&[3.0, -1.0]);
        assert!((project_affine(&inside, &proj).unwrap() - &inside).amax() < 1e-14);
    }

    #[test]
    fn affine_projection_is_feasible_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = DMatrix::from_fn(20, 60, |_, _| StandardNormal.sample(&mut rng));
        let f = gaussian(&mut rng, 20);
        let proj = AffineProjector::new(k.clone(), f.clone()).unwrap();
        for _ in 0..10 {
            let w = gaussian(&mut rng, 60) * 10.0;
            let p = project_affine(&w, &proj).unwrap();
            assert!((&k * &p - &f).norm() <= 1e-10 * (1.0 + f.norm()));
            let pp = project_affine(&p, &proj).unwrap();
            assert!((pp - &p).amax() <= 1e-10);
        }
    }

    #[test]
    fn affine_rank_deficiency_detected() {
        let k = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(
            AffineProjector::new(k, dv(&[1.0, 2.0])).unwrap_err(),
            ProxError::RankDeficient
        );
    }

    #[test]
    fn regularized_quadratic_examples() {
        let w = dv(&[0.3, -1.2]);
        let cache = QuadraticCache::new(DMatrix::zeros(2, 2), 1.0).unwrap();
        let x = solve_regularized_quadratic(&cache, &dv(&[0.0, 0.0]), &w).unwrap();
        assert!((x - &w).amax() < 1e-15);

        let cache = QuadraticCache::new(DMatrix::identity(1, 1), 1.0).unwrap();
        let x = solve_regularized_quadratic(&cache, &dv(&[0.0]), &dv(&[2.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);

        // (diag(1,3) + 2I) x = 2 (3,3) - (1,0) = (5, 6)  =>  x = (5/3, 6/5)
        let cache = QuadraticCache::new(DMatrix::from_diagonal(&dv(&[1.0, 3.0])), 2.0).unwrap();
        let x = solve_regularized_quadratic(&cache, &dv(&[1.0, 0.0]), &dv(&[3.0, 3.0])).unwrap();
        assert!((x - dv(&[5.0 / 3.0, 1.2])).amax() < 1e-15);
    }

    #[test]
    fn regularized_quadratic_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = DMatrix::from_fn(30, 40, |_, _| StandardNormal.sample(&mut rng));
        let q_mat = g.tr_mul(&g);
        let gamma = 0.05;
        let cache = QuadraticCache::new(q_mat.clone(), gamma).unwrap();
        let q = gaussian(&mut rng, 40);
        let w = gaussian(&mut rng, 40);
        let x = solve_regularized_quadratic(&cache, &q, &w).unwrap();
        let rhs = &w * gamma - &q;
        let res = (&q_mat * &x + &x * gamma - &rhs).norm();
        assert!(res <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn asymmetric_quadratic_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            QuadraticCache::new(q, 1.0),
            Err(ProxError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn quadratic_oracle_checks_gamma() {
        let cache = QuadraticCache::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let oracle = QuadraticProx::new(cache, dv(&[0.0, 0.0])).unwrap();
        assert!(matches!(
            oracle.evaluate(&dv(&[1.0, 1.0]), 2.0),
            Err(ProxError::GammaMismatch { .. })
        ));
    }

    #[test]
    fn moreau_examples() {
        let z = dv(&[1.5, -2.0, 0.25]);
        let out = moreau_conjugate_prox(&ZeroFunction { dim: 3 }, &z, 0.7).unwrap();
        assert!(out.amax() < 1e-15);
        let out = moreau_conjugate_prox(&OriginIndicator { dim: 3 }, &z, 0.7).unwrap();
        assert_eq!(out, z);
        // conjugate of |.| is the indicator of [-1, 1]; its prox is a clamp
        let l1 = L1Norm { weight: 1.0, dim: 1 };
        let out = moreau_conjugate_prox(&l1, &dv(&[3.0]), 1.0).unwrap();
        assert_eq!(out, dv(&[3.0_f64.clamp(-1.0, 1.0)]));
    }

    #[test]
    fn negated_oracle_flips_argument() {
        let inner: Arc<dyn ProxOracle> = Arc::new(L1Norm { weight: 1.0, dim: 2 });
        let neg = Negated(inner);
        // argmin |y| + 1/2 ||-y - w||^2 with w = (3, -0.5)  =>  y = soft(-w, 1)
        assert_eq!(neg.evaluate(&dv(&[3.0, -0.5]), 1.0).unwrap(), dv(&[-2.0, 0.0]));
    }
}
