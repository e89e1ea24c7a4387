//! Linear maps used as the `A`/`B` operators of a split problem.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::sparse::SparseMatrix;

/// Shape of a 2-D grid whose pixels are stored column-major in a flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.rows * j
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Dense,
    Sparse,
    Structured,
}

/// A linear operator with an explicit adjoint.
#[derive(Clone, Debug)]
pub enum LinearMap {
    /// `factor * I` on `R^dim`. `factor = -1` is the usual `B = -I`.
    ScaledIdentity { dim: usize, factor: f64 },
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
    /// Forward differences with replicate boundary, vertical block first.
    Gradient(GridShape),
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap::ScaledIdentity { dim, factor: 1.0 }
    }

    pub fn neg_identity(dim: usize) -> Self {
        LinearMap::ScaledIdentity { dim, factor: -1.0 }
    }

    pub fn kind(&self) -> MapKind {
        match self {
            LinearMap::Dense(_) => MapKind::Dense,
            LinearMap::Sparse(_) => MapKind::Sparse,
            LinearMap::ScaledIdentity { .. } | LinearMap::Gradient(_) => MapKind::Structured,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::Sparse(s) => s.rows(),
            LinearMap::Gradient(g) => 2 * g.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::Sparse(s) => s.cols(),
            LinearMap::Gradient(g) => g.len(),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.cols());
        match self {
            LinearMap::ScaledIdentity { factor, .. } => {
                if *factor == 1.0 {
                    v.clone()
                } else {
                    v * *factor
                }
            }
            LinearMap::Dense(m) => m * v,
            LinearMap::Sparse(s) => s.mul_vec(v),
            LinearMap::Gradient(g) => gradient(*g, v),
        }
    }

    pub fn apply_adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.rows());
        match self {
            LinearMap::ScaledIdentity { factor, .. } => {
                if *factor == 1.0 {
                    v.clone()
                } else {
                    v * *factor
                }
            }
            LinearMap::Dense(m) => m.tr_mul(v),
            LinearMap::Sparse(s) => s.tr_mul_vec(v),
            LinearMap::Gradient(g) => gradient_adjoint(*g, v),
        }
    }

    /// Spectral norm by power iteration on `M^T M`, stopped at `rel_tol`
    /// relative change of the Rayleigh quotient.
    pub fn operator_norm(&self, rel_tol: f64, max_iter: usize) -> f64 {
        match self {
            LinearMap::ScaledIdentity { factor, .. } => return factor.abs(),
            LinearMap::Dense(m) if m.nrows().min(m.ncols()) <= 4 => {
                return m.singular_values().max();
            }
            _ => {}
        }
        let n = self.cols();
        if n == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f70);
        let mut x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        x /= x.norm();
        let mut sigma_sq = 0.0_f64;
        for _ in 0..max_iter {
            let y = self.apply_adjoint(&self.apply(&x));
            let next = x.dot(&y);
            let ny = y.norm();
            if ny == 0.0 {
                return 0.0;
            }
            x = y / ny;
            if (next - sigma_sq).abs() <= rel_tol * next.abs() {
                sigma_sq = next;
                break;
            }
            sigma_sq = next;
        }
        sigma_sq.max(0.0).sqrt()
    }
}

fn gradient(g: GridShape, x: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let mut out = DVector::zeros(2 * n);
    for j in 0..g.cols {
        for i in 0..g.rows {
            let at = g.index(i, j);
            if i + 1 < g.rows {
                out[at] = x[g.index(i + 1, j)] - x[at];
            }
            if j + 1 < g.cols {
                out[n + at] = x[g.index(i, j + 1)] - x[at];
            }
        }
    }
    out
}

fn gradient_adjoint(g: GridShape, p: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let mut out = DVector::zeros(n);
    for j in 0..g.cols {
        for i in 0..g.rows {
            let at = g.index(i, j);
            let mut acc = 0.0;
            if i + 1 < g.rows {
                acc -= p[at];
            }
            if i > 0 {
                acc += p[g.index(i - 1, j)];
            }
            if j + 1 < g.cols {
                acc -= p[n + at];
            }
            if j > 0 {
                acc += p[n + g.index(i, j - 1)];
            }
            out[at] = acc;
        }
    }
    out
}
