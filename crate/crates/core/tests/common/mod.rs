//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitaccel::extrapolate::DiffWindow;

/// `z_k = z* + M^k (z_0 - z*)`.
pub struct LinearSequence {
    pub m: DMatrix<f64>,
    pub z0: DVector<f64>,
    pub z_star: DVector<f64>,
    /// Degree of the minimal polynomial of `m`.
    pub degree: usize,
}

impl LinearSequence {
    pub fn iterate(&self, k: usize) -> DVector<f64> {
        let mut e = &self.z0 - &self.z_star;
        for _ in 0..k {
            e = &self.m * e;
        }
        &self.z_star + e
    }

    /// Window holding `v_k, ..., v_{k-q}`, newest first.
    pub fn window(&self, k: usize, q: usize) -> DiffWindow {
        let mut w = DiffWindow::for_order(self.z0.len(), q);
        for j in (k - q)..=k {
            w.push_difference(self.iterate(j) - self.iterate(j - 1)).unwrap();
        }
        w
    }
}

/// Diagonalizable `M = S D S^{-1}` with `rho(M) <= 0.9`, built from a few
/// well-separated real eigenvalues and at most one complex pair.
pub fn linear_sequence(seed: u64, min_degree: usize) -> LinearSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(min_degree.max(2)..=8);
    let with_pair = p >= 3 && rng.random_bool(0.5);
    let real_slots = if with_pair { p - 2 } else { p };
    let grid: Vec<f64> = (0..10).map(|i| -0.9 + 0.2 * i as f64).collect();
    let distinct_real = if with_pair {
        rng.random_range(min_degree.saturating_sub(2).max(1)..=real_slots)
    } else {
        rng.random_range(min_degree.max(1)..=real_slots)
    };
    let picks = rand::seq::index::sample(&mut rng, grid.len(), distinct_real);
    let mut reals: Vec<f64> = picks.iter().map(|i| grid[i]).collect();
    while reals.len() < real_slots {
        let r = reals[rng.random_range(0..distinct_real)];
        reals.push(r);
    }
    let mut d = DMatrix::zeros(p, p);
    for (i, r) in reals.iter().enumerate() {
        d[(i, i)] = *r;
    }
    if with_pair {
        let (r, phi) = (rng.random_range(0.3..0.9), rng.random_range(0.3..2.8));
        let (c, s) = (r * f64::cos(phi), r * f64::sin(phi));
        d[(p - 2, p - 2)] = c;
        d[(p - 2, p - 1)] = -s;
        d[(p - 1, p - 2)] = s;
        d[(p - 1, p - 1)] = c;
    }
    let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let s = DMatrix::identity(p, p) + g * (0.4 / (p as f64).sqrt());
    let s_inv = s.clone().try_inverse().expect("perturbed identity is invertible");
    let m = &s * d * s_inv;
    let z0 = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    let z_star = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    LinearSequence {
        m,
        z0,
        z_star,
        degree: distinct_real + 2 * usize::from(with_pair),
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}
