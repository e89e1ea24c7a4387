//! Spectral properties of the linearized iteration.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use splitaccel::problems::*;
use splitaccel::spectra::*;
use splitaccel::*;

fn orthonormal(n: usize, d: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, d, &entries[..n * d]).qr().q()
}

/// Differences `v_1, v_2, ...` of plain ADMM on the two-line problem.
fn feasibility_diffs(alpha: f64, seed: u64, count: usize) -> (ProblemInstance, Vec<nalgebra::DVector<f64>>) {
    let inst = make_feasibility(alpha, seed).unwrap();
    let gamma = inst.default_gamma();
    let problem = inst.split(gamma).unwrap();
    let (n, m, _) = problem.dims();
    let mut state = IterateState::with_z0(n, m, inst.initial_point().unwrap());
    let mut diffs = Vec::with_capacity(count);
    for _ in 0..count {
        state = splitting::admm_step(&problem, &state, gamma).unwrap();
        diffs.push(state.v.clone());
    }
    (inst, diffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasibility_angle_tends_to_friedrichs(alpha in 0.2..1.4f64, seed in 0u64..1000) {
        let (inst, diffs) = feasibility_diffs(alpha, seed, 60);
        let ProblemData::Feasibility { t1, t2 } = &inst.data else { unreachable!() };
        let friedrichs = friedrichs_angle(t1, t2).unwrap();
        let tail = angles_of_differences(&diffs);
        let limit = tail[40..].iter().flatten().copied().collect::<Vec<_>>();
        prop_assert!(!limit.is_empty());
        for cos in limit {
            prop_assert!((cos - friedrichs.cos()).abs() <= 1e-6, "{cos} vs {}", friedrichs.cos());
        }
    }

    #[test]
    fn linearization_is_exact(alpha in 0.2..1.4f64, seed in 0u64..1000) {
        let (inst, diffs) = feasibility_diffs(alpha, seed, 40);
        let ProblemData::Feasibility { t1, t2 } = &inst.data else { unreachable!() };
        let m = polyhedral_admm_matrix(t1, t2).unwrap();
        for k in 1..diffs.len() {
            let predicted = &m * &diffs[k - 1];
            let err = (predicted - &diffs[k]).norm();
            prop_assert!(err <= 1e-10 * diffs[k - 1].norm(), "k = {k}: {err:e}");
        }
    }

    #[test]
    fn nonreal_eigenvalues_lie_on_the_circle(
        n in 2usize..7,
        d1 in 1usize..6,
        d2 in 1usize..6,
        entries in prop::collection::vec(-1.0..1.0f64, 72),
    ) {
        prop_assume!(d1 < n && d2 < n);
        let u1 = orthonormal(n, d1, &entries[..36]);
        let u2 = orthonormal(n, d2, &entries[36..]);
        let m = polyhedral_admm_matrix(&u1, &u2).unwrap();
        for lambda in eigenvalues(&m) {
            if lambda.im.abs() > 1e-8 {
                let gap = (lambda.norm() - lambda.arg().cos()).abs();
                prop_assert!(gap <= 1e-10, "{lambda}: {gap:e}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inertial_roots_solve_the_quadratic(r in 0.0..1.0f64, phi in -PI..PI, a in 0.0..1.0f64) {
        let eta = Complex64::from_polar(r, phi);
        for rho in inertial_roots(eta, a) {
            let value = rho * rho - eta * (1.0 + a) * rho + eta * a;
            prop_assert!(value.norm() <= 1e-12, "rho = {rho}: residual {:e}", value.norm());
        }
    }
}
