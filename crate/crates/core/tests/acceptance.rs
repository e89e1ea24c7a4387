//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts the same condition.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;

use splitaccel::a3dmm::{SafeguardScale, WindowSource};
use splitaccel::extrapolate::{extrapolate_finite, extrapolate_infinite, fit_coefficients, fitting_error_bound};
use splitaccel::problems::*;
use splitaccel::spectra::*;
use splitaccel::splitting::{dr_dual_step, DualScheme};
use splitaccel::*;

mod common;
use common::*;

fn report(n: usize, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_01_extrapolation_exactness() {
    let started = Instant::now();
    let mut worst_fit = 0.0f64;
    let mut worst_err = 0.0f64;
    for seed in 0..100 {
        let seq = linear_sequence(seed, 1);
        let q = seq.degree;
        let k = q + 1;
        let window = seq.window(k, q);
        let fit = fit_coefficients(&window).unwrap();
        let z_k = seq.iterate(k);
        let z_bar = extrapolate_infinite(&z_k, &window, &fit).unwrap();
        worst_fit = worst_fit.max(fit.residual / window.column(0).norm());
        worst_err = worst_err.max((z_bar - &seq.z_star).norm() / (&seq.z0 - &seq.z_star).norm());
    }
    let elapsed = started.elapsed();
    let pass = worst_fit <= 1e-10 && worst_err <= 1e-8 && elapsed < Duration::from_secs(1);
    report(
        1,
        pass,
        format!("max eps/||v|| = {worst_fit:.2e} (<= 1e-10), max rel error = {worst_err:.2e} (<= 1e-8), {elapsed:.2?} (< 1 s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn feasibility_run(alpha: f64, accel: Acceleration, max_iter: usize) -> Trace {
    let inst = make_feasibility(alpha, 7).unwrap();
    let gamma = inst.default_gamma();
    let problem = inst.split(gamma).unwrap();
    let config = SolverConfig {
        tol: 1e-300,
        max_iter,
        ..SolverConfig::new(gamma)
    };
    let mut trace = Trace::with_reference(inst.reference.clone().unwrap());
    let spec = RunSpec {
        z0: inst.initial_point(),
        ..RunSpec::new(config, accel)
    };
    run(&problem, &spec, &mut trace).unwrap();
    trace
}

#[test]
fn criterion_02_angle_limit_and_linearization() {
    let started = Instant::now();
    let mut worst_angle = 0.0f64;
    let mut worst_linear = 0.0f64;
    for alpha in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
        let inst = make_feasibility(alpha, 7).unwrap();
        let ProblemData::Feasibility { t1, t2 } = &inst.data else {
            unreachable!()
        };
        let m = polyhedral_admm_matrix(t1, t2).unwrap();
        let gamma = inst.default_gamma();
        let problem = inst.split(gamma).unwrap();
        let mut state = IterateState::initial(&problem);
        state.z = inst.initial_point().unwrap();
        state.z_bar = state.z.clone();
        let mut diffs = Vec::new();
        for _ in 0..201 {
            state = splitting::admm_step(&problem, &state, gamma).unwrap();
            diffs.push(state.v.clone());
        }
        // diffs[i] = v_{i+1}
        for k in 50..=200 {
            let cos = trajectory_angle(&diffs[k - 1], &diffs[k - 2]).unwrap();
            worst_angle = worst_angle.max((cos - alpha.cos()).abs());
        }
        for k in 2..200 {
            let predicted = &m * &diffs[k - 1];
            let rel = (predicted - &diffs[k]).norm() / diffs[k - 1].norm();
            worst_linear = worst_linear.max(rel);
        }
    }
    let elapsed = started.elapsed();
    let pass = worst_angle <= 1e-6 && worst_linear <= 1e-10 && elapsed < Duration::from_secs(1);
    report(
        2,
        pass,
        format!(
            "max |cos theta_k - cos alpha| = {worst_angle:.2e} (<= 1e-6), max ||v_(k+1) - M v_k|| / ||v_k|| = {worst_linear:.2e} (<= 1e-10), {elapsed:.2?} (< 1 s)"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn lasso_regime(inst: &ProblemInstance, gamma: f64) -> AngleSeries {
    let problem = inst.split(gamma).unwrap();
    let config = SolverConfig {
        tol: 1e-300,
        max_iter: 400,
        ..SolverConfig::new(gamma)
    };
    let mut trace = Trace::new();
    run(&problem, &RunSpec::new(config, Acceleration::None), &mut trace).unwrap();
    let norms: Vec<f64> = trace.records.iter().map(|r| r.norm_v).collect();
    let values = truncate_at_noise(&trace.cos_thetas(), &norms, 1e-13 * norms[0]);
    classify_trajectory(&values, &ClassifyConfig::default()).unwrap()
}

#[test]
fn criterion_03_lasso_trajectory_regimes() {
    let started = Instant::now();
    let inst = desk_lasso(1);
    let k2 = inst.k_norm_sq().unwrap();
    let large = lasso_regime(&inst, k2 + 0.1);
    let small = lasso_regime(&inst, k2 / 10.0);
    let elapsed = started.elapsed();
    let pass = large.kind == TrajectoryKind::StraightLine
        && small.kind == TrajectoryKind::Spiral
        && elapsed < Duration::from_secs(5);
    report(
        3,
        pass,
        format!(
            "gamma = ||K||^2 + 0.1: {:?} (mean cos {:.6}), gamma = ||K||^2/10: {:?} (mean cos {:.6}), {elapsed:.2?} (< 5 s)",
            large.kind,
            large.limit.unwrap(),
            small.kind,
            small.limit.unwrap()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_04_inertial_failure_on_spiral() {
    let started = Instant::now();
    let hit = |accel| feasibility_run(FRAC_PI_4, accel, 2000).iterations_to_dist_z(1e-8);
    let admm = hit(Acceleration::None);
    let i01 = hit(Acceleration::Inertial { a: 0.1, b: None });
    let i03 = hit(Acceleration::Inertial { a: 0.3, b: None });
    let three = hit(Acceleration::Inertial { a: 0.4, b: Some(-0.2) });
    let elapsed = started.elapsed();
    let lt = |a: Option<usize>, b: Option<usize>| matches!((a, b), (Some(a), Some(b)) if a < b);
    let pass = lt(admm, i01) && lt(admm, i03) && lt(three, admm) && elapsed < Duration::from_secs(1);
    report(
        4,
        pass,
        format!("iterations to 1e-8: ADMM {admm:?}, iADMM(0.1) {i01:?}, iADMM(0.3) {i03:?}, 3-point(0.4, -0.2) {three:?}, {elapsed:.2?} (< 1 s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn iterations_to_x(inst: &ProblemInstance, gamma: f64, accel: Acceleration) -> Option<usize> {
    let problem = inst.split(gamma).unwrap();
    let config = SolverConfig {
        tol: 1e-14,
        max_iter: 20_000,
        ..SolverConfig::new(gamma)
    };
    let mut trace = Trace::with_reference(inst.reference.clone().unwrap());
    run(&problem, &RunSpec::new(config, accel), &mut trace).unwrap();
    trace.iterations_to_dist_x(1e-6)
}

fn with_reference(mut inst: ProblemInstance, gamma: f64) -> ProblemInstance {
    let config = SolverConfig {
        tol: 1e-10,
        max_iter: 20_000,
        ..SolverConfig::new(gamma)
    };
    let run = inst.compute_reference(&config).unwrap();
    assert!(run.converged, "reference run for {} did not converge", inst.descriptor);
    inst
}

/// `(ratio for s = inf, ratio for s = 100)` against plain ADMM.
fn acceleration_ratios(inst: &ProblemInstance, gamma: f64, window: WindowSource) -> (f64, f64, usize) {
    let admm = iterations_to_x(inst, gamma, Acceleration::None).unwrap();
    let ratio = |s| {
        let cfg = ExtrapConfig {
            window,
            ..ExtrapConfig::new(6, s)
        };
        iterations_to_x(inst, gamma, Acceleration::Extrapolation(cfg)).map_or(f64::INFINITY, |n| n as f64 / admm as f64)
    };
    (ratio(Depth::Infinite), ratio(Depth::Finite(100)), admm)
}

#[test]
fn criterion_05_a3dmm_acceleration() {
    let started = Instant::now();
    let lasso = desk_lasso(1);
    let lasso_gamma = lasso.default_gamma();
    let lasso = with_reference(lasso, lasso_gamma);
    let l1 = make_affine_constrained(AffineShape::L1_DESK, 1).unwrap();
    let l1_gamma = l1.default_gamma();
    let l1 = with_reference(l1, l1_gamma);

    let mut pass = true;
    let mut parts = Vec::new();
    for (name, inst, gamma) in [("lasso", &lasso, lasso_gamma), ("l1", &l1, l1_gamma)] {
        let (inf, s100, admm) = acceleration_ratios(inst, gamma, WindowSource::Raw);
        pass &= inf <= 0.5 && s100 <= 0.6;
        parts.push(format!("{name}: ADMM {admm} its, (6,inf) {inf:.2} (<= 0.50), (6,100) {s100:.2} (<= 0.60)"));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    report(5, pass, format!("{}, {elapsed:.2?} (< 10 s)", parts.join("; ")));
    for (name, inst, gamma) in [("lasso", &lasso, lasso_gamma), ("l1", &l1, l1_gamma)] {
        let (inf, s100, _) = acceleration_ratios(inst, gamma, WindowSource::Anchored);
        println!("  info: anchored window, {name}: (6,inf) {inf:.2}, (6,100) {s100:.2}");
    }
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_06_extrapolation_error_bound() {
    let mut worst_slack = f64::NEG_INFINITY;
    let mut checked = 0;
    for seed in 0..100 {
        let seq = linear_sequence(1000 + seed, 2);
        let q = seq.degree - 1;
        let k = q + 3;
        let window = seq.window(k, q);
        let fit = fit_coefficients(&window).unwrap();
        if fit.spectral_radius >= 1.0 {
            continue;
        }
        let mut powers = Vec::with_capacity(25);
        let mut mp = seq.m.clone();
        for _ in 0..25 {
            powers.push(spectral_norm(&mp));
            mp = &mp * &seq.m;
        }
        let z_k = seq.iterate(k);
        for s in [1, 5, 25] {
            let z_bar = extrapolate_finite(&z_k, &window, &fit, s).unwrap();
            let lhs = (z_bar - &seq.z_star).norm();
            let rhs = (seq.iterate(k + s) - &seq.z_star).norm()
                + fitting_error_bound(&fit, &powers, s).unwrap() * fit.residual
                + 1e-10;
            worst_slack = worst_slack.max(lhs - rhs);
            checked += 1;
        }
    }
    let pass = worst_slack <= 0.0 && checked >= 150;
    report(
        6,
        pass,
        format!("{checked} (seed, s) cases, max lhs - rhs = {worst_slack:.2e} (<= 0)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_07_inertial_spectral_radius() {
    let a_grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut worst_real = 0.0f64;
    for i in 0..100 {
        let eta = Complex64::new(i as f64 / 100.0, 0.0);
        for &a in &a_grid {
            worst_real = worst_real.max(inertial_spectral_radius(eta, a));
        }
    }
    let mut worst_drop = 0.0f64;
    for j in 1..=32 {
        let alpha = j as f64 * PI / 128.0;
        let eta = Complex64::from_polar(alpha.cos(), alpha);
        let rho: Vec<f64> = a_grid.iter().map(|&a| inertial_spectral_radius(eta, a)).collect();
        for w in rho.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    let pass = worst_real < 1.0 && worst_drop <= 1e-12;
    report(
        7,
        pass,
        format!("max |rho| over real eta = {worst_real:.6} (< 1), largest decrease in a on eta = cos(alpha)e^(i alpha) = {worst_drop:.2e} (<= 1e-12)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn dual_gap(inst: &ProblemInstance, gamma: f64, variant: Variant) -> f64 {
    let problem = inst.split(gamma).unwrap();
    let scheme = match variant {
        Variant::Symmetric => DualScheme::PeacemanRachford,
        _ => DualScheme::DouglasRachford { phi: 1.0 },
    };
    let config = SolverConfig {
        tol: 1e-300,
        max_iter: 100,
        variant,
        ..SolverConfig::new(gamma)
    };
    let (_, _, p) = problem.dims();
    let z0 = DVector::from_fn(p, |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.1);
    let mut state = IterateState::with_z0(problem.dims().0, problem.dims().1, z0.clone());
    let mut z_dual = z0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        state = splitting::step(&problem, &state, gamma, config.z_update(), None).unwrap();
        z_dual = dr_dual_step(&problem, &z_dual, gamma, scheme).unwrap().z_next;
        worst = worst.max((&state.z - &z_dual).norm());
    }
    worst
}

#[test]
fn criterion_08_dual_equivalence() {
    let lasso = desk_lasso(1);
    let feas = make_feasibility(FRAC_PI_4, 7).unwrap();
    let qp = make_qp_box(QP_DESK_N, 1).unwrap();
    let g_lasso = dual_gap(&lasso, lasso.default_gamma(), Variant::Standard);
    let g_feas = dual_gap(&feas, feas.default_gamma(), Variant::Standard);
    let g_qp = dual_gap(&qp, qp.default_gamma(), Variant::Symmetric);
    let pass = g_lasso <= 1e-10 && g_feas <= 1e-10 && g_qp <= 1e-10;
    report(
        8,
        pass,
        format!("max ||z_admm - z_dual||: lasso/DR {g_lasso:.2e}, feasibility/DR {g_feas:.2e}, QP symmetric/PR {g_qp:.2e} (<= 1e-10)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_09_guarded_convergence() {
    let zeta2 = PI * PI / 6.0;
    let mut failures = Vec::new();
    let mut count = 0;
    for seed in 1..=5u64 {
        let image = piecewise_constant_image(16, 16, 4, seed);
        let gallery = vec![
            desk_lasso(seed),
            make_affine_constrained(AffineShape::L1_DESK, seed).unwrap(),
            make_affine_constrained(AffineShape::L12_DESK, seed).unwrap(),
            make_affine_constrained(AffineShape::NUCLEAR_DESK, seed).unwrap(),
            make_qp_box(QP_DESK_N, seed).unwrap(),
            make_feasibility(FRAC_PI_4, seed).unwrap(),
            make_tv_inpainting(&image, 0.5, seed).unwrap(),
        ];
        for inst in gallery {
            let gamma = inst.default_gamma();
            let problem = inst.split(gamma).unwrap();
            let guard = Safeguard {
                a: 1.0,
                b: SafeguardScale::RelativeToFirstDiff(1.0),
                delta: 1.0,
                ..Safeguard::default()
            };
            let cfg = ExtrapConfig {
                safeguard: Some(guard),
                ..ExtrapConfig::new(6, Depth::Infinite)
            };
            let config = SolverConfig {
                tol: 1e-9,
                max_iter: 50_000,
                ..SolverConfig::new(gamma)
            };
            let mut trace = Trace::new();
            let spec = RunSpec {
                z0: inst.initial_point(),
                ..RunSpec::new(config, Acceleration::Extrapolation(cfg))
            };
            let out = run(&problem, &spec, &mut trace).unwrap();
            let b = trace.records.iter().map(|r| r.norm_v).find(|&n| n > 0.0).unwrap_or(0.0);
            let budget = b * zeta2 + 1e-9;
            count += 1;
            if !out.converged || out.perturbation_total > budget {
                failures.push(format!(
                    "{} seed {seed}: converged {} after {}, perturbation {:.3e} vs {:.3e}",
                    inst.descriptor, out.converged, out.iterations, out.perturbation_total, budget
                ));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        9,
        pass,
        format!("{} of {count} runs reached ||v_k|| <= 1e-9 within the b*zeta(2) budget {}", count - failures.len(), failures.join("; ")),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn psnr_after(inst: &ProblemInstance, accel: Acceleration, iterations: usize) -> f64 {
    let gamma = inst.default_gamma();
    let problem = inst.split(gamma).unwrap();
    let config = SolverConfig {
        tol: 1e-300,
        max_iter: iterations,
        ..SolverConfig::new(gamma)
    };
    let spec = RunSpec {
        inner: Some(TV_INNER),
        ..RunSpec::new(config, accel)
    };
    let out = run(&problem, &spec, &mut splitaccel::trace::NullSink).unwrap();
    psnr(&out.state.x, inst.truth.as_ref().unwrap())
}

#[test]
fn criterion_10_tv_inpainting_ordering() {
    let started = Instant::now();
    let image = piecewise_constant_image(64, 64, 8, 3);
    let inst = make_tv_inpainting(&image, 0.5, 3).unwrap();
    let admm = psnr_after(&inst, Acceleration::None, 30);
    let a3 = psnr_after(
        &inst,
        Acceleration::Extrapolation(ExtrapConfig::new(6, Depth::Finite(100))),
        30,
    );
    let inertial = psnr_after(&inst, Acceleration::Inertial { a: 0.3, b: None }, 30);
    let elapsed = started.elapsed();
    let pass = a3 >= admm && inertial <= admm + 0.1 && elapsed < Duration::from_secs(30);
    report(
        10,
        pass,
        format!("PSNR at iteration 30: ADMM {admm:.3} dB, A3DMM(6,100) {a3:.3} dB, iADMM(0.3) {inertial:.3} dB, {elapsed:.2?} (< 30 s)"),
    );
    assert!(pass);
}

