//! Comparison runs: one reference solve, then every solver of the
//! comparison set on its own thread against that reference.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::thread;

use nalgebra::DVector;
use splitaccel::problems::*;
use splitaccel::spectra::{classify_trajectory, friedrichs_angle, truncate_at_noise, AngleSeries, ClassifyConfig};
use splitaccel::{run, Acceleration, ExtrapConfig, RunOutcome, RunSpec, Safeguard, SolverConfig, Trace, Variant};

use crate::config::{GammaRule, ProblemSpec, RunConfig, SolverSpec};
use crate::plot::{emit_plot_svg, Quantity};
use crate::trace_csv::write_trace_csv;
use crate::{BenchError, VERSION};

pub struct SolverRun {
    pub spec: SolverSpec,
    pub trace: Trace,
    pub outcome: RunOutcome,
}

pub struct ExperimentResult {
    pub instance: ProblemInstance,
    pub gamma: f64,
    pub reference: ReferenceRun,
    pub runs: Vec<SolverRun>,
}

impl ExperimentResult {
    pub fn run(&self, id: &str) -> Option<&SolverRun> {
        self.runs.iter().find(|r| r.spec.id() == id)
    }
}

pub fn build_instance(problem: &ProblemSpec, seed: u64) -> Result<ProblemInstance, BenchError> {
    let inst = match problem {
        ProblemSpec::Lasso { m, n, sparsity, mu } => make_lasso(*m, *n, *sparsity, *mu, seed)?,
        ProblemSpec::L1 => make_affine_constrained(AffineShape::L1_DESK, seed)?,
        ProblemSpec::L12 => make_affine_constrained(AffineShape::L12_DESK, seed)?,
        ProblemSpec::Nuclear => make_affine_constrained(AffineShape::NUCLEAR_DESK, seed)?,
        ProblemSpec::Qp { n } => make_qp_box(*n, seed)?,
        ProblemSpec::Feasibility { alpha } => make_feasibility(*alpha, seed)?,
        ProblemSpec::Tv {
            image,
            size,
            pieces,
            density,
            inner_steps,
        } => {
            let picture = match image {
                Some(path) => load_pgm(&read_bytes(path)?)?,
                None => piecewise_constant_image(*size, *size, *pieces, seed),
            };
            let mut inst = make_tv_inpainting(&picture, *density, seed)?;
            if let ProblemData::TvInpainting { inner, .. } = &mut inst.data {
                inner.max_inner_steps = *inner_steps;
            }
            inst
        }
        ProblemSpec::Libsvm { data, mu } => {
            let file = fs::File::open(data).map_err(|e| BenchError::Io {
                path: data.clone(),
                source: e,
            })?;
            let parsed = parse_libsvm(BufReader::new(file))?;
            lasso_from_libsvm(&parsed, *mu, &data.display().to_string())?
        }
    };
    Ok(inst)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, BenchError> {
    fs::read(path).map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn resolve_gamma(rule: GammaRule, inst: &ProblemInstance) -> Result<f64, BenchError> {
    let k2 = || {
        inst.k_norm_sq().ok_or_else(|| {
            BenchError::Problem(ProblemError::BadShape(format!("{} has no data matrix", inst.descriptor)))
        })
    };
    let gamma = match rule {
        GammaRule::Default => inst.default_gamma(),
        GammaRule::Absolute(g) => g,
        GammaRule::KNormScaled(c) => c * k2()?,
        GammaRule::KNormShifted(c) => k2()? + c,
    };
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(BenchError::Problem(ProblemError::BadShape(format!(
            "gamma rule {rule} gives {gamma}"
        ))));
    }
    Ok(gamma)
}

fn inner_solver(inst: &ProblemInstance) -> Option<splitaccel::InnerSolver> {
    match &inst.data {
        ProblemData::TvInpainting { inner, .. } => Some(*inner),
        _ => None,
    }
}

pub fn acceleration(spec: &SolverSpec, config: &RunConfig) -> Acceleration {
    match *spec {
        SolverSpec::Admm => Acceleration::None,
        SolverSpec::Inertial { a } => Acceleration::Inertial { a, b: None },
        SolverSpec::Inertial3 { a, b } => Acceleration::Inertial { a, b: Some(b) },
        SolverSpec::A3dmm { q, s } => Acceleration::Extrapolation(ExtrapConfig {
            window: config.window,
            safeguard: config.safeguard.then(Safeguard::default),
            ..ExtrapConfig::new(q, s)
        }),
    }
}

fn solver_config(config: &RunConfig, gamma: f64) -> SolverConfig {
    SolverConfig {
        phi: config.phi,
        variant: config.variant,
        tol: config.tol,
        max_iter: config.max_iter,
        ..SolverConfig::new(gamma)
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Standard => "standard",
        Variant::Relaxed => "relaxed",
        Variant::Symmetric => "symmetric",
    }
}

/// Runs one solver on a private copy of the problem.
fn run_solver(
    spec: &SolverSpec,
    config: &RunConfig,
    inst: &ProblemInstance,
    gamma: f64,
    reference: &ReferenceRun,
) -> Result<SolverRun, BenchError> {
    let fail = |source| BenchError::Run {
        solver: spec.id(),
        source,
    };
    let problem = inst.split(gamma)?;
    let run_spec = RunSpec {
        inner: inner_solver(inst),
        z0: inst.initial_point(),
        ..RunSpec::new(solver_config(config, gamma), acceleration(spec, config))
    };
    let mut trace = Trace::with_reference(reference.reference.clone());
    let outcome = run(&problem, &run_spec, &mut trace).map_err(fail)?;
    trace
        .set_meta("solver", spec.id())
        .set_meta("gamma", gamma)
        .set_meta("phi", config.phi)
        .set_meta("variant", variant_name(config.variant))
        .set_meta("seed", config.seed)
        .set_meta("problem", &inst.descriptor)
        .set_meta("tol", config.tol)
        .set_meta("max_iter", config.max_iter)
        .set_meta("iterations", outcome.iterations)
        .set_meta("converged", outcome.converged)
        .set_meta("version", VERSION);
    if let SolverSpec::A3dmm { q, s } = spec {
        trace.set_meta("q", q).set_meta("s", s).set_meta(
            "window",
            match config.window {
                splitaccel::WindowSource::Raw => "raw",
                splitaccel::WindowSource::Anchored => "anchored",
            },
        );
    }
    if let (ProblemData::TvInpainting { .. }, Some(truth)) = (&inst.data, &inst.truth) {
        trace.set_meta("psnr", psnr(&outcome.state.x, truth));
    }
    Ok(SolverRun {
        spec: *spec,
        trace,
        outcome,
    })
}

/// Computes the reference with standard ADMM, runs the comparison set in
/// parallel, and writes traces and plots when `config.out` is set.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult, BenchError> {
    let mut instance = build_instance(&config.problem, config.seed)?;
    let gamma = resolve_gamma(config.gamma, &instance)?;
    let reference_config = SolverConfig {
        variant: Variant::Standard,
        phi: 1.0,
        ..solver_config(config, gamma)
    };
    let reference = instance.compute_reference(&reference_config)?;

    let inst = &instance;
    let reference_ref = &reference;
    let runs = thread::scope(|scope| {
        let handles: Vec<_> = config
            .solvers
            .iter()
            .map(|spec| scope.spawn(move || run_solver(spec, config, inst, gamma, reference_ref)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let result = ExperimentResult {
        instance,
        gamma,
        reference,
        runs,
    };
    if let Some(dir) = &config.out {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

/// File-name stem for a solver id, e.g. `a3dmm(6,inf)` to `a3dmm_6_inf`.
pub fn file_stem(id: &str) -> String {
    let mapped: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    mapped.trim_end_matches('_').to_string()
}

/// One CSV per solver, then plots of the distances, the residual and the angle.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir).map_err(|e| BenchError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();
    for run in &result.runs {
        let path = dir.join(format!("{}.csv", file_stem(&run.spec.id())));
        write_trace_csv(&run.trace, &path)?;
        written.push(path);
    }
    let traces: Vec<Trace> = result.runs.iter().map(|r| r.trace.clone()).collect();
    for quantity in [Quantity::DistZ, Quantity::DistX, Quantity::NormV, Quantity::CosTheta] {
        let path = dir.join(format!("{}.svg", quantity.name()));
        match emit_plot_svg(&traces, quantity, &path) {
            Ok(()) => written.push(path),
            Err(BenchError::EmptySelection { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(written)
}

/// Trajectory diagnostics of one plain run.
pub struct AngleReport {
    pub descriptor: String,
    pub gamma: f64,
    pub iterations: usize,
    pub series: AngleSeries,
    /// `cos` of the Friedrichs angle, for the two-subspace problem.
    pub friedrichs_cos: Option<f64>,
    pub trace: Trace,
}

/// Runs standard ADMM without a stopping test and classifies the angles
/// between successive differences down to the noise floor.
pub fn angle_report(config: &RunConfig) -> Result<AngleReport, BenchError> {
    let inst = build_instance(&config.problem, config.seed)?;
    let gamma = resolve_gamma(config.gamma, &inst)?;
    let problem = inst.split(gamma)?;
    let run_config = SolverConfig {
        tol: f64::MIN_POSITIVE,
        ..solver_config(config, gamma)
    };
    let spec = RunSpec {
        inner: inner_solver(&inst),
        z0: inst.initial_point(),
        ..RunSpec::new(run_config, Acceleration::None)
    };
    let mut trace = Trace::new();
    let outcome = run(&problem, &spec, &mut trace).map_err(|source| BenchError::Run {
        solver: "admm".into(),
        source,
    })?;
    trace
        .set_meta("solver", "admm")
        .set_meta("gamma", gamma)
        .set_meta("seed", config.seed)
        .set_meta("problem", &inst.descriptor)
        .set_meta("version", VERSION);
    let norms: Vec<f64> = trace.records.iter().map(|r| r.norm_v).collect();
    let floor = 1e-13 * norms.first().copied().unwrap_or(0.0);
    let values = truncate_at_noise(&trace.cos_thetas(), &norms, floor);
    let classify = ClassifyConfig::default();
    let series = match classify_trajectory(&values, &classify) {
        Ok(s) => s,
        // too short for the trailing window: classify what there is
        Err(_) => classify_trajectory(
            &values,
            &ClassifyConfig {
                window: values.iter().flatten().count().max(1),
                ..classify
            },
        )
        .unwrap_or(AngleSeries {
            values: values.clone(),
            kind: splitaccel::spectra::TrajectoryKind::Undetermined,
            limit: None,
            band: None,
        }),
    };
    let friedrichs_cos = match &inst.data {
        ProblemData::Feasibility { t1, t2 } => friedrichs_angle(t1, t2).ok().map(f64::cos),
        _ => None,
    };
    Ok(AngleReport {
        descriptor: inst.descriptor.clone(),
        gamma,
        iterations: outcome.iterations,
        series,
        friedrichs_cos,
        trace,
    })
}

/// Final iterate as an image, for problems on a pixel grid.
pub fn as_image(inst: &ProblemInstance, x: &DVector<f64>) -> Option<nalgebra::DMatrix<f64>> {
    match &inst.data {
        ProblemData::TvInpainting { shape, .. } => {
            Some(nalgebra::DMatrix::from_column_slice(shape.rows, shape.cols, x.as_slice()))
        }
        _ => None,
    }
}
