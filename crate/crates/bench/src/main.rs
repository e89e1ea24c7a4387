use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use splitaccel::problems::write_pgm;
use splitaccel::spectra::{inertial_regime_map, rotation_etas, write_regime_csv};
use splitaccel_bench::config::DEFAULT_SOLVERS;
use splitaccel_bench::harness::{angle_report, as_image, file_stem};
use splitaccel_bench::trace_csv::write_trace_csv;
use splitaccel_bench::{run_experiment, BenchError, RawConfig, RunConfig};

/// ADMM with trajectory-following extrapolation: experiments and diagnostics.
#[derive(Parser)]
#[command(name = "splitaccel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one problem and write its trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// admm, iadmm:<a>, inertial3:<a>:<b> or a3dmm[:<q>[:<s>]]
        #[arg(long)]
        solver: Option<String>,
    },
    /// Compare the solvers of a configuration against one reference solution.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Report the trajectory regime of plain ADMM.
    Angles {
        #[command(flatten)]
        common: Common,
    },
    /// Write the inertial regime map over real and rotation eigenvalues.
    Spectra {
        /// Number of inertia values in [0, 1].
        #[arg(long, default_value_t = 100)]
        a_steps: usize,
        /// Number of real eigenvalues and of rotation angles in ]0, pi/2[.
        #[arg(long, default_value_t = 100)]
        eta_steps: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// TV inpainting comparison with PSNR and reconstructed images.
    Inpaint {
        #[command(flatten)]
        common: Common,
        /// 8- or 16-bit PGM; a synthetic piecewise-constant image otherwise.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Fraction of observed pixels.
        #[arg(long)]
        density: Option<f64>,
    },
}

/// Flags shared by the problem-running subcommands; they override the config file.
#[derive(Args, Default)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// A number, 'default', 'knorm*<f>', 'knorm/<f>' or 'knorm+<f>'.
    #[arg(long)]
    gamma: Option<String>,
    /// standard, relaxed or symmetric.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    /// Extrapolation depth: a positive integer or 'inf'.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(c) => Failure::Usage(format!("invalid configuration: {c}")),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl Common {
    /// Defaults, then the config file, then flags.
    fn resolve(&self, defaults: &[(&str, &str)], extra: &[(&str, Option<String>)]) -> Result<RunConfig, Failure> {
        let mut raw = RawConfig::default();
        for (k, v) in defaults {
            raw.set(k, *v);
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let file = RawConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            raw.overlay(&file);
        }
        let flags = [
            ("problem", self.problem.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("gamma", self.gamma.clone()),
            ("variant", self.variant.clone()),
            ("q", self.q.map(|v| v.to_string())),
            ("s", self.s.clone()),
            ("tol", self.tol.map(|v| v.to_string())),
            ("max_iter", self.max_iter.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags.iter().chain(extra) {
            if let Some(v) = v {
                raw.set(k, v.clone());
            }
        }
        if !raw.contains("out") {
            raw.set("out", "out");
        }
        RunConfig::from_raw(&raw).map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn print_summary(result: &splitaccel_bench::ExperimentResult) {
    println!("problem: {}", result.instance.descriptor);
    println!("gamma: {}", result.gamma);
    println!(
        "reference: {} iterations, converged = {}",
        result.reference.iterations, result.reference.converged
    );
    for run in &result.runs {
        let to_tol = |tol: f64| {
            run.trace
                .iterations_to_dist_x(tol)
                .map_or_else(|| "-".to_string(), |k| k.to_string())
        };
        println!(
            "{:<22} iterations {:>6}  converged {:<5}  extrapolations {:>4}  k(||x - x*|| <= 1e-6) {:>6}{}",
            run.spec.id(),
            run.outcome.iterations,
            run.outcome.converged,
            run.outcome.extrapolations,
            to_tol(1e-6),
            run.trace.meta.get("psnr").map_or_else(String::new, |p| format!("  psnr {p} dB")),
        );
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve { common, solver } => {
            let default_solver = if common.q.is_some() || common.s.is_some() { "a3dmm" } else { "admm" };
            let config = common.resolve(&[("solvers", default_solver)], &[("solvers", solver)])?;
            if config.solvers.len() != 1 {
                return Err(Failure::Usage(format!(
                    "invalid configuration: solvers: solve runs one solver, got {}",
                    config.solvers.len()
                )));
            }
            let result = run_experiment(&config)?;
            print_summary(&result);
        }
        Command::Bench { common } => {
            let config = common.resolve(&[("solvers", DEFAULT_SOLVERS)], &[])?;
            let result = run_experiment(&config)?;
            print_summary(&result);
        }
        Command::Angles { common } => {
            let config = common.resolve(&[], &[])?;
            let report = angle_report(&config)?;
            println!("problem: {}", report.descriptor);
            println!("gamma: {}", report.gamma);
            println!("iterations: {}", report.iterations);
            println!("regime: {:?}", report.series.kind);
            if let Some(limit) = report.series.limit {
                println!("trailing mean cos theta: {limit}");
            }
            if let Some((lo, hi)) = report.series.band {
                println!("trailing band: [{lo}, {hi}]");
            }
            if let Some(c) = report.friedrichs_cos {
                println!("cos friedrichs angle: {c}");
            }
            let dir = config.out.expect("out has a default");
            fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            write_trace_csv(&report.trace, &dir.join("angles.csv"))?;
        }
        Command::Spectra { a_steps, eta_steps, out } => {
            if a_steps == 0 || eta_steps == 0 {
                return Err(Failure::Usage("--a-steps and --eta-steps must be positive".into()));
            }
            let a_grid: Vec<f64> = (0..=a_steps).map(|i| i as f64 / a_steps as f64).collect();
            let mut etas: Vec<Complex64> = (0..eta_steps)
                .map(|i| Complex64::new(i as f64 / eta_steps as f64, 0.0))
                .collect();
            etas.extend(rotation_etas(2 * eta_steps, eta_steps - 1));
            let rows = inertial_regime_map(&etas, &a_grid);
            fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            let mut csv = Vec::new();
            write_regime_csv(&rows, &mut csv).expect("writing to memory");
            write(&out.join("regime.csv"), csv)?;
            let accelerating = rows.iter().filter(|r| r.accelerates).count();
            println!("{} rows, {accelerating} where inertia accelerates", rows.len());
        }
        Command::Inpaint { common, image, density } => {
            let config = common.resolve(
                &[
                    ("problem", "tv"),
                    ("solvers", "admm, iadmm:0.3, a3dmm:6:100"),
                    ("max_iter", "30"),
                    ("tol", "1e-12"),
                ],
                &[
                    ("image", image.map(|p| p.display().to_string())),
                    ("density", density.map(|d| d.to_string())),
                ],
            )?;
            let result = run_experiment(&config)?;
            print_summary(&result);
            let dir = config.out.expect("out has a default");
            if let Some(truth) = &result.instance.truth {
                if let Some(img) = as_image(&result.instance, truth) {
                    write(&dir.join("truth.pgm"), write_pgm(&img))?;
                }
            }
            for run in &result.runs {
                if let Some(img) = as_image(&result.instance, &run.outcome.state.x) {
                    write(&dir.join(format!("{}.pgm", file_stem(&run.spec.id()))), write_pgm(&img))?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

