//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, keys may use `-` or `_`.
//! The same keys are accepted as command-line flags, which take precedence.
//!
//! ```text
//! problem  = lasso          # lasso | l1 | l12 | nuclear | qp | feasibility | tv | libsvm
//! seed     = 1
//! gamma    = knorm*0.1      # default | <number> | knorm*<f> | knorm+<f>
//! variant  = standard       # standard | relaxed | symmetric
//! tol      = 1e-10
//! max_iter = 2000
//! solvers  = admm, iadmm:0.3, a3dmm:6:100, a3dmm:6:inf
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use splitaccel::a3dmm::Depth;
use splitaccel::{Variant, WindowSource};
use thiserror::Error;

/// A validation failure, located by a field path such as `solvers[2]`.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Unvalidated settings keyed by normalized name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (number, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}", number + 1), format!("expected key = value, got '{content}'")))?;
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(ConfigError::new(format!("line {}", number + 1), "empty key"));
            }
            if raw.entries.contains_key(&key) {
                return Err(ConfigError::new(key, format!("set twice (again on line {})", number + 1)));
            }
            raw.entries.insert(key, value.trim().to_string());
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.entries.insert(normalize_key(key), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&normalize_key(key))
    }

    /// `other` wins on shared keys.
    pub fn overlay(&mut self, other: &RawConfig) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Lasso { m: usize, n: usize, sparsity: usize, mu: f64 },
    L1,
    L12,
    Nuclear,
    Qp { n: usize },
    Feasibility { alpha: f64 },
    Tv {
        image: Option<PathBuf>,
        size: usize,
        pieces: usize,
        density: f64,
        inner_steps: usize,
    },
    Libsvm { data: PathBuf, mu: f64 },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Lasso { .. } => "lasso",
            ProblemSpec::L1 => "l1",
            ProblemSpec::L12 => "l12",
            ProblemSpec::Nuclear => "nuclear",
            ProblemSpec::Qp { .. } => "qp",
            ProblemSpec::Feasibility { .. } => "feasibility",
            ProblemSpec::Tv { .. } => "tv",
            ProblemSpec::Libsvm { .. } => "libsvm",
        }
    }

    /// Whether `||K||` is defined for the instance.
    pub fn has_data_matrix(&self) -> bool {
        matches!(
            self,
            ProblemSpec::Lasso { .. } | ProblemSpec::Libsvm { .. } | ProblemSpec::L1 | ProblemSpec::L12 | ProblemSpec::Nuclear
        )
    }
}

/// How the penalty `gamma` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaRule {
    /// The problem's own default.
    Default,
    Absolute(f64),
    /// `factor * ||K||^2`.
    KNormScaled(f64),
    /// `||K||^2 + shift`.
    KNormShifted(f64),
}

impl FromStr for GammaRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let number = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'"));
        if s == "default" {
            Ok(GammaRule::Default)
        } else if let Some(rest) = s.strip_prefix("knorm*") {
            Ok(GammaRule::KNormScaled(number(rest)?))
        } else if let Some(rest) = s.strip_prefix("knorm/") {
            Ok(GammaRule::KNormScaled(1.0 / number(rest)?))
        } else if let Some(rest) = s.strip_prefix("knorm+") {
            Ok(GammaRule::KNormShifted(number(rest)?))
        } else if s == "knorm" {
            Ok(GammaRule::KNormScaled(1.0))
        } else {
            number(s)
                .map(GammaRule::Absolute)
                .map_err(|_| format!("expected 'default', a number, 'knorm*<f>', 'knorm/<f>' or 'knorm+<f>', got '{s}'"))
        }
    }
}

impl fmt::Display for GammaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaRule::Default => f.write_str("default"),
            GammaRule::Absolute(g) => write!(f, "{g}"),
            GammaRule::KNormScaled(c) => write!(f, "knorm*{c}"),
            GammaRule::KNormShifted(c) => write!(f, "knorm+{c}"),
        }
    }
}

/// One entry of the comparison set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverSpec {
    Admm,
    /// One-step inertia `a`.
    Inertial { a: f64 },
    /// Two-step inertia `(a, b)`.
    Inertial3 { a: f64, b: f64 },
    A3dmm { q: usize, s: Depth },
}

impl SolverSpec {
    /// Display name, also used for file names and plot legends.
    pub fn id(&self) -> String {
        match self {
            SolverSpec::Admm => "admm".into(),
            SolverSpec::Inertial { a } => format!("iadmm({a})"),
            SolverSpec::Inertial3 { a, b } => format!("inertial3({a},{b})"),
            SolverSpec::A3dmm { q, s } => format!("a3dmm({q},{s})"),
        }
    }

    /// Parses `admm`, `iadmm:a`, `inertial3:a:b` or `a3dmm[:q[:s]]`, with
    /// missing `q` and `s` taken from the defaults.
    pub fn parse(text: &str, default_q: usize, default_s: Depth) -> Result<Self, String> {
        let parts: Vec<&str> = text.trim().split(':').map(str::trim).collect();
        let float = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad coefficient '{t}'"))
        };
        let spec = match parts.as_slice() {
            ["admm"] => SolverSpec::Admm,
            ["iadmm", a] => SolverSpec::Inertial { a: float(a)? },
            ["inertial3", a, b] => SolverSpec::Inertial3 {
                a: float(a)?,
                b: float(b)?,
            },
            ["a3dmm"] => SolverSpec::A3dmm { q: default_q, s: default_s },
            ["a3dmm", q] => SolverSpec::A3dmm {
                q: q.parse().map_err(|_| format!("bad q '{q}'"))?,
                s: default_s,
            },
            ["a3dmm", q, s] => SolverSpec::A3dmm {
                q: q.parse().map_err(|_| format!("bad q '{q}'"))?,
                s: s.parse()?,
            },
            _ => {
                return Err(format!(
                    "expected admm, iadmm:<a>, inertial3:<a>:<b> or a3dmm[:<q>[:<s>]], got '{}'",
                    text.trim()
                ))
            }
        };
        match spec {
            SolverSpec::A3dmm { q: 0, .. } => Err("q must be at least 1".into()),
            SolverSpec::Inertial { a } if a < 0.0 => Err(format!("inertia {a} must be non-negative")),
            _ => Ok(spec),
        }
    }
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub seed: u64,
    pub gamma: GammaRule,
    pub variant: Variant,
    pub phi: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub q: usize,
    pub s: Depth,
    pub window: WindowSource,
    /// Keep the default extrapolation safeguard.
    pub safeguard: bool,
    pub solvers: Vec<SolverSpec>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_raw(&RawConfig::default()).expect("defaults are valid")
    }
}

/// Default comparison set: plain, inertial and both extrapolation depths.
pub const DEFAULT_SOLVERS: &str = "admm, iadmm:0.3, a3dmm:6:100, a3dmm:6:inf";

const COMMON_KEYS: &[&str] = &[
    "problem", "seed", "gamma", "variant", "phi", "tol", "max_iter", "q", "s", "window", "safeguard", "solvers", "out",
];

fn problem_keys(problem: &str) -> &'static [&'static str] {
    match problem {
        "lasso" => &["m", "n", "sparsity", "mu"],
        "qp" => &["n"],
        "feasibility" => &["alpha"],
        "tv" => &["image", "size", "pieces", "density", "inner_steps"],
        "libsvm" => &["data", "mu"],
        _ => &[],
    }
}

/// `pi/4`, `45deg` or a plain number of radians.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let bad = || format!("expected radians, 'pi/<n>', '<k>pi/<n>' or '<d>deg', got '{t}'");
    if let Some(deg) = t.strip_suffix("deg") {
        return deg.trim().parse::<f64>().map(f64::to_radians).map_err(|_| bad());
    }
    if let Some((num, den)) = t.split_once("pi/") {
        let k = if num.trim().is_empty() { 1.0 } else { num.trim().parse::<f64>().map_err(|_| bad())? };
        let d = den.trim().parse::<f64>().map_err(|_| bad())?;
        return Ok(k * PI / d);
    }
    if t == "pi" {
        return Ok(PI);
    }
    t.parse::<f64>().map_err(|_| bad())
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn value<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        match self.raw.get(key) {
            None => Ok(default),
            Some(text) => parse(text).map_err(|m| ConfigError::new(key, m)),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value(key, default, |t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
    }

    fn positive(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = self.parsed(key, default)?;
        if v == 0 {
            return Err(ConfigError::new(key, "must be at least 1"));
        }
        Ok(v)
    }

    fn finite_positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parsed(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError::new(key, format!("{v} must be positive and finite")));
        }
        Ok(v)
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader { raw };
        let problem_name = raw.get("problem").unwrap_or("lasso").to_string();
        let allowed = problem_keys(&problem_name);
        for key in raw.keys() {
            if !COMMON_KEYS.contains(&key) && !allowed.contains(&key) {
                let known_elsewhere = ["lasso", "qp", "feasibility", "tv", "libsvm"]
                    .iter()
                    .any(|p| problem_keys(p).contains(&key));
                let message = if known_elsewhere {
                    format!("not used by problem '{problem_name}'")
                } else {
                    "unknown key".to_string()
                };
                return Err(ConfigError::new(key, message));
            }
        }

        let problem = match problem_name.as_str() {
            "lasso" => ProblemSpec::Lasso {
                m: r.positive("m", 64)?,
                n: r.positive("n", 256)?,
                sparsity: r.positive("sparsity", 13)?,
                mu: r.finite_positive("mu", 1.0)?,
            },
            "l1" => ProblemSpec::L1,
            "l12" => ProblemSpec::L12,
            "nuclear" => ProblemSpec::Nuclear,
            "qp" => ProblemSpec::Qp {
                n: r.positive("n", splitaccel::problems::QP_DESK_N)?,
            },
            "feasibility" => {
                let alpha = r.value("alpha", PI / 4.0, parse_angle)?;
                if !(alpha > 0.0 && alpha <= PI / 2.0) {
                    return Err(ConfigError::new("alpha", format!("{alpha} outside ]0, pi/2]")));
                }
                ProblemSpec::Feasibility { alpha }
            }
            "tv" => {
                let density = r.parsed("density", 0.5)?;
                if !(density > 0.0 && density <= 1.0) {
                    return Err(ConfigError::new("density", format!("{density} outside ]0, 1]")));
                }
                ProblemSpec::Tv {
                    image: raw.get("image").map(PathBuf::from),
                    size: r.positive("size", 64)?,
                    pieces: r.parsed("pieces", 8)?,
                    density,
                    inner_steps: r.positive("inner_steps", splitaccel::problems::TV_INNER.max_inner_steps)?,
                }
            }
            "libsvm" => ProblemSpec::Libsvm {
                data: raw
                    .get("data")
                    .map(PathBuf::from)
                    .ok_or_else(|| ConfigError::new("data", "required for problem 'libsvm'"))?,
                mu: r.finite_positive("mu", 1.0)?,
            },
            other => {
                return Err(ConfigError::new(
                    "problem",
                    format!("unknown problem '{other}' (lasso, l1, l12, nuclear, qp, feasibility, tv, libsvm)"),
                ))
            }
        };

        let gamma: GammaRule = r.parsed("gamma", GammaRule::Default)?;
        match gamma {
            GammaRule::Absolute(g) | GammaRule::KNormScaled(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(ConfigError::new("gamma", format!("{gamma} must be positive")));
            }
            GammaRule::KNormShifted(c) if !c.is_finite() => {
                return Err(ConfigError::new("gamma", format!("{gamma} is not finite")));
            }
            GammaRule::KNormScaled(_) | GammaRule::KNormShifted(_) if !problem.has_data_matrix() => {
                return Err(ConfigError::new(
                    "gamma",
                    format!("problem '{problem_name}' has no data matrix for a ||K||-relative rule"),
                ));
            }
            _ => {}
        }

        let variant: Variant = r.parsed("variant", Variant::Standard)?;
        let phi = r.parsed("phi", 1.0)?;
        if variant == Variant::Relaxed && !(phi > 0.0 && phi < 2.0) {
            return Err(ConfigError::new("phi", format!("{phi} outside ]0, 2[ for the relaxed variant")));
        }
        let tol = r.finite_positive("tol", 1e-10)?;
        let max_iter = r.positive("max_iter", 2000)?;
        let q = r.positive("q", 6)?;
        let s: Depth = r.parsed("s", Depth::Infinite)?;
        let window: WindowSource = r.parsed("window", WindowSource::Raw)?;
        let safeguard = r.value("safeguard", true, |t| match t {
            "on" | "true" | "yes" => Ok(true),
            "off" | "false" | "no" => Ok(false),
            _ => Err(format!("expected on or off, got '{t}'")),
        })?;

        let list = raw.get("solvers").unwrap_or(DEFAULT_SOLVERS);
        let entries: Vec<&str> = list.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        if entries.is_empty() {
            return Err(ConfigError::new("solvers", "comparison set is empty"));
        }
        let mut solvers = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            let spec = SolverSpec::parse(entry, q, s).map_err(|m| ConfigError::new(format!("solvers[{i}]"), m))?;
            if solvers.iter().any(|other: &SolverSpec| other.id() == spec.id()) {
                return Err(ConfigError::new(format!("solvers[{i}]"), format!("duplicate solver {}", spec.id())));
            }
            solvers.push(spec);
        }

        Ok(RunConfig {
            problem,
            seed: r.parsed("seed", 1)?,
            gamma,
            variant,
            phi,
            tol,
            max_iter,
            q,
            s,
            window,
            safeguard,
            solvers,
            out: raw.get("out").map(PathBuf::from),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.problem.name(), "lasso");
        assert_eq!(c.solvers.len(), 4);
        assert_eq!(c.solvers[3], SolverSpec::A3dmm { q: 6, s: Depth::Infinite });
        assert_eq!(c.gamma, GammaRule::Default);
    }

    #[test]
    fn parses_comments_and_dashes() {
        let c = RunConfig::parse("# header\nproblem = feasibility\nalpha = pi/3 # angle\nmax-iter = 50\n").unwrap();
        assert_eq!(c.max_iter, 50);
        match c.problem {
            ProblemSpec::Feasibility { alpha } => assert!((alpha - PI / 3.0).abs() < 1e-15),
            _ => panic!("wrong problem"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        let err = RunConfig::parse("solvers = admm, a3dmm:0:inf").unwrap_err();
        assert_eq!(err.path, "solvers[1]");
        let err = RunConfig::parse("solvers = ").unwrap_err();
        assert_eq!(err.path, "solvers");
        let err = RunConfig::parse("problem = qp\nalpha = 1").unwrap_err();
        assert_eq!(err, ConfigError::new("alpha", "not used by problem 'qp'"));
        let err = RunConfig::parse("bogus = 1").unwrap_err();
        assert_eq!(err.path, "bogus");
        let err = RunConfig::parse("problem = qp\ngamma = knorm*0.1").unwrap_err();
        assert_eq!(err.path, "gamma");
        let err = RunConfig::parse("tol = 1\ntol = 2").unwrap_err();
        assert_eq!(err.path, "tol");
        let err = RunConfig::parse("just text").unwrap_err();
        assert_eq!(err.path, "line 1");
    }

    #[test]
    fn solver_specs() {
        let p = |t| SolverSpec::parse(t, 4, Depth::Finite(10));
        assert_eq!(p("a3dmm").unwrap(), SolverSpec::A3dmm { q: 4, s: Depth::Finite(10) });
        assert_eq!(p("a3dmm:6:inf").unwrap(), SolverSpec::A3dmm { q: 6, s: Depth::Infinite });
        assert_eq!(p("inertial3:0.4:-0.2").unwrap(), SolverSpec::Inertial3 { a: 0.4, b: -0.2 });
        assert_eq!(p("iadmm:0.3").unwrap().id(), "iadmm(0.3)");
        assert!(p("iadmm").is_err());
        assert!(p("a3dmm:6:0").is_err());
    }

    #[test]
    fn gamma_rules() {
        assert_eq!("knorm/10".parse::<GammaRule>().unwrap(), GammaRule::KNormScaled(0.1));
        assert_eq!("knorm+0.1".parse::<GammaRule>().unwrap(), GammaRule::KNormShifted(0.1));
        assert_eq!("2.5".parse::<GammaRule>().unwrap(), GammaRule::Absolute(2.5));
        assert!("fast".parse::<GammaRule>().is_err());
    }

    #[test]
    fn angles() {
        assert!((parse_angle("45deg").unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((parse_angle("2pi/5").unwrap() - 2.0 * PI / 5.0).abs() < 1e-15);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
    }

    #[test]
    fn overlay_prefers_the_top_layer() {
        let mut base = RawConfig::parse("tol = 1e-6\nseed = 3").unwrap();
        let mut top = RawConfig::default();
        top.set("tol", "1e-9");
        base.overlay(&top);
        let c = RunConfig::from_raw(&base).unwrap();
        assert_eq!((c.tol, c.seed), (1e-9, 3));
    }
}
