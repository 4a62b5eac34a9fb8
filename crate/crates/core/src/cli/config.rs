//! Run configuration: a TOML document with sections `kernel`, `potential`,
//! `grid`, `problem`, `method` and `output`, plus a top-level `seed`.
//!
//! Unknown keys are rejected, every default is filled in, and the resolved
//! spec is what reports embed.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::grid::{Field, SpatialGrid};
use crate::kernel::{lagrangian_to_kernel, SignConvention, SymbolTerm, TabulatedKernel, TransitionKernel};
use crate::potential::Potential;
use crate::propagate::SplittingScheme;
use crate::transport::TransportMethod;
use crate::wiener_mc::{Monotonicity, PathFunctional};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// The document is not valid TOML.
    Parse(String),
    /// A key is unknown or a value breaks a precondition.
    Validation { path: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "config syntax error: {m}"),
            ConfigError::Validation { path, message } => write!(f, "invalid config at `{path}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn bad(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub problem: ProblemSpec,
    pub method: MethodSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Heat {
        #[serde(default = "one")]
        d: f64,
    },
    Ou {
        theta: f64,
        sigma: f64,
    },
    /// Symbol terms `(order, coeff)` of `sigma(ik) = sum coeff (ik)^order`.
    Spectral {
        terms: Vec<(u32, f64)>,
    },
    /// Lagrangian velocity terms mapped through a sign convention.
    Lagrangian {
        terms: Vec<(u32, f64)>,
        #[serde(default)]
        convention: SignConvention,
    },
    /// Samples of `source` on the run grid at `times`, optionally perturbed.
    Tabulated {
        source: Box<KernelSpec>,
        times: Vec<f64>,
        #[serde(default)]
        perturb: Vec<Perturbation>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant {
        c: f64,
    },
    Harmonic {
        #[serde(default = "one")]
        omega: f64,
    },
    Linear {
        slope: f64,
    },
    Table {
        x: Vec<f64>,
        v: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    pub t: f64,
    /// Field file (CSV `x,re,im` or JSON) used instead of the delta at `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Trotter,
    Volterra,
    Dyson,
    Mc,
    Cn,
    Compare,
    VerifyKernel,
    SamplePaths,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Trotter => "trotter",
            Method::Volterra => "volterra",
            Method::Dyson => "dyson",
            Method::Mc => "mc",
            Method::Cn => "cn",
            Method::Compare => "compare",
            Method::VerifyKernel => "verify-kernel",
            Method::SamplePaths => "sample-paths",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportChoice {
    #[default]
    Auto,
    Spectral,
    Direct,
}

impl TransportChoice {
    pub fn method(self, kernel: &TransitionKernel) -> TransportMethod {
        match self {
            TransportChoice::Spectral => TransportMethod::Spectral,
            TransportChoice::Direct => TransportMethod::Direct,
            TransportChoice::Auto if kernel.has_symbol() => TransportMethod::Spectral,
            TransportChoice::Auto => TransportMethod::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalChoice {
    /// `exp(-s)`
    #[default]
    ExpNeg,
    /// `1`
    One,
    /// `s`
    Identity,
}

impl FunctionalChoice {
    pub fn functional(self) -> PathFunctional {
        match self {
            FunctionalChoice::ExpNeg => PathFunctional::exp_neg(),
            FunctionalChoice::One => PathFunctional::one(),
            FunctionalChoice::Identity => PathFunctional::new(|s| s, Monotonicity::Increasing),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// Dyson segment count, or `"auto"`: the smallest divisor of `method.steps`
/// with `tau sup|V| <= 1` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segments {
    Count(usize),
    Auto(AutoTag),
}

impl Default for Segments {
    fn default() -> Self {
        Segments::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: Method,
    /// Time slices `N` (trotter).
    #[serde(default = "d_slices")]
    pub slices: usize,
    #[serde(default = "d_scheme")]
    pub scheme: SplittingScheme,
    /// Time steps `M` (volterra, cn, mc, sample-paths). For dyson this is
    /// the total over all segments.
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_order")]
    pub order: usize,
    #[serde(default)]
    pub segments: Segments,
    #[serde(default = "d_paths")]
    pub n_paths: usize,
    /// Action bins for trotter with a functional other than `exp_neg`.
    #[serde(default = "d_bins")]
    pub bins: usize,
    #[serde(default)]
    pub functional: FunctionalChoice,
    #[serde(default)]
    pub transport: TransportChoice,
    #[serde(default = "d_budget")]
    pub truncation_budget: f64,
    /// Implicit-Euler start steps for cn with delta data.
    #[serde(default = "d_rannacher")]
    pub rannacher_steps: usize,
    /// Also run the volterra residual check.
    #[serde(default)]
    pub residual: bool,
    #[serde(default = "d_ck_tol")]
    pub ck_tolerance: f64,
    /// Split point `s` of the Chapman–Kolmogorov check; `t / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ck_s: Option<f64>,
    #[serde(default = "d_norm_tol")]
    pub normalization_tolerance: f64,
    #[serde(default = "d_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "d_delta_tol")]
    pub delta_tolerance: f64,
    /// Relative L2 tolerance between deterministic fields in compare.
    #[serde(default = "d_field_tol")]
    pub field_tolerance: f64,
    /// Allowed `|mc - volterra|` in standard errors in compare.
    #[serde(default = "d_sigmas")]
    pub mc_sigmas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Fields are embedded in `report.json`.
    #[default]
    Json,
    /// Fields are written as CSV next to `report.json`.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: d_dir(),
            format: OutputFormat::default(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn d_slices() -> usize {
    512
}
fn d_scheme() -> SplittingScheme {
    SplittingScheme::Strang
}
fn d_steps() -> usize {
    256
}
fn d_order() -> usize {
    10
}
fn d_paths() -> usize {
    100_000
}
fn d_bins() -> usize {
    512
}
fn d_budget() -> f64 {
    crate::kernel::DEFAULT_TRUNCATION_BUDGET
}
fn d_rannacher() -> usize {
    2
}
fn d_ck_tol() -> f64 {
    1e-8
}
fn d_norm_tol() -> f64 {
    1e-10
}
fn d_deltas() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}
fn d_delta_tol() -> f64 {
    1e-2
}
fn d_field_tol() -> f64 {
    1e-3
}
fn d_sigmas() -> f64 {
    3.0
}
fn d_dir() -> PathBuf {
    PathBuf::from("fmeasure-out")
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
    let spec: RunSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let parent = e.path().to_string();
        let message = e.inner().message().to_string();
        let path = match unknown_field(&message) {
            Some(key) if parent == key || parent.ends_with(&format!(".{key}")) => parent,
            Some(key) if parent == "." || parent.is_empty() => key.to_string(),
            Some(key) => format!("{parent}.{key}"),
            None => parent,
        };
        bad(&path, message)
    })?;
    spec.validate()?;
    Ok(spec)
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be finite, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(path, format!("must be >= {min}, got {v}")))
    }
}

impl KernelSpec {
    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        match self {
            KernelSpec::Heat { d } => positive(&format!("{path}.d"), *d),
            KernelSpec::Ou { theta, sigma } => {
                positive(&format!("{path}.theta"), *theta)?;
                positive(&format!("{path}.sigma"), *sigma)
            }
            KernelSpec::Spectral { terms } | KernelSpec::Lagrangian { terms, .. } => {
                if terms.is_empty() {
                    return Err(bad(&format!("{path}.terms"), "needs at least one term"));
                }
                for (i, (_, c)) in terms.iter().enumerate() {
                    finite(&format!("{path}.terms[{i}]"), *c)?;
                }
                Ok(())
            }
            KernelSpec::Tabulated { source, times, .. } => {
                if matches!(**source, KernelSpec::Tabulated { .. }) {
                    return Err(bad(&format!("{path}.source"), "cannot itself be tabulated"));
                }
                source.validate(&format!("{path}.source"))?;
                if times.is_empty() {
                    return Err(bad(&format!("{path}.times"), "needs at least one time"));
                }
                for (i, t) in times.iter().enumerate() {
                    positive(&format!("{path}.times[{i}]"), *t)?;
                }
                Ok(())
            }
        }
    }

    /// Builds the kernel; tabulated kernels are sampled on `grid`.
    pub fn build(&self, grid: &SpatialGrid) -> crate::Result<TransitionKernel> {
        match self {
            KernelSpec::Heat { d } => TransitionKernel::heat(*d),
            KernelSpec::Ou { theta, sigma } => TransitionKernel::ornstein_uhlenbeck(*theta, *sigma),
            KernelSpec::Spectral { terms } => {
                TransitionKernel::spectral(terms.iter().map(|&(n, c)| SymbolTerm::new(n, c)).collect())
            }
            KernelSpec::Lagrangian { terms, convention } => lagrangian_to_kernel(terms, *convention),
            KernelSpec::Tabulated { source, times, perturb } => {
                let src = source.build(grid)?;
                let mut tab = TabulatedKernel::sample(&src, *grid, times)?;
                for p in perturb {
                    tab.perturb(p.t, p.x, p.y, p.amount)?;
                }
                Ok(TransitionKernel::tabulated(tab))
            }
        }
    }

    pub fn heat_d(&self) -> Option<f64> {
        match self {
            KernelSpec::Heat { d } => Some(*d),
            _ => None,
        }
    }
}

impl PotentialSpec {
    pub fn build(&self) -> crate::Result<Potential> {
        Ok(match self {
            PotentialSpec::Zero => Potential::zero(),
            PotentialSpec::Constant { c } => Potential::constant(*c),
            PotentialSpec::Harmonic { omega } => Potential::harmonic(*omega),
            PotentialSpec::Linear { slope } => Potential::linear(*slope),
            PotentialSpec::Table { x, v } => Potential::table(x.clone(), v.clone())?,
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Constant { c } => finite("potential.c", *c),
            PotentialSpec::Harmonic { omega } => finite("potential.omega", *omega),
            PotentialSpec::Linear { slope } => finite("potential.slope", *slope),
            PotentialSpec::Table { .. } => self.build().map(|_| ()).map_err(|e| bad("potential", e.to_string())),
        }
    }
}

impl RunSpec {
    pub fn grid(&self) -> SpatialGrid {
        SpatialGrid::new(self.grid.a, self.grid.b, self.grid.n).expect("validated grid")
    }

    /// Loads `problem.initial`, if any, and checks it lives on the run grid.
    pub fn initial_field(&self) -> Result<Option<Field>, ConfigError> {
        let Some(path) = &self.problem.initial else {
            return Ok(None);
        };
        let f = Field::load(path).map_err(|e| bad("problem.initial", e.to_string()))?;
        if f.grid() != &self.grid() {
            return Err(bad("problem.initial", "field grid differs from the run grid"));
        }
        Ok(Some(f))
    }

    fn check_segments(&self) -> Result<(), ConfigError> {
        if let Segments::Count(c) = self.method.segments {
            at_least("method.segments", c, 1)?;
            if !self.method.steps.is_multiple_of(c) {
                return Err(bad(
                    "method.segments",
                    format!("must divide method.steps = {}", self.method.steps),
                ));
            }
        }
        Ok(())
    }

    /// Resolved Dyson segment count.
    pub fn segments(&self, v: &Potential) -> crate::Result<usize> {
        let steps = self.method.steps;
        Ok(match self.method.segments {
            Segments::Count(c) => c,
            Segments::Auto(_) => {
                let min = crate::dyson::auto_segments(self.problem.t, v, &self.grid())?;
                (min..=steps).find(|s| steps.is_multiple_of(*s)).unwrap_or(steps)
            }
        })
    }

    /// Checks every precondition of the dispatched method.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        finite("grid.a", g.a)?;
        finite("grid.b", g.b)?;
        at_least("grid.n", g.n, 2)?;
        if !(g.b > g.a) {
            return Err(bad("grid.b", format!("must exceed grid.a = {}", g.a)));
        }
        let grid = self.grid();
        self.kernel.validate("kernel")?;
        self.potential.validate()?;
        let p = &self.problem;
        positive("problem.t", p.t)?;
        finite("problem.x", p.x)?;
        finite("problem.y", p.y)?;

        let m = &self.method;
        positive("method.truncation_budget", m.truncation_budget)?;
        let on_grid = |path: &str, v: f64| -> Result<(), ConfigError> {
            grid.index_of(v)
                .map(|_| ())
                .ok_or_else(|| bad(path, format!("{v} is not a grid node")))
        };
        let needs_heat = |what: &str| -> Result<(), ConfigError> {
            if self.kernel.heat_d().is_some() {
                Ok(())
            } else {
                Err(bad("kernel.kind", format!("{what} requires kind = \"heat\"")))
            }
        };
        if p.initial.is_some() && !matches!(m.name, Method::Trotter | Method::Cn | Method::Dyson) {
            return Err(bad(
                "problem.initial",
                format!("not supported by method {}", m.name.name()),
            ));
        }
        match m.name {
            Method::Trotter => {
                at_least("method.slices", m.slices, 1)?;
                on_grid("problem.x", p.x)?;
                if p.initial.is_none() {
                    on_grid("problem.y", p.y)?;
                }
                if m.functional != FunctionalChoice::ExpNeg {
                    at_least("method.bins", m.bins, 2)?;
                    if p.initial.is_some() {
                        return Err(bad("method.functional", "general functionals need delta data"));
                    }
                }
            }
            Method::Volterra => {
                at_least("method.steps", m.steps, 1)?;
                on_grid("problem.x", p.x)?;
                on_grid("problem.y", p.y)?;
            }
            Method::Dyson => {
                at_least("method.steps", m.steps, 1)?;
                on_grid("problem.x", p.x)?;
                if p.initial.is_none() {
                    on_grid("problem.y", p.y)?;
                }
                self.check_segments()?;
            }
            Method::Cn => {
                needs_heat("method cn")?;
                at_least("method.steps", m.steps, 1)?;
                at_least("grid.n", g.n, 3)?;
                on_grid("problem.x", p.x)?;
                if p.initial.is_none() {
                    on_grid("problem.y", p.y)?;
                }
            }
            Method::Mc => {
                needs_heat("method mc")?;
                at_least("method.steps", m.steps, 1)?;
                at_least("method.n_paths", m.n_paths, 2)?;
            }
            Method::SamplePaths => {
                needs_heat("method sample-paths")?;
                at_least("method.steps", m.steps, 1)?;
                at_least("method.n_paths", m.n_paths, 1)?;
            }
            Method::Compare => {
                needs_heat("method compare")?;
                at_least("method.slices", m.slices, 1)?;
                at_least("method.steps", m.steps, 1)?;
                at_least("method.n_paths", m.n_paths, 2)?;
                at_least("grid.n", g.n, 3)?;
                on_grid("problem.x", p.x)?;
                on_grid("problem.y", p.y)?;
                self.check_segments()?;
                if m.functional != FunctionalChoice::ExpNeg {
                    return Err(bad("method.functional", "compare uses exp_neg"));
                }
                positive("method.field_tolerance", m.field_tolerance)?;
                positive("method.mc_sigmas", m.mc_sigmas)?;
            }
            Method::VerifyKernel => {
                positive("method.ck_tolerance", m.ck_tolerance)?;
                positive("method.normalization_tolerance", m.normalization_tolerance)?;
                positive("method.delta_tolerance", m.delta_tolerance)?;
                if let Some(s) = m.ck_s {
                    positive("method.ck_s", s)?;
                    if s >= p.t {
                        return Err(bad("method.ck_s", format!("must be < problem.t = {}", p.t)));
                    }
                }
                if m.deltas.is_empty() {
                    return Err(bad("method.deltas", "needs at least one delta"));
                }
                if m.deltas.iter().any(|d| !(*d > 0.0)) || m.deltas.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(bad("method.deltas", "must be positive and strictly decreasing"));
                }
                on_grid("problem.x", p.x)?;
                if let KernelSpec::Tabulated { times, .. } = &self.kernel {
                    let s = m.ck_s.unwrap_or(p.t / 2.0);
                    for (path, need) in [("problem.t", p.t), ("method.ck_s", s), ("method.ck_s", p.t - s)] {
                        if !times.iter().any(|t| (t - need).abs() <= 1e-12 * t.abs()) {
                            return Err(bad(path, format!("tabulated kernel has no sample at t = {need}")));
                        }
                    }
                }
            }
        }
        if let KernelSpec::Tabulated { perturb, times, .. } = &self.kernel {
            for (i, q) in perturb.iter().enumerate() {
                let path = format!("kernel.perturb[{i}]");
                on_grid(&format!("{path}.x"), q.x)?;
                on_grid(&format!("{path}.y"), q.y)?;
                finite(&format!("{path}.amount"), q.amount)?;
                if !times.iter().any(|t| (t - q.t).abs() <= 1e-12 * t.abs()) {
                    return Err(bad(&format!("{path}.t"), "is not one of kernel.times"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[kernel]
kind = "heat"

[potential]
kind = "harmonic"

[grid]
a = -12.0
b = 12.0
n = 1025

[problem]
t = 1.0

[method]
name = "trotter"
"#;

    #[test]
    fn minimal_document_fills_defaults() {
        let s = parse_config(MINIMAL).unwrap();
        assert_eq!(s.kernel, KernelSpec::Heat { d: 1.0 });
        assert_eq!(s.potential, PotentialSpec::Harmonic { omega: 1.0 });
        assert_eq!(s.method.slices, 512);
        assert_eq!(s.method.scheme, SplittingScheme::Strang);
        assert_eq!(s.method.segments, Segments::Auto(AutoTag::Auto));
        assert_eq!(s.seed, 0);
        assert_eq!(s.output.format, OutputFormat::Json);
        let text = toml::to_string(&s).unwrap();
        assert_eq!(parse_config(&text).unwrap(), s);
    }

    #[test]
    fn grid_of_one_point_names_the_key() {
        let doc = MINIMAL.replace("n = 1025", "n = 1");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Validation { path, message } => {
                assert_eq!(path, "grid.n");
                assert!(message.contains(">= 2"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_top_level_key() {
        let doc = format!("{MINIMAL}\n[kernell]\nkind = \"heat\"\n");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Validation { path, .. } => assert_eq!(path, "kernell"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_nested_key() {
        let doc = MINIMAL.replace("n = 1025", "n = 1025\nnn = 3");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Validation { path, .. } => assert_eq!(path, "grid.nn"),
            e => panic!("{e:?}"),
        }
        let doc = MINIMAL.replace("kind = \"heat\"", "kind = \"heat\"\ndiffusion = 2.0");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Validation { path, .. } => assert_eq!(path, "kernel.diffusion"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn syntax_error() {
        assert!(matches!(parse_config("[grid"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn semantic_checks() {
        let off_grid = MINIMAL.replace("t = 1.0", "t = 1.0\nx = 0.01");
        assert!(matches!(parse_config(&off_grid), Err(ConfigError::Validation { path, .. }) if path == "problem.x"));
        let neg_t = MINIMAL.replace("t = 1.0", "t = -1.0");
        assert!(matches!(parse_config(&neg_t), Err(ConfigError::Validation { path, .. }) if path == "problem.t"));
        let mc_ou = MINIMAL
            .replace("kind = \"heat\"", "kind = \"ou\"\ntheta = 1.0\nsigma = 1.0")
            .replace("name = \"trotter\"", "name = \"mc\"");
        assert!(matches!(parse_config(&mc_ou), Err(ConfigError::Validation { path, .. }) if path == "kernel.kind"));
        let deltas = MINIMAL.replace("name = \"trotter\"", "name = \"verify-kernel\"\ndeltas = [0.1, 0.2]");
        assert!(matches!(parse_config(&deltas), Err(ConfigError::Validation { path, .. }) if path == "method.deltas"));
    }

    #[test]
    fn kernel_variants_parse_and_build() {
        let g = SpatialGrid::new(-4.0, 4.0, 33).unwrap();
        let doc = MINIMAL.replace(
            "kind = \"heat\"\n",
            "kind = \"lagrangian\"\nterms = [[2, 1.0]]\nconvention = \"dissipative\"\n",
        );
        let s = parse_config(&doc).unwrap();
        assert!(s.kernel.build(&g).is_ok());
        let doc = MINIMAL.replace(
            "kind = \"heat\"\n",
            "kind = \"tabulated\"\ntimes = [0.5, 1.0]\nsource = { kind = \"heat\", d = 1.0 }\nperturb = [{ t = 1.0, x = 0.0, y = 0.0, amount = 0.01 }]\n",
        );
        let s = parse_config(&doc).unwrap();
        assert!(s.kernel.build(&SpatialGrid::new(-12.0, 12.0, 65).unwrap()).is_ok());
    }

    #[test]
    fn explicit_segment_count() {
        let doc = MINIMAL.replace("name = \"trotter\"", "name = \"dyson\"\nsegments = 4");
        assert_eq!(parse_config(&doc).unwrap().method.segments, Segments::Count(4));
        let doc = MINIMAL.replace("name = \"trotter\"", "name = \"dyson\"\nsegments = \"auto\"");
        assert_eq!(
            parse_config(&doc).unwrap().method.segments,
            Segments::Auto(AutoTag::Auto)
        );
    }
}
