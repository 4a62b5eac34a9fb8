//! Dispatch of a validated [`RunSpec`] and report writing.
//!
//! Every run writes `report.json` into the output directory with the keys
//! `metadata`, `spec`, `seed`, `method`, `diagnostics` and `payload`. Only
//! `metadata.timestamp` varies between identical runs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde_json::{json, Value};

use super::config::{ConfigError, KernelSpec, Method, OutputFormat, RunSpec};
use crate::dyson::{dyson_series_from, dyson_sum_segmented_from, scattering_report, write_scattering_csv};
use crate::grid::Field;
use crate::kernel::{
    check_chapman_kolmogorov_with_budget, check_delta_limit_at, check_normalization, KernelKind, TransitionKernel,
};
use crate::oracles::{crank_nicolson_with, CrankNicolsonOptions};
use crate::potential::Potential;
use crate::propagate::{trotter_propagate_with, ActionHistogram, SliceSchedule};
use crate::transport::Transport;
use crate::volterra::{residual_check, volterra_solve_with};
use crate::wiener_mc::{mc_functional, sample_paths, write_paths_csv};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric(crate::Error),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numeric(_) | RunError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numeric(e) => write!(f, "numeric failure: {e}"),
            RunError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report_path: PathBuf,
    pub report: Value,
    /// Names of failed verification checks; nonempty means exit 3.
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

struct Ctx<'a> {
    spec: &'a RunSpec,
    dir: &'a Path,
    quiet: bool,
}

impl Ctx<'_> {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("fmeasure: {msg}");
        }
    }

    /// Field payload: inline values for json output, a CSV file for csv.
    fn field(&self, name: &str, field: &Field) -> Result<Value, RunError> {
        let x = self.spec.problem.x;
        let at = field.interpolate(x);
        let mut out = json!({
            "l1_norm": field.l1_norm(),
            "value_at_x": complex(at),
        });
        match self.spec.output.format {
            OutputFormat::Json => {
                out["field"] = serde_json::to_value(field).expect("field serializes");
            }
            OutputFormat::Csv => {
                let file = format!("{name}.csv");
                field.write_csv(BufWriter::new(File::create(self.dir.join(&file))?))?;
                out["csv"] = json!(file);
            }
        }
        Ok(out)
    }
}

fn complex(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Runs `spec`, writing artifacts and `report.json` to `spec.output.dir`.
pub fn run(spec: &RunSpec, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    spec.validate()?;
    let dir = spec.output.dir.as_path();
    fs::create_dir_all(dir)?;
    let ctx = Ctx {
        spec,
        dir,
        quiet: opts.quiet,
    };
    ctx.progress(&format!("running {}", spec.method.name.name()));
    let (diagnostics, payload, failures) = match spec.method.name {
        Method::Trotter => trotter(&ctx)?,
        Method::Volterra => volterra(&ctx)?,
        Method::Dyson => dyson(&ctx)?,
        Method::Mc => mc(&ctx)?,
        Method::Cn => cn(&ctx)?,
        Method::Compare => compare(&ctx)?,
        Method::VerifyKernel => verify_kernel(&ctx)?,
        Method::SamplePaths => paths(&ctx)?,
    };
    let report = json!({
        "metadata": {
            "timestamp": timestamp(),
            "tool": "fmeasure",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "spec": serde_json::to_value(spec).expect("spec serializes"),
        "seed": spec.seed,
        "method": spec.method.name.name(),
        "diagnostics": diagnostics,
        "payload": payload,
    });
    let report_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(&report_path, text)?;
    for f in &failures {
        ctx.progress(&format!("FAILED {f}"));
    }
    ctx.progress(&format!("wrote {}", report_path.display()));
    Ok(RunOutcome {
        report_path,
        report,
        failures,
    })
}

fn timestamp() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

type Sections = (Value, Value, Vec<String>);

struct Problem {
    kernel: TransitionKernel,
    v: Potential,
    transport: Transport,
}

fn setup(spec: &RunSpec) -> Result<Problem, RunError> {
    let grid = spec.grid();
    let kernel = spec.kernel.build(&grid)?;
    let v = spec.potential.build()?;
    let m = &spec.method;
    let transport = Transport::new(&kernel, grid, m.transport.method(&kernel))?.with_budget(m.truncation_budget);
    Ok(Problem { kernel, v, transport })
}

fn initial(spec: &RunSpec) -> Result<Field, RunError> {
    match spec.initial_field()? {
        Some(f) => Ok(f),
        None => Ok(Field::delta(spec.grid(), spec.problem.y)?),
    }
}

fn heat_d(spec: &RunSpec) -> f64 {
    spec.kernel.heat_d().expect("validated heat kernel")
}

fn trotter(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let p = setup(spec)?;
    let schedule = SliceSchedule::new(spec.problem.t, m.slices, m.scheme)?;
    let diag = json!({
        "transport": format!("{:?}", p.transport.method()),
        "dt": schedule.dt(),
    });
    if m.functional == super::config::FunctionalChoice::ExpNeg {
        let f0 = initial(spec)?;
        let u = trotter_propagate_with(&p.transport, &f0, &p.v, &schedule)?;
        return Ok((diag, ctx.field("field", &u)?, vec![]));
    }
    let ix = spec.grid().require_index(spec.problem.x)?;
    let hist = ActionHistogram::propagate(&p.transport, &p.v, spec.problem.y, &schedule, m.bins)?;
    let f = m.functional.functional();
    let value = hist.integrate(ix, |s| f.eval(s));
    let (lo, hi) = hist.action_range();
    let diag = json!({
        "transport": format!("{:?}", p.transport.method()),
        "dt": schedule.dt(),
        "bins": hist.bins(),
        "bin_width": hist.bin_width(),
        "action_range": [lo, hi],
    });
    let payload = json!({
        "value": complex(value),
        "total_weight": complex(hist.total_weight(ix)),
    });
    Ok((diag, payload, vec![]))
}

fn volterra(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let p = setup(spec)?;
    let state = volterra_solve_with(&p.transport, &p.v, spec.problem.y, spec.problem.t, m.steps)?;
    fs::write(ctx.dir.join("volterra_state.json"), state.to_json())?;
    let mut diag = json!({
        "dt": state.dt(),
        "state": "volterra_state.json",
    });
    if m.residual {
        ctx.progress("volterra residual check");
        diag["residual"] = json!(residual_check(&state, &p.kernel, &p.v)?);
    }
    Ok((diag, ctx.field("field", state.last())?, vec![]))
}

fn dyson(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let p = setup(spec)?;
    let f0 = initial(spec)?;
    let segments = spec.segments(&p.v)?;
    let per = m.steps / segments;
    let (t, y) = (spec.problem.t, spec.problem.y);
    let mut diag = json!({
        "segments": segments,
        "steps_per_segment": per,
    });
    let u = if segments == 1 {
        let series = dyson_series_from(&p.transport, &p.v, &f0, y, t, m.order, per)?;
        let rows = scattering_report(&series);
        write_scattering_csv(&rows, BufWriter::new(File::create(ctx.dir.join("scattering.csv"))?))?;
        diag["remainder_bound"] = json!(series.remainder_bound);
        diag["scattering"] = json!("scattering.csv");
        series.sum()
    } else {
        let (u, bound) = dyson_sum_segmented_from(&p.transport, &p.v, &f0, y, t, m.order, per, segments)?;
        diag["remainder_bound"] = json!(bound);
        u
    };
    Ok((diag, ctx.field("field", &u)?, vec![]))
}

fn cn(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let v = spec.potential.build()?;
    let f0 = initial(spec)?;
    let opts = CrankNicolsonOptions {
        boundary_budget: m.truncation_budget,
        rannacher_steps: m.rannacher_steps,
        keep_all: false,
    };
    let sol = crank_nicolson_with(&f0, heat_d(spec), &v, spec.problem.t, m.steps, &opts)?;
    let diag = json!({
        "dt": spec.problem.t / m.steps as f64,
        "error_model": sol.error_model,
    });
    Ok((diag, ctx.field("field", sol.last())?, vec![]))
}

fn mc(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let p = &spec.problem;
    let v = spec.potential.build()?;
    let f = m.functional.functional();
    let est = mc_functional(p.x, p.y, p.t, heat_d(spec), &v, &f, m.n_paths, m.steps, spec.seed)?;
    let diag = json!({ "dt": p.t / m.steps as f64 });
    Ok((diag, serde_json::to_value(est).expect("estimate serializes"), vec![]))
}

fn paths(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let p = &spec.problem;
    let paths = sample_paths(p.x, p.y, p.t, m.steps, heat_d(spec), m.n_paths, spec.seed)?;
    write_paths_csv(&paths, BufWriter::new(File::create(ctx.dir.join("paths.csv"))?))?;
    let payload = json!({ "csv": "paths.csv", "n_paths": paths.len() });
    Ok((json!({}), payload, vec![]))
}

fn compare(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let pr = &spec.problem;
    let p = setup(spec)?;
    let delta = Field::delta(spec.grid(), pr.y)?;

    ctx.progress("compare: trotter");
    let schedule = SliceSchedule::new(pr.t, m.slices, m.scheme)?;
    let tr = trotter_propagate_with(&p.transport, &delta, &p.v, &schedule)?;
    ctx.progress("compare: volterra");
    let vo = volterra_solve_with(&p.transport, &p.v, pr.y, pr.t, m.steps)?;
    ctx.progress("compare: dyson");
    let segments = spec.segments(&p.v)?;
    let (dy, bound) = dyson_sum_segmented_from(
        &p.transport,
        &p.v,
        &delta,
        pr.y,
        pr.t,
        m.order,
        m.steps / segments,
        segments,
    )?;
    ctx.progress("compare: cn");
    let opts = CrankNicolsonOptions {
        boundary_budget: m.truncation_budget,
        rannacher_steps: m.rannacher_steps,
        keep_all: false,
    };
    let cn = crank_nicolson_with(&delta, heat_d(spec), &p.v, pr.t, m.steps, &opts)?;
    ctx.progress("compare: mc");
    let f = m.functional.functional();
    let est = mc_functional(pr.x, pr.y, pr.t, heat_d(spec), &p.v, &f, m.n_paths, m.steps, spec.seed)?;

    let names = ["trotter", "volterra", "dyson", "cn"];
    let fields = [&tr, vo.last(), &dy, cn.last()];
    let mut failures = Vec::new();
    let mut matrix = Vec::new();
    for (i, a) in fields.iter().enumerate() {
        let mut row = Vec::new();
        for (j, b) in fields.iter().enumerate() {
            let d = a.rel_l2_diff(b)?;
            if i < j && !(d < m.field_tolerance) {
                failures.push(format!("{}-{} relative L2 {d:e}", names[i], names[j]));
            }
            row.push(d);
        }
        matrix.push(row);
    }
    let mut scalars = serde_json::Map::new();
    for (name, field) in names.iter().zip(fields) {
        let value = field.interpolate(pr.x).re;
        let diff = est.value - value;
        let z = diff / est.stderr;
        if *name == "volterra" && !(z.abs() <= m.mc_sigmas) {
            failures.push(format!("mc-volterra {z:.3} stderr"));
        }
        scalars.insert(
            name.to_string(),
            json!({ "value": value, "mc_minus": diff, "stderr_units": z }),
        );
    }
    let diag = json!({
        "segments": segments,
        "dyson_remainder_bound": bound,
        "field_tolerance": m.field_tolerance,
        "mc_sigmas": m.mc_sigmas,
    });
    let mut fields_out = serde_json::Map::new();
    for (name, field) in names.iter().zip(fields) {
        fields_out.insert(name.to_string(), ctx.field(name, field)?);
    }
    let payload = json!({
        "methods": names,
        "relative_l2": matrix,
        "mc": est,
        "scalars": scalars,
        "fields": fields_out,
        "passed": failures.is_empty(),
    });
    Ok((diag, payload, failures))
}

fn verify_kernel(ctx: &Ctx) -> Result<Sections, RunError> {
    let spec = ctx.spec;
    let m = &spec.method;
    let grid = spec.grid();
    let kernel = spec.kernel.build(&grid)?;
    let t = spec.problem.t;
    let s = m.ck_s.unwrap_or(t / 2.0);
    let mut failures = Vec::new();

    ctx.progress("verify-kernel: chapman-kolmogorov");
    let ck = check_chapman_kolmogorov_with_budget(&kernel, &grid, t, s, m.truncation_budget)?;
    let ck_pass = ck.max_error < m.ck_tolerance;
    if !ck_pass {
        failures.push(format!(
            "chapman-kolmogorov residual {:e} >= {:e}",
            ck.max_error, m.ck_tolerance
        ));
    }

    ctx.progress("verify-kernel: normalization");
    let norm = check_normalization(&kernel, &grid, t)?;
    let norm_pass = norm.max_error < m.normalization_tolerance;
    if !norm_pass {
        failures.push(format!(
            "normalization error {:e} >= {:e}",
            norm.max_error, m.normalization_tolerance
        ));
    }

    // A table cannot be evaluated between its sampled times.
    let tabulated_times = match &spec.kernel {
        KernelSpec::Tabulated { times, .. } => Some(times),
        _ => None,
    };
    let skip =
        tabulated_times.is_some_and(|ts| m.deltas.iter().any(|d| !ts.iter().any(|t| (t - d).abs() <= 1e-12 * d)));
    let delta = if skip {
        json!({ "skipped": "deltas are not sampled times of the tabulated kernel" })
    } else {
        ctx.progress("verify-kernel: delta limit");
        let x = spec.problem.x;
        let g = Field::from_fn_real(grid, |y| (-(y - x) * (y - x)).exp());
        let errs = check_delta_limit_at(&kernel, &g, x, &m.deltas)?;
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let last = *errs.last().expect("nonempty deltas");
        let pass = decreasing && last < m.delta_tolerance;
        if !pass {
            failures.push(format!("delta limit errors {errs:?}"));
        }
        json!({ "deltas": m.deltas, "errors": errs, "decreasing": decreasing, "passed": pass })
    };

    let payload = json!({
        "chapman_kolmogorov": {
            "t": t,
            "s": s,
            "max_error": ck.max_error,
            "trusted_sources": ck.trusted_sources,
            "tail_certified": ck.tail_certified,
            "tolerance": m.ck_tolerance,
            "passed": ck_pass,
        },
        "normalization": {
            "max_error": norm.max_error,
            "trusted_sources": norm.trusted_sources,
            "tolerance": m.normalization_tolerance,
            "passed": norm_pass,
        },
        "delta_limit": delta,
        "failures": failures,
        "passed": failures.is_empty(),
    });
    let kind = match kernel.kind() {
        KernelKind::Heat { .. } => "heat",
        KernelKind::Spectral { .. } => "spectral",
        KernelKind::OrnsteinUhlenbeck { .. } => "ou",
        KernelKind::Tabulated(_) => "tabulated",
    };
    Ok((json!({ "kernel": kind }), payload, failures))
}
