//! Command-line front end: builds models from JSON, runs each analysis, and
//! emits machine-readable reports.
//!
//! Every report carries the resolved configuration (after defaults), the
//! crate version, and, for stochastic runs, the seed, so any output can be
//! reproduced bit for bit. JSON is the canonical format; CSV is available for
//! series-shaped data.
//!
//! Exit status: 0 on success, 1 on computation failure, 2 on usage errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qsd_core::asymptotics::{
    conjecture_report, estimate_kappa, ConjectureConfig, SeriesLab, SeriesTarget,
};
use qsd_core::decay::{decay_parameter, invariant_pair, verify_semigroup_invariance};
use qsd_core::kernel::{transition_matrix, KernelMethod, SpectralDecomposition};
use qsd_core::model::{ModelInput, ModelSpec};
use qsd_core::montecarlo::{estimate_conditional, estimate_survival};
use qsd_core::numeric::{lin_spaced, log_spaced};
use qsd_core::{acceptance, build_generator, validate_generator, Error};

#[derive(Parser)]
#[command(
    name = "qsd",
    version,
    about = "Quasi-stationary analysis of absorbing birth-death chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a truncated generator and report its diagnostics
    Validate(CommonArgs),
    /// Estimate the decay parameter over a truncation schedule
    Decay(CommonArgs),
    /// Invariant measure/vector pair, with semigroup residuals at --t
    Invariants(InvariantsArgs),
    /// Evaluate the transition kernel at one time point
    Kernel(KernelArgs),
    /// Conditional distribution given survival at time --t
    Lcd(LcdArgs),
    /// Integrate the potential and classify recurrence and positivity
    Classify(ClassifyArgs),
    /// Build a decay series and fit the polynomial correction exponent
    Kappa(KappaArgs),
    /// Monte Carlo estimates of survival and the conditional law
    Simulate(SimulateArgs),
    /// Run the full conjecture harness
    Conjectures(ConjecturesArgs),
    /// Run the acceptance suite and print one pass/fail line per criterion
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

/// Flags shared by every analysis command. Flags override config-file values.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Inline model JSON, e.g. '{"model":"killed_mm1","p":1,"q":4}'
    #[arg(long)]
    model: Option<String>,
    /// JSON config file holding any of the flag values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Truncation level(s), comma separated
    #[arg(long, value_delimiter = ',')]
    trunc: Vec<usize>,
    /// Master seed for stochastic runs
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance (uniformization tail / quadrature), default 1e-10
    #[arg(long)]
    tol: Option<f64>,
    /// Output format (json is canonical; csv for series data)
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvariantsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Times for the semigroup residual check
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Evaluation time
    #[arg(long)]
    t: Option<f64>,
    /// Restrict the output to the row starting at this state
    #[arg(long)]
    i: Option<i64>,
}

#[derive(Args)]
struct LcdArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start state
    #[arg(long)]
    i: Option<i64>,
    /// Observation time(s)
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Integration horizon
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Row states of the integrand pairs, zipped with --j
    #[arg(long, value_delimiter = ',')]
    i: Vec<i64>,
    /// Column states of the integrand pairs
    #[arg(long, value_delimiter = ',')]
    j: Vec<i64>,
}

#[derive(Args)]
struct KappaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start state of the series
    #[arg(long)]
    i: Option<i64>,
    /// Target state; 0 (the absorbing state) selects the survival series
    #[arg(long)]
    j: Option<i64>,
    /// Time grid as start:stop:count[:log|lin]
    #[arg(long)]
    t_grid: Option<String>,
    /// Fit window "a,b" (default: the full grid)
    #[arg(long, value_delimiter = ',')]
    window: Vec<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start state
    #[arg(long)]
    i: Option<i64>,
    /// Observation time
    #[arg(long)]
    t: Option<f64>,
    /// Number of replicates
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
struct ConjecturesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Time grid as start:stop:count[:log|lin]
    #[arg(long)]
    t_grid: Option<String>,
    /// Fit window "a,b"
    #[arg(long, value_delimiter = ',')]
    window: Vec<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: all, mm1, critbd, rw, mc, or properties
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config-file form of the common flags; field names are the flag names.
#[derive(Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelInput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trunc: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

/// Usage problems exit with status 2, computation failures with 1.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Compute(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) | Error::Parameter(_) | Error::Size(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Everything a command resolved before running; echoed into the report.
struct Resolved {
    model: Option<ModelSpec>,
    config: Value,
    format: OutFormat,
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> CliResult<(Resolved, FileConfig)> {
        let mut file = FileConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            file = serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?;
        }
        let model_input = match (&self.model, &file.model) {
            (Some(text), _) => Some(
                text.parse::<ModelInput>()
                    .map_err(|e| usage(e.to_string()))?,
            ),
            (None, Some(m)) => Some(m.clone()),
            (None, None) => None,
        };
        let mut trunc = if self.trunc.is_empty() {
            file.trunc.clone().unwrap_or_default()
        } else {
            self.trunc.clone()
        };
        if trunc.is_empty() {
            if let Some(m) = &model_input {
                if let Some(n) = m.n_trunc {
                    trunc = vec![n];
                }
            }
        }
        let format = self
            .format
            .or(match file.format.as_deref() {
                Some("json") => Some(OutFormat::Json),
                Some("csv") => Some(OutFormat::Csv),
                _ => None,
            })
            .unwrap_or(OutFormat::Json);
        let out = self
            .out
            .clone()
            .or_else(|| file.out.as_ref().map(PathBuf::from));
        let model = model_input.as_ref().map(|m| m.spec.clone());
        let resolved = Resolved {
            model: model.clone(),
            config: json!({
                "model": model,
                "trunc": trunc,
                "seed": self.seed.or(file.seed),
                "tol": self.tol.or(file.tol).unwrap_or(1e-10),
                "format": match format { OutFormat::Json => "json", OutFormat::Csv => "csv" },
            }),
            format,
            out,
        };
        let merged = FileConfig {
            trunc: Some(trunc),
            seed: self.seed.or(file.seed),
            tol: Some(self.tol.or(file.tol).unwrap_or(1e-10)),
            ..file
        };
        Ok((resolved, merged))
    }

    fn model(&self, resolved: &Resolved) -> CliResult<ModelSpec> {
        resolved
            .model
            .clone()
            .ok_or_else(|| usage("no model given: use --model or --config"))
    }
}

fn single_trunc(cfg: &FileConfig) -> CliResult<usize> {
    match cfg.trunc.as_deref() {
        Some([n]) => Ok(*n),
        Some([]) | None => Err(usage("a truncation level is required: --trunc N")),
        Some(_) => Err(usage("exactly one truncation level expected here")),
    }
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(usage(format!(
            "bad grid {text:?}: expected start:stop:count[:log|lin]"
        )));
    }
    let start: f64 = parts[0].parse().map_err(|_| usage("bad grid start"))?;
    let stop: f64 = parts[1].parse().map_err(|_| usage("bad grid stop"))?;
    let count: usize = parts[2].parse().map_err(|_| usage("bad grid count"))?;
    if count < 2 || !(stop > start) {
        return Err(usage("grid needs stop > start and count >= 2"));
    }
    match parts.get(3).copied().unwrap_or("log") {
        "log" => {
            if !(start > 0.0) {
                return Err(usage("log grids need start > 0"));
            }
            Ok(log_spaced(start, stop, count))
        }
        "lin" => Ok(lin_spaced(start, stop, count)),
        other => Err(usage(format!("unknown grid spacing {other:?}"))),
    }
}

/// Resolves the decay parameter: closed form when available, else Richardson
/// extrapolation over {n/2, n}.
fn resolve_lambda(spec: &ModelSpec, n: usize) -> CliResult<(f64, String)> {
    if let Some(l) = spec.analytic_decay() {
        return Ok((l, "analytic".into()));
    }
    let est = decay_parameter(spec, &[n / 2, n])?;
    Ok((
        est.extrapolated,
        format!("extrapolated over [{}, {}]", n / 2, n),
    ))
}

struct Report {
    command: &'static str,
    resolved: Resolved,
    data: Value,
    csv: Option<String>,
}

fn emit(report: Report) -> CliResult<()> {
    let text = match report.resolved.format {
        OutFormat::Json => {
            let envelope = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": report.command,
                "config": report.resolved.config,
                "data": report.data,
            });
            serde_json::to_string_pretty(&envelope)
                .map_err(|e| CliError::Compute(e.to_string()))?
                + "\n"
        }
        OutFormat::Csv => report
            .csv
            .ok_or_else(|| usage("csv output is not available for this command"))?,
    };
    match &report.resolved.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Compute(e.to_string()))
}

fn cmd_validate(args: &CommonArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.resolve()?;
    let spec = args.model(&resolved)?;
    let g = build_generator(&spec, single_trunc(&cfg)?)?;
    let diag = validate_generator(&g);
    Ok(Report {
        command: "validate",
        resolved,
        data: json!({
            "states": g.dim(),
            "diagnostics": to_value(&diag)?,
        }),
        csv: None,
    })
}

fn cmd_decay(args: &CommonArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.resolve()?;
    let spec = args.model(&resolved)?;
    let schedule = cfg
        .trunc
        .clone()
        .filter(|t| t.len() >= 2)
        .ok_or_else(|| usage("decay needs at least two truncation levels: --trunc N1,N2"))?;
    let est = decay_parameter(&spec, &schedule)?;
    let mut csv = String::from("n,lambda\n");
    for (n, l) in &est.per_n {
        let _ = writeln!(csv, "{n},{l:.17e}");
    }
    Ok(Report {
        command: "decay",
        resolved,
        data: to_value(&est)?,
        csv: Some(csv),
    })
}

fn cmd_invariants(args: &InvariantsArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let g = build_generator(&spec, n)?;
    let (lambda, lambda_source) = resolve_lambda(&spec, n)?;
    let pair = invariant_pair(&g, lambda)?;
    let t_list = if args.t.is_empty() {
        cfg.t.clone().unwrap_or_default()
    } else {
        args.t.clone()
    };
    let semigroup = if t_list.is_empty() {
        Value::Null
    } else {
        to_value(&verify_semigroup_invariance(&pair, &g, &t_list)?)?
    };
    Ok(Report {
        command: "invariants",
        resolved,
        data: json!({
            "lambda_source": lambda_source,
            "pair": to_value(&pair)?,
            "semigroup": semigroup,
        }),
        csv: None,
    })
}

fn cmd_kernel(args: &KernelArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let t = args
        .t
        .or_else(|| cfg.t.as_ref().and_then(|v| v.first().copied()))
        .ok_or_else(|| usage("kernel needs an evaluation time: --t T"))?;
    let tol = cfg.tol.unwrap_or(1e-10);
    let g = build_generator(&spec, n)?;
    let kernel = transition_matrix(&g, t, KernelMethod::Auto, tol)?;
    let states = kernel.states;
    let rows: Vec<usize> = match args.i {
        Some(label) => vec![states
            .index(label)
            .ok_or_else(|| usage(format!("state {label} is outside the retained block")))?],
        None => (0..kernel.dim()).collect(),
    };
    let mut csv = String::from("i,j,t,p,log_p\n");
    let mut entries = Vec::new();
    for &r in &rows {
        let from = states.label(r);
        for c in 0..kernel.dim() {
            let p = kernel.trans[[r, c]];
            if p == 0.0 && args.i.is_none() {
                continue; // keep full-matrix outputs sparse
            }
            let log_p = if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
            let to = states.label(c);
            let _ = writeln!(csv, "{from},{to},{t},{p:.17e},{log_p:.17e}");
            entries.push(json!({
                "i": from, "j": to, "p": p,
                "log_p": if p > 0.0 { Value::from(log_p) } else { Value::Null },
                "scaled": kernel.scaled[[r, c]],
            }));
        }
    }
    let absorb: Vec<Value> = rows
        .iter()
        .map(|&r| json!({"i": states.label(r), "p0": kernel.absorb_col[r]}))
        .collect();
    Ok(Report {
        command: "kernel",
        resolved,
        data: json!({
            "t": t,
            "method": to_value(&kernel.method)?,
            "lambda1": kernel.lambda1,
            "suspect_entries": kernel.suspect_entries,
            "entries": entries,
            "absorption": absorb,
        }),
        csv: Some(csv),
    })
}

fn cmd_lcd(args: &LcdArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let start = args
        .i
        .or_else(|| cfg.i.as_ref().and_then(|v| v.first().copied()))
        .ok_or_else(|| usage("lcd needs a start state: --i I"))?;
    let t_list = if args.t.is_empty() {
        cfg.t.clone().unwrap_or_default()
    } else {
        args.t.clone()
    };
    if t_list.is_empty() {
        return Err(usage("lcd needs at least one time: --t T"));
    }
    let g = build_generator(&spec, n)?;
    let dec = SpectralDecomposition::decompose(&g)?;
    let mut results = Vec::new();
    let mut csv = String::from("t,state,probability\n");
    for &t in &t_list {
        let cond = dec.conditional(start, t)?;
        for (k, &p) in cond.probs.iter().enumerate() {
            if p > 0.0 {
                let _ = writeln!(csv, "{t},{},{p:.17e}", g.states.label(k));
            }
        }
        results.push(to_value(&cond)?);
    }
    Ok(Report {
        command: "lcd",
        resolved,
        data: json!({"start": start, "conditionals": results}),
        csv: Some(csv),
    })
}

fn cmd_classify(args: &ClassifyArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let t_max = args
        .t
        .first()
        .copied()
        .or_else(|| cfg.t.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(100.0);
    let is = if args.i.is_empty() {
        cfg.i.clone().unwrap_or_else(|| vec![1])
    } else {
        args.i.clone()
    };
    let js = if args.j.is_empty() {
        cfg.j.clone().unwrap_or_else(|| vec![1])
    } else {
        args.j.clone()
    };
    if is.len() != js.len() {
        return Err(usage("--i and --j must list the same number of states"));
    }
    let pairs: Vec<(i64, i64)> = is.into_iter().zip(js).collect();
    let (lambda, lambda_source) = resolve_lambda(&spec, n)?;
    let cls = qsd_core::decay::classify(&spec, lambda, t_max, &pairs, n)?;
    Ok(Report {
        command: "classify",
        resolved,
        data: json!({
            "lambda_source": lambda_source,
            "classification": to_value(&cls)?,
        }),
        csv: None,
    })
}

fn cmd_kappa(args: &KappaArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let start = args
        .i
        .or_else(|| cfg.i.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(1);
    let to = args
        .j
        .or_else(|| cfg.j.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(1);
    let target = if to == 0 {
        SeriesTarget::Survival { i: start }
    } else {
        SeriesTarget::Entry { i: start, j: to }
    };
    let grid_text = args
        .t_grid
        .clone()
        .or_else(|| cfg.t_grid.clone())
        .unwrap_or_else(|| "100:400:25:log".to_string());
    let t_grid = parse_grid(&grid_text)?;
    let window = match (args.window.as_slice(), cfg.window.as_deref()) {
        ([a, b], _) => (*a, *b),
        ([], Some([a, b])) => (*a, *b),
        ([], _) => (t_grid[0], *t_grid.last().unwrap()),
        _ => return Err(usage("--window expects two values: --window A,B")),
    };
    let (lambda, lambda_source) = resolve_lambda(&spec, n)?;
    let lab = SeriesLab::with_doubling(&spec, n, 0.01)?;
    let series = lab.series(target, lambda, &t_grid)?;
    let estimate = estimate_kappa(&series, window)?;
    let mut csv = String::from("t,log_g\n");
    for (t, lg) in series.t_grid.iter().zip(&series.log_g) {
        let _ = writeln!(csv, "{t},{lg:.17e}");
    }
    Ok(Report {
        command: "kappa",
        resolved,
        data: json!({
            "lambda_source": lambda_source,
            "series": to_value(&series)?,
            "estimate": to_value(&estimate)?,
        }),
        csv: Some(csv),
    })
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let start = args
        .i
        .or_else(|| cfg.i.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(1);
    if start < 1 {
        return Err(usage("--i must be a transient state (>= 1)"));
    }
    let t = args
        .t
        .or_else(|| cfg.t.as_ref().and_then(|v| v.first().copied()))
        .ok_or_else(|| usage("simulate needs an observation time: --t T"))?;
    let n = args.n.or(cfg.n).unwrap_or(100_000);
    let seed = cfg.seed.unwrap_or(0);
    let survival = estimate_survival(&spec, start as usize, t, n, seed)?;
    let (conditional, guard) = match estimate_conditional(&spec, start as usize, t, n, seed) {
        Ok(d) => (to_value(&d)?, Value::Null),
        Err(e @ Error::Infeasible { .. }) => (Value::Null, Value::from(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::from("state,count,estimate,std_error\n");
    if let Some(d) = conditional.as_object() {
        if let (Some(Value::Array(counts)), Some(Value::Array(est))) =
            (d.get("counts"), d.get("estimates"))
        {
            for (c, e) in counts.iter().zip(est) {
                let _ = writeln!(csv, "{},{},{},{}", c[0], c[1], e[1], e[2]);
            }
        }
    }
    Ok(Report {
        command: "simulate",
        resolved,
        data: json!({
            "i": start,
            "t": t,
            "n": n,
            "seed": seed,
            "survival": to_value(&survival)?,
            "conditional": conditional,
            "infeasible": guard,
        }),
        csv: Some(csv),
    })
}

fn cmd_conjectures(args: &ConjecturesArgs) -> CliResult<Report> {
    let (resolved, cfg) = args.common.resolve()?;
    let spec = args.common.model(&resolved)?;
    let n = single_trunc(&cfg)?;
    let mut config = ConjectureConfig::new(n);
    if let Some(text) = args.t_grid.clone().or_else(|| cfg.t_grid.clone()) {
        config.t_grid = parse_grid(&text)?;
        config.window = (config.t_grid[0], *config.t_grid.last().unwrap());
    }
    match (args.window.as_slice(), cfg.window.as_deref()) {
        ([a, b], _) => config.window = (*a, *b),
        ([], Some([a, b])) => config.window = (*a, *b),
        _ => {}
    }
    let report = conjecture_report(&spec, &config)?;
    let mut csv = String::from("i,j,kappa,constant,stderr,r_squared\n");
    for cell in &report.kappa_table {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            cell.i,
            cell.j,
            cell.estimate.kappa,
            cell.estimate.constant,
            cell.estimate.stderr,
            cell.estimate.r_squared
        );
    }
    Ok(Report {
        command: "conjectures",
        resolved,
        data: to_value(&report)?,
        csv: Some(csv),
    })
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<bool> {
    let results = acceptance::run_suite(&args.suite)?;
    let all_passed = results.iter().all(|r| r.passed);
    for r in &results {
        println!("{}", r.line());
    }
    if args.format == Some(OutFormat::Json) {
        let items: Vec<Value> = results
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "name": r.name,
                    "passed": r.passed,
                    "details": r.details,
                })
            })
            .collect();
        emit(Report {
            command: "verify",
            resolved: Resolved {
                model: None,
                config: json!({"suite": args.suite}),
                format: OutFormat::Json,
                out: args.out.clone(),
            },
            data: json!({"passed": all_passed, "criteria": items}),
            csv: None,
        })?;
    }
    Ok(all_passed)
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    let report = match &cli.command {
        Command::Validate(a) => cmd_validate(a)?,
        Command::Decay(a) => cmd_decay(a)?,
        Command::Invariants(a) => cmd_invariants(a)?,
        Command::Kernel(a) => cmd_kernel(a)?,
        Command::Lcd(a) => cmd_lcd(a)?,
        Command::Classify(a) => cmd_classify(a)?,
        Command::Kappa(a) => cmd_kappa(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Conjectures(a) => cmd_conjectures(a)?,
        Command::Verify(a) => return cmd_verify(a),
    };
    emit(report)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
