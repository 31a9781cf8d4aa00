//! The `aprank` command line.
//!
//! Exit status is 0 on success, 1 for usage or input errors and 2 when an
//! algorithm fails its contract (search exhausted, retries used up, ...).
//! Every run produces a JSON report with the inputs, seed, version, outputs
//! and timings; it goes to `--report`, else next to `--output` as
//! `<output>.report.json`, else to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::apps::{bench_csv, bench_suite, estimate_linf, generate_instance, BenchConfig, InstanceSpec, LinfConfig, Method};
use crate::energy::{decompose_energy, EnergyConfig};
use crate::error::{AprankError, Result};
use crate::frank_wolfe::{fw_decompose, FWConfig, LmoKind};
use crate::norms::{estimate_lr, linf_lower, LrPolicy, NormKind, DEFAULT_EXPANSION_BUDGET};
use crate::rng::{mix, sphere_points};
use crate::search::{SearchConfig, DEFAULT_COVERING_BUDGET};
use crate::sparsify::{linf_upper, maurey_sparsify, nuclear_upper, SparsifyConfig};
use crate::tensor::io::{decomposition_from_json, decomposition_to_json, tensor_from_json, tensor_to_json};
use crate::tensor::{Decomposition, SymmetricTensor};

pub const THREADS_ENV: &str = "APRANK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "aprank", version, about = "Certified low-rank approximation of symmetric tensors")]
pub struct Cli {
    /// Worker threads (falls back to APRANK_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-rank instance.
    Generate(GenerateArgs),
    /// Decompose a tensor (energy, fw) or sparsify a decomposition (maurey).
    Decompose(DecomposeArgs),
    /// Sparsify a decomposition in a chosen norm.
    Sparsify(SparsifyArgs),
    /// Measure a norm of a tensor or decomposition.
    Norm(NormArgs),
    /// Bracket the sup norm of a decomposition.
    EstimateLinf(EstimateLinfArgs),
    /// Evaluate a tensor at a point.
    Eval(EvalArgs),
    /// Run a batch of generated instances.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Random seed; a random one is chosen and logged when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Even degree 2d.
    #[arg(long = "two-d", default_value_t = 4)]
    pub two_d: usize,
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the planted decomposition here.
    #[arg(long)]
    pub planted: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "energy")]
    pub method: String,
    #[arg(long)]
    pub epsilon: f64,
    /// Residual norm exponent for the energy method, or `inf`.
    #[arg(long, default_value = "4")]
    pub r: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub retries: usize,
    #[arg(long = "angle-filter", value_enum, default_value_t = OnOff::On)]
    pub angle_filter: OnOff,
    /// Nuclear norm guess for Frank-Wolfe (default: Σ|c_i| of a decomposition input).
    #[arg(long)]
    pub nuclear: Option<f64>,
    #[arg(long, default_value = "sample")]
    pub lmo: String,
    /// Covering resolution.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Frank-Wolfe trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct SparsifyArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// hs, l<r> or linf.
    #[arg(long, default_value = "hs")]
    pub norm: String,
    #[arg(long)]
    pub epsilon: f64,
    /// Type-2 constant override.
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub retries: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct NormArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// hs, l<r>, linf or linf-lower.
    #[arg(long, default_value = "hs")]
    pub kind: String,
    /// Subtract this tensor or decomposition first.
    #[arg(long)]
    pub minus: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateLinfArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub retries: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Comma-separated coordinates.
    #[arg(short = 'x', long = "point", allow_hyphen_values = true)]
    pub point: String,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV table of results.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

/// Bench configuration file.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub method: Method,
    #[serde(default = "default_r")]
    pub r: String,
    pub epsilon: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_max_dimension")]
    pub max_dimension: f64,
    pub specs: Vec<InstanceSpec>,
}

fn default_r() -> String {
    "4".into()
}

fn default_samples() -> usize {
    100_000
}

fn default_max_dimension() -> f64 {
    5000.0
}

/// A finished command: files to write, a line for stdout, report fields.
struct Run {
    seed: Option<u64>,
    inputs: Value,
    outputs: Value,
    files: Vec<(PathBuf, String)>,
    stdout: Option<String>,
    report_next_to: Option<PathBuf>,
    /// Wall-clock measurements; kept apart from `outputs`, which are
    /// reproducible from the seed.
    timings: Value,
}

fn parse_r(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|r| *r >= 2.0)
            .ok_or_else(|| AprankError::InvalidArgument(format!("--r must be a number >= 2 or 'inf', got '{s}'"))),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("aprank: no --seed given, using seed {s}");
        s
    })
}

enum Input {
    Tensor(SymmetricTensor),
    Decomposition(Decomposition),
}

impl Input {
    fn tensor(&self) -> Result<SymmetricTensor> {
        match self {
            Input::Tensor(t) => Ok(t.clone()),
            Input::Decomposition(d) => d.materialize(),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AprankError::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

/// Tensor files carry `coeffs`, decomposition files carry `terms`.
fn load_input(path: &Path) -> Result<Input> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| AprankError::Parse(format!("{}: {e}", path.display())))?;
    let context = |e: AprankError| AprankError::Parse(format!("{}: {e}", path.display()));
    if value.get("terms").is_some() {
        Ok(Input::Decomposition(decomposition_from_json(&text).map_err(context)?))
    } else {
        Ok(Input::Tensor(tensor_from_json(&text).map_err(context)?))
    }
}

fn load_decomposition(path: &Path) -> Result<Decomposition> {
    match load_input(path)? {
        Input::Decomposition(d) => Ok(d),
        Input::Tensor(_) => Err(AprankError::InvalidArgument(format!(
            "{} holds a tensor, but a decomposition is required",
            path.display()
        ))),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn generate(a: &GenerateArgs) -> Result<Run> {
    let seed = resolve_seed(a.common.seed);
    let spec = InstanceSpec {
        m: a.m,
        n: a.n,
        two_d: a.two_d,
        epsilon: a.epsilon,
        seed,
    };
    let (f, planted) = generate_instance(&spec)?;
    let mut files = vec![(a.output.clone(), tensor_to_json(&f)? + "\n")];
    if let Some(p) = &a.planted {
        files.push((p.clone(), decomposition_to_json(&planted)? + "\n"));
    }
    Ok(Run {
        seed: Some(seed),
        inputs: to_value(a),
        outputs: json!({"dimension": f.dim(), "hs_norm": f.hs_norm(), "planted_rank": planted.len()}),
        files,
        stdout: None,
        report_next_to: Some(a.output.clone()),
        timings: Value::Null,
    })
}

fn decompose(a: &DecomposeArgs) -> Result<Run> {
    let method: Method = a.method.parse()?;
    let seed = resolve_seed(a.common.seed);
    let input = load_input(&a.input)?;
    let mut files = Vec::new();
    let mut timings = Value::Null;
    let (dec, outputs) = match method {
        Method::Energy => {
            let f = input.tensor()?;
            let r = parse_r(&a.r)?;
            let mut cfg = EnergyConfig::from(SearchConfig {
                sample_size: a.samples,
                max_retries: a.retries,
                seed,
                angle_cos_threshold: match a.angle_filter {
                    OnOff::On => SearchConfig::default().angle_cos_threshold,
                    OnOff::Off => None,
                },
                ..Default::default()
            });
            if let Some(eta) = a.eta {
                cfg.covering_eta = eta;
            }
            let out = decompose_energy(&f, r, a.epsilon, &cfg)?;
            let residuals: Vec<f64> = out.report.loops.iter().map(|l| l.residual_norm.value).collect();
            let outputs = json!({
                "rank": out.decomposition.len(),
                "loops": out.state.loops,
                "loop_bound": out.report.loop_bound,
                "residual_norms": residuals,
                "final_residual": out.report.final_residual,
                "certificate": out.report.certificate,
                "loop_records": out.report.loops,
            });
            timings = json!({"algorithm_secs": out.report.elapsed_secs});
            (out.decomposition, outputs)
        }
        Method::Fw => {
            let f = input.tensor()?;
            let nuclear = match (&input, a.nuclear) {
                (_, Some(c)) => c,
                (Input::Decomposition(d), None) => nuclear_upper(d),
                (Input::Tensor(_), None) => {
                    return Err(AprankError::InvalidArgument(
                        "--nuclear is required when the input is a tensor".into(),
                    ))
                }
            };
            let mut cfg = FWConfig::new(a.epsilon, nuclear);
            cfg.lmo = a.lmo.parse::<LmoKind>()?;
            cfg.seed = seed;
            cfg.max_iters = a.max_iters;
            cfg.samples = a.samples.min(20_000);
            if let Some(eta) = a.eta {
                cfg.eta = eta;
            }
            let out = match fw_decompose(&f, &cfg) {
                Err(AprankError::FrankWolfeBudget {
                    iterations,
                    residual,
                    tolerance,
                    trace,
                }) => {
                    if let Some(p) = &a.trace {
                        std::fs::write(p, trace.to_csv()?)?;
                    }
                    return Err(AprankError::FrankWolfeBudget {
                        iterations,
                        residual,
                        tolerance,
                        trace,
                    });
                }
                other => other?,
            };
            if let Some(p) = &a.trace {
                files.push((p.clone(), out.trace.to_csv()?));
            }
            let outputs = json!({
                "rank": out.decomposition.len(),
                "iterations": out.iterations,
                "iteration_budget": cfg.iteration_budget(),
                "nuclear_guess": nuclear,
                "hs_error": out.error,
                "final_delta": out.trace.final_delta,
            });
            (out.decomposition, outputs)
        }
        Method::Maurey => {
            let Input::Decomposition(d) = input else {
                return Err(AprankError::InvalidArgument(
                    "--method maurey needs a decomposition input".into(),
                ));
            };
            let mut cfg = SparsifyConfig::new(NormKind::Hs, a.epsilon);
            cfg.seed = seed;
            cfg.max_retries = a.retries;
            let out = maurey_sparsify(&d, &cfg)?;
            let outputs = to_value(&out);
            (out.decomposition, outputs)
        }
    };
    let text = decomposition_to_json(&dec)? + "\n";
    let stdout = match &a.output {
        Some(p) => {
            files.push((p.clone(), text));
            None
        }
        None => Some(text),
    };
    Ok(Run {
        seed: Some(seed),
        inputs: to_value(a),
        outputs,
        files,
        stdout,
        report_next_to: a.output.clone(),
        timings,
    })
}

fn sparsify(a: &SparsifyArgs) -> Result<Run> {
    let seed = resolve_seed(a.common.seed);
    let dec = load_decomposition(&a.input)?;
    let mut cfg = SparsifyConfig::new(a.norm.parse()?, a.epsilon);
    cfg.seed = seed;
    cfg.max_retries = a.retries;
    cfg.type2_override = a.t2;
    cfg.samples = a.samples;
    let out = maurey_sparsify(&dec, &cfg)?;
    let text = decomposition_to_json(&out.decomposition)? + "\n";
    let (files, stdout) = match &a.output {
        Some(p) => (vec![(p.clone(), text)], None),
        None => (vec![], Some(text)),
    };
    let mut outputs = to_value(&out);
    outputs["rank"] = json!(out.decomposition.len());
    Ok(Run {
        seed: Some(seed),
        inputs: to_value(a),
        outputs,
        files,
        stdout,
        report_next_to: a.output.clone(),
        timings: Value::Null,
    })
}

fn norm(a: &NormArgs) -> Result<Run> {
    let kind: NormKind = a.kind.parse()?;
    let mut f = load_input(&a.input)?.tensor()?;
    if let Some(m) = &a.minus {
        f = f.sub(&load_input(m)?.tensor()?)?;
    }
    let (seed, value, outputs) = match kind {
        NormKind::Hs => {
            let v = f.hs_norm();
            (None, v, json!({"value": v, "method": "exact"}))
        }
        NormKind::Lr(r) => {
            let seed = resolve_seed(a.common.seed);
            let policy = LrPolicy {
                budget: DEFAULT_EXPANSION_BUDGET,
                samples: a.samples,
                seed,
            };
            let e = estimate_lr(&f, r, &policy)?;
            (Some(seed), e.value, to_value(&e))
        }
        NormKind::LinfLower => {
            let seed = resolve_seed(a.common.seed);
            let v = linf_lower(&f, &sphere_points(f.n(), a.samples, seed))?;
            (Some(seed), v, json!({"value": v, "method": "sampled-lower-bound", "samples": a.samples}))
        }
        NormKind::Linf => {
            let seed = resolve_seed(a.common.seed);
            let upper = linf_upper(&f, a.eta, DEFAULT_COVERING_BUDGET, DEFAULT_EXPANSION_BUDGET, seed)?;
            let lower = linf_lower(&f, &sphere_points(f.n(), a.samples, mix(seed, 1)))?;
            (Some(seed), upper, json!({"value": upper, "method": "certified-upper-bound", "sampled_lower": lower}))
        }
    };
    Ok(Run {
        seed,
        inputs: to_value(a),
        outputs,
        files: vec![],
        stdout: Some(format!("{value}\n")),
        report_next_to: None,
        timings: Value::Null,
    })
}

fn linf(a: &EstimateLinfArgs) -> Result<Run> {
    let seed = resolve_seed(a.common.seed);
    let dec = load_decomposition(&a.input)?;
    let cfg = LinfConfig {
        seed,
        samples: a.samples,
        max_retries: a.retries,
        ..Default::default()
    };
    let iv = estimate_linf(&dec, a.epsilon, &cfg)?;
    Ok(Run {
        seed: Some(seed),
        inputs: to_value(a),
        outputs: to_value(&iv),
        files: vec![],
        stdout: Some(format!("{} {}\n", iv.lower, iv.upper)),
        report_next_to: None,
        timings: Value::Null,
    })
}

fn eval(a: &EvalArgs) -> Result<Run> {
    let f = load_input(&a.input)?.tensor()?;
    let x = a
        .point
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AprankError::InvalidArgument(format!("bad coordinate '{s}' in --point")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = f.eval(&x)?;
    Ok(Run {
        seed: None,
        inputs: to_value(a),
        outputs: json!({ "value": value }),
        files: vec![],
        stdout: Some(format!("{value}\n")),
        report_next_to: None,
        timings: Value::Null,
    })
}

fn bench(a: &BenchArgs) -> Result<Run> {
    let seed = resolve_seed(a.common.seed);
    let file: BenchFile = serde_json::from_str(&read_text(&a.config)?)
        .map_err(|e| AprankError::Parse(format!("{}: {e}", a.config.display())))?;
    let mut cfg = BenchConfig::new(file.method, parse_r(&file.r)?, file.epsilon);
    cfg.energy.search.sample_size = file.samples;
    cfg.energy.search.seed = seed;
    cfg.max_dimension = file.max_dimension;
    let rows = bench_suite(&file.specs, &cfg);
    let csv = bench_csv(&rows)?;
    let (files, stdout) = match &a.output {
        Some(p) => (vec![(p.clone(), csv)], None),
        None => (vec![], Some(csv)),
    };
    Ok(Run {
        seed: Some(seed),
        inputs: json!({"config": a.config, "bench": to_value(&file)}),
        outputs: json!({ "rows": rows }),
        files,
        stdout,
        report_next_to: a.output.clone(),
        timings: json!({"row_secs": rows.iter().map(|r| r.elapsed_secs).collect::<Vec<_>>()}),
    })
}

fn report_path(common: &Common, next_to: Option<&Path>) -> Option<PathBuf> {
    common.report.clone().or_else(|| {
        next_to.map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".report.json");
            PathBuf::from(s)
        })
    })
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Generate(a) => &a.common,
        Command::Decompose(a) => &a.common,
        Command::Sparsify(a) => &a.common,
        Command::Norm(a) => &a.common,
        Command::EstimateLinf(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Bench(a) => &a.common,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Generate(_) => "generate",
        Command::Decompose(_) => "decompose",
        Command::Sparsify(_) => "sparsify",
        Command::Norm(_) => "norm",
        Command::EstimateLinf(_) => "estimate-linf",
        Command::Eval(_) => "eval",
        Command::Bench(_) => "bench",
    }
}

fn failure_outputs(e: &AprankError) -> Value {
    match e {
        AprankError::SearchFailure {
            best_point,
            best_value,
            required,
            partial,
            ..
        } => json!({
            "best_point": best_point,
            "best_value": best_value,
            "required": required,
            "partial_rank": partial.as_ref().map(|p| p.len()),
        }),
        AprankError::SparsifyFailure { best, best_error, .. } => {
            json!({"best_rank": best.len(), "best_error": best_error})
        }
        AprankError::FrankWolfeBudget { trace, .. } => json!({"final_delta": trace.final_delta}),
        _ => Value::Null,
    }
}

fn dispatch(cmd: &Command) -> i32 {
    let start = Instant::now();
    let result = match cmd {
        Command::Generate(a) => generate(a),
        Command::Decompose(a) => decompose(a),
        Command::Sparsify(a) => sparsify(a),
        Command::Norm(a) => norm(a),
        Command::EstimateLinf(a) => linf(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let common = common(cmd);
    let mut report = json!({
        "tool": "aprank",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command_name(cmd),
        "timings": {"total_secs": elapsed},
    });
    let (code, next_to) = match result {
        Ok(run) => {
            let mut code = 0;
            for (path, text) in &run.files {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("aprank: cannot write {}: {e}", path.display());
                    code = 1;
                }
            }
            if let Some(s) = &run.stdout {
                print!("{s}");
            }
            report["status"] = json!(if code == 0 { "ok" } else { "error" });
            report["seed"] = json!(run.seed);
            report["inputs"] = run.inputs;
            report["outputs"] = run.outputs;
            if !run.timings.is_null() {
                report["timings"]["detail"] = run.timings;
            }
            (code, run.report_next_to)
        }
        Err(e) => {
            eprintln!("aprank: {e}");
            let contract = e.is_contract_failure();
            report["status"] = json!(if contract { "contract-failure" } else { "error" });
            report["seed"] = json!(common.seed);
            report["error"] = json!(e.to_string());
            report["outputs"] = failure_outputs(&e);
            (if contract { 2 } else { 1 }, None)
        }
    };
    let text = serde_json::to_string_pretty(&report).unwrap_or_default() + "\n";
    match report_path(common, next_to.as_deref()) {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, text) {
                eprintln!("aprank: cannot write report {}: {e}", p.display());
                return code.max(1);
            }
        }
        None => eprint!("{text}"),
    }
    code
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got '{s}'")),
        Err(_) => Ok(None),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(Some(0)) => {
            eprintln!("aprank: thread count must be at least 1");
            return 1;
        }
        Ok(t) => t,
        Err(msg) => {
            eprintln!("aprank: {msg}");
            return 1;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| dispatch(&cli.command)),
        Err(e) => {
            eprintln!("aprank: cannot start thread pool: {e}");
            1
        }
    }
}
