//! The `hypercopy` command-line front end.
//!
//! Every invocation writes a JSON run manifest next to its primary output; `replay`
//! re-executes a manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::asym::intersection::{intersection_profile, predicted_rk};
use crate::asym::{stationary_edge_size_dist, summarize};
use crate::error::{Error, Result};
use crate::gen::{simulate, Model};
use crate::hypergraph::{load_tsv, write_tsv, LoadOptions, TemporalHypergraph};
use crate::linkpred::{evaluate, EvalConfig, NegativeSampler, ThresholdMode};
use crate::metrics::{
    degree_histogram, edge_size_histogram, log_checkpoints, rk_timeseries, tail_slope, DEFAULT_DMIN, DEFAULT_KMAX,
};
use crate::params::{kl_divergence, ModelParams};
use crate::sem::{sem_fit, Ordering, SemConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "HYPERCOPY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hypercopy", version, about = "Hyperedge copy model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow a hypergraph under the copy model or a baseline.
    Simulate(SimulateArgs),
    /// Fit model parameters by stochastic EM.
    Fit(FitArgs),
    /// Closed-form asymptotics for a parameter set.
    Analyze(AnalyzeArgs),
    /// Empirical structural measurements of a hypergraph.
    Measure(MeasureArgs),
    /// Link-prediction evaluation.
    Eval(EvalArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Parameter file with `eta`, `gamma` and `beta`.
    #[arg(long, conflicts_with_all = ["eta", "gamma", "beta"])]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Comma-separated extant-node count probabilities, starting at 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Option<Vec<f64>>,
    /// Comma-separated novel-node count probabilities, starting at 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<ModelParams> {
        if let Some(path) = &self.params {
            return read_params(path);
        }
        match (&self.eta, &self.gamma, &self.beta) {
            (Some(eta), Some(gamma), Some(beta)) => ModelParams::new(*eta, gamma.clone(), beta.clone()),
            _ => Err(Error::InvalidParams("give --params or all of --eta, --gamma and --beta".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Hcm,
    Er,
    Pa,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "hcm")]
    pub model: ModelArg,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Seed hypergraph in TSV form; a single edge of fresh nodes when absent.
    #[arg(long)]
    pub seed_hg: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderingArg {
    Temporal,
    Shuffled,
}

impl From<OrderingArg> for Ordering {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Temporal => Ordering::Temporal,
            OrderingArg::Shuffled => Ordering::Shuffled,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input lines hold only the node list; line order gives the time order.
    #[arg(long)]
    pub no_timestamps: bool,
}

impl InputArgs {
    fn load(&self) -> Result<TemporalHypergraph> {
        load_graph(&self.input, !self.no_timestamps)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub kbar: usize,
    #[arg(long, default_value_t = 30)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "temporal")]
    pub ordering: OrderingArg,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Fraction of edges (the earliest) used for fitting.
    #[arg(long, default_value_t = 1.0)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// True parameters, used to fill the KL columns of the trace.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Fill the `seconds` trace column (makes the trace run-dependent).
    #[arg(long)]
    pub trace_timing: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 60)]
    pub kmax: usize,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub imax: usize,
    /// Largest edge count of the predicted r_k grid.
    #[arg(long, default_value_t = 1_000_000)]
    pub m_max: usize,
    #[arg(long, default_value_t = 10)]
    pub per_decade: usize,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Measurement {
    Rk,
    Degrees,
    Sizes,
    Slope,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub what: Measurement,
    /// `log:N` for N points per decade, or a comma-separated list of edge counts.
    /// Defaults to `log:10` for rk and to the full graph otherwise.
    #[arg(long)]
    pub checkpoints: Option<String>,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = DEFAULT_DMIN)]
    pub dmin: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NegativesArg {
    Matched,
    Halfswap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThresholdArg {
    Pooled,
    Training,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "temporal")]
    pub ordering: OrderingArg,
    #[arg(long, value_enum, default_value = "matched")]
    pub negatives: NegativesArg,
    #[arg(long, default_value_t = 0.2)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_pos: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Median used as the F1 threshold.
    #[arg(long, value_enum, default_value = "pooled")]
    pub threshold: ThresholdArg,
    /// Count-distribution length for the fit; the largest training edge size by default.
    #[arg(long)]
    pub kbar: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub source_cap: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Record of one invocation, written as `<primary output>.manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    pub rng_seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_clock_seconds: f64,
    #[serde(default)]
    pub details: serde_json::Value,
}

struct Outcome {
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    details: serde_json::Value,
}

impl Outcome {
    fn new() -> Self {
        Self { seeds: BTreeMap::new(), inputs: Vec::new(), outputs: Vec::new(), details: serde_json::Value::Null }
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::Divergent(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn load_graph(path: &Path, timestamps: bool) -> Result<TemporalHypergraph> {
    let file = File::open(path).map_err(|e| io_context(e, path))?;
    load_tsv(BufReader::new(file), LoadOptions { timestamps })
}

fn read_params(path: &Path) -> Result<ModelParams> {
    let file = File::open(path).map_err(|e| io_context(e, path))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_context(e, path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation, so CSV values are reproducible and exact.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_checkpoints(spec: &str, m: usize) -> Result<Vec<usize>> {
    if let Some(n) = spec.strip_prefix("log:") {
        let per_decade: usize =
            n.parse().map_err(|_| Error::InvalidInput(format!("invalid checkpoint spec `{spec}`")))?;
        if per_decade == 0 {
            return Err(Error::InvalidInput("log checkpoints need at least one point per decade".into()));
        }
        return Ok(log_checkpoints(m, per_decade));
    }
    let mut points = Vec::new();
    for token in spec.split(',') {
        let p: usize = token
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("invalid checkpoint `{token}`")))?;
        if p == 0 || p > m {
            return Err(Error::InvalidInput(format!("checkpoint {p} is outside 1..={m}")));
        }
        points.push(p);
    }
    points.sort_unstable();
    points.dedup();
    Ok(points)
}

fn run_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let params = a.params.resolve()?;
    let mut out = Outcome::new();
    out.seeds.insert("rng_seed".into(), a.rng_seed);
    if let Some(p) = &a.params.params {
        out.inputs.push(p.clone());
    }
    let seed = match &a.seed_hg {
        Some(path) => {
            out.inputs.push(path.clone());
            Some(load_graph(path, true)?)
        }
        None => None,
    };
    let model = match a.model {
        ModelArg::Hcm => Model::Hcm,
        ModelArg::Er => Model::Er,
        ModelArg::Pa => Model::Pa,
    };
    let sim = simulate(model, &params, a.steps, seed, a.rng_seed)?;
    let mut w = create(&a.out)?;
    write_tsv(&sim.graph, &mut w)?;
    out.outputs.push(a.out.clone());
    out.details = serde_json::json!({
        "edges": sim.graph.num_edges(),
        "nodes": sim.graph.num_nodes(),
        "diagnostics": sim.diagnostics,
    });
    Ok(out)
}

fn run_fit(a: &FitArgs) -> Result<Outcome> {
    let mut out = Outcome::new();
    out.seeds.insert("rng_seed".into(), a.rng_seed);
    out.inputs.push(a.input.input.clone());
    let h = a.input.load()?;
    if !(a.train_frac > 0.0 && a.train_frac <= 1.0) {
        return Err(Error::InvalidInput(format!("train fraction {} is outside (0, 1]", a.train_frac)));
    }
    let m_train = ((a.train_frac * h.num_edges() as f64).round() as usize).clamp(1, h.num_edges());
    let h = if m_train < h.num_edges() { h.prefix(m_train) } else { h };
    let truth = match &a.truth {
        Some(path) => {
            out.inputs.push(path.clone());
            Some(read_params(path)?)
        }
        None => None,
    };
    let mut config = SemConfig::new(a.kbar);
    config.batch_size = a.batch_size;
    config.ordering = a.ordering.into();
    config.max_steps = a.max_steps;
    let (params, trace) = sem_fit(&h, &config, a.rng_seed)?;
    write_json(&a.out, &params)?;
    out.outputs.push(a.out.clone());
    if let Some(path) = &a.trace {
        let mut w = create(path)?;
        writeln!(w, "tau,eta,kl_gamma,kl_beta,seconds")?;
        for (r, secs) in trace.records.iter().zip(&trace.seconds) {
            let (kg, kb) = match &truth {
                Some(t) => {
                    let t = t.padded(a.kbar.max(t.kbar()));
                    let est = ModelParams::new(r.eta, r.gamma.clone(), r.beta.clone())?.padded(t.kbar());
                    (num(kl_divergence(t.gamma(), est.gamma())), num(kl_divergence(t.beta(), est.beta())))
                }
                None => (String::new(), String::new()),
            };
            let s = if a.trace_timing { num(*secs) } else { String::new() };
            writeln!(w, "{},{},{kg},{kb},{s}", r.tau, num(r.eta))?;
        }
        w.flush()?;
        out.outputs.push(path.clone());
    }
    out.details = serde_json::json!({
        "train_edges": h.num_edges(),
        "converged": trace.converged,
        "steps": trace.records.len(),
        "sampled": trace.sampled,
        "skipped": trace.skipped,
    });
    Ok(out)
}

fn run_analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let mut out = Outcome::new();
    if let Some(p) = &a.params.params {
        out.inputs.push(p.clone());
    }
    let params = a.params.resolve()?;
    let prefix = a.out_prefix.as_os_str().to_string_lossy().into_owned();
    let path = |suffix: &str| PathBuf::from(format!("{prefix}_{suffix}"));

    let summary = summarize(&params)?;
    let summary_path = path("summary.json");
    write_json(&summary_path, &summary)?;
    out.outputs.push(summary_path);

    let dist = stationary_edge_size_dist(&params, a.kmax)?;
    let dist_path = path("sizedist.csv");
    let mut w = create(&dist_path)?;
    writeln!(w, "size,probability")?;
    for (i, p) in dist.p.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, num(*p))?;
    }
    w.flush()?;
    out.outputs.push(dist_path);

    let profile = intersection_profile(&params, a.imax, crate::asym::perron::DEFAULT_TOL)?;
    let q_path = path("qtensor.csv");
    let mut w = create(&q_path)?;
    writeln!(w, "i,j,k,q")?;
    for (i, j, k, q) in profile.entries() {
        writeln!(w, "{i},{j},{k},{}", num(q))?;
    }
    w.flush()?;
    out.outputs.push(q_path);

    let rk_path = path("rk_pred.csv");
    let mut w = create(&rk_path)?;
    writeln!(w, "m,k,r_k")?;
    for m in log_checkpoints(a.m_max, a.per_decade.max(1)) {
        if m < 2 {
            continue;
        }
        for (k, r) in predicted_rk(&profile, m as u64).iter().enumerate() {
            writeln!(w, "{m},{k},{}", num(*r))?;
        }
    }
    w.flush()?;
    out.outputs.push(rk_path);

    out.details = serde_json::json!({
        "size_truncation_mass": dist.truncation_mass,
        "size_residual": dist.residual,
        "intersection_residual": profile.residual,
        "intersection_iterations": profile.iterations,
        "intersection_mean_size": dist.mean(),
    });
    Ok(out)
}

fn run_measure(a: &MeasureArgs) -> Result<Outcome> {
    let mut out = Outcome::new();
    out.inputs.push(a.input.input.clone());
    let h = a.input.load()?;
    let m = h.num_edges();
    let checkpoints = match (&a.checkpoints, a.what) {
        (Some(spec), _) => parse_checkpoints(spec, m)?,
        (None, Measurement::Rk) => log_checkpoints(m, 10),
        (None, _) => vec![m],
    };
    let mut w = create(&a.out)?;
    match a.what {
        Measurement::Rk => {
            let series = rk_timeseries(&h, &checkpoints, a.kmax)?;
            writeln!(w, "m,k,pairs,r_k")?;
            for row in &series.rows {
                for (k, (c, d)) in row.counts.iter().zip(row.densities()).enumerate() {
                    writeln!(w, "{},{k},{c},{}", row.m, num(d))?;
                }
                writeln!(w, "{},{},{},{}", row.m, series.kmax + 1, row.overflow, num(row.overflow_density()))?;
            }
        }
        Measurement::Degrees | Measurement::Sizes => {
            writeln!(w, "m,{},count", if matches!(a.what, Measurement::Degrees) { "degree" } else { "size" })?;
            for &c in &checkpoints {
                let hist = match a.what {
                    Measurement::Degrees => degree_histogram(&h, c - 1),
                    _ => edge_size_histogram(&h, c - 1),
                };
                for (d, n) in hist {
                    writeln!(w, "{c},{d},{n}")?;
                }
            }
        }
        Measurement::Slope => {
            writeln!(w, "m,dmin,exponent")?;
            for &c in &checkpoints {
                let slope = tail_slope(&degree_histogram(&h, c - 1), a.dmin);
                let s = slope.map(num).unwrap_or_default();
                writeln!(w, "{c},{},{s}", a.dmin)?;
            }
        }
    }
    w.flush()?;
    out.outputs.push(a.out.clone());
    Ok(out)
}

fn run_eval(a: &EvalArgs) -> Result<Outcome> {
    let mut out = Outcome::new();
    out.seeds.insert("rng_seed".into(), a.rng_seed);
    out.inputs.push(a.input.input.clone());
    let h = a.input.load()?;
    let config = EvalConfig {
        train_frac: a.train_frac,
        ordering: a.ordering.into(),
        negatives: match a.negatives {
            NegativesArg::Matched => NegativeSampler::Matched,
            NegativesArg::Halfswap => NegativeSampler::Halfswap,
        },
        max_pos: a.max_pos,
        rng_seed: a.rng_seed,
        threshold: match a.threshold {
            ThresholdArg::Pooled => ThresholdMode::Pooled,
            ThresholdArg::Training => ThresholdMode::Training,
        },
        source_cap: a.source_cap,
        kbar: a.kbar,
        batch_size: a.batch_size,
        ..EvalConfig::default()
    };
    let report = evaluate(&h, &config)?;
    write_json(&a.out, &report)?;
    out.outputs.push(a.out.clone());
    if let Some(path) = &a.scores {
        let mut w = create(path)?;
        writeln!(w, "candidate_id,label,log_score")?;
        for (i, c) in report.candidates.iter().enumerate() {
            writeln!(w, "{i},{},{}", c.label as u8, num(c.log_score))?;
        }
        w.flush()?;
        out.outputs.push(path.clone());
    }
    out.details = serde_json::json!({ "auc": report.auc, "f1": report.f1, "seconds": report.seconds });
    Ok(out)
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        // fails only if a global pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(command: &Command, args: &[String]) -> Result<()> {
    let start = Instant::now();
    let (name, outcome) = match command {
        Command::Simulate(a) => ("simulate", run_simulate(a)?),
        Command::Fit(a) => ("fit", run_fit(a)?),
        Command::Analyze(a) => ("analyze", run_analyze(a)?),
        Command::Measure(a) => ("measure", run_measure(a)?),
        Command::Eval(a) => ("eval", run_eval(a)?),
        Command::Replay(a) => {
            let file = File::open(&a.manifest).map_err(|e| io_context(e, &a.manifest))?;
            let manifest: RunManifest = serde_json::from_reader(BufReader::new(file))?;
            if manifest.subcommand == "replay" {
                return Err(Error::InvalidInput("a replay manifest cannot be replayed".into()));
            }
            let argv = std::iter::once("hypercopy".to_string()).chain(manifest.args.iter().cloned());
            let cli = Cli::try_parse_from(argv)
                .map_err(|e| Error::InvalidInput(format!("manifest arguments do not parse: {e}")))?;
            return execute(&cli.command, &manifest.args);
        }
    };
    let manifest = RunManifest {
        subcommand: name.into(),
        args: args.to_vec(),
        rng_seeds: outcome.seeds,
        inputs: outcome.inputs,
        outputs: outcome.outputs.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        details: outcome.details,
    };
    write_json(&manifest_path(&outcome.outputs[0]), &manifest)
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(&cli.command, &argv[1.min(argv.len())..]) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
