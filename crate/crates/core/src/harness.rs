//! Command-line front end: single solves, batches, schedule validation and
//! oracle queries, with CSV traces and JSON summaries.
//!
//! Exit codes: 0 feasible / success, 2 no feasible schedule or infeasible
//! schedule, 1 usage, I/O or parse errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instance::{parse_sm, InstanceError, ProjectInstance};
use crate::optimizer::{solve, ConvergenceTrace, SolveError, SolveOutcome, SolverConfig, TraceRecord};
use crate::scalar::Scalar;
use crate::schedule::{
    brute_force_optimal, check_feasible, critical_path, ssgs, PriorityRule, Schedule, ScheduleError,
    ScheduleViolation, BRUTE_FORCE_LIMIT,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Trace CSV header, in column order.
pub const TRACE_COLUMNS: [&str; 10] = [
    "epoch",
    "loss",
    "makespan_soft",
    "prec_viol_max",
    "res_viol_max",
    "lambda_p",
    "lambda_r",
    "lr",
    "beta",
    "best_feasible_makespan",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: InstanceError },
    #[error("{0}")]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Schedule(#[from] ScheduleError),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PrecedenceOnly,
    Full,
}

/// Every setting that influences a run's result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSettings {
    pub solver: SolverConfig,
    pub precision: Precision,
}

impl RunSettings {
    /// Hex SHA-256 of the settings' canonical JSON, seed included.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Machine-readable outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub seed: u64,
    pub mode: Mode,
    pub best_makespan: Option<u32>,
    pub critical_path: u32,
    pub ssgs_makespan: Option<u32>,
    pub epochs_run: usize,
    pub early_stop_epoch: Option<usize>,
    pub wall_clock_seconds: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub config_fingerprint: String,
    pub config: SolverConfig,
    pub precision: Precision,
    /// Best-known makespan supplied by the caller; no comparison is made against it.
    pub reference_makespan: Option<u32>,
    pub schedule: Option<Schedule>,
}

/// Reads a PSPLIB `.sm` file, or the canonical JSON form when the extension is `.json`.
pub fn load_instance(path: &Path) -> Result<ProjectInstance, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        ProjectInstance::from_json(&text)
    } else {
        parse_sm(&text, &name)
    };
    parsed.map_err(|source| HarnessError::Instance {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn solve_as<T: Scalar>(inst: &ProjectInstance, cfg: &SolverConfig) -> Result<(SolveOutcome<T>, f64), SolveError> {
    let t0 = Instant::now();
    let out = solve::<T>(inst, cfg)?;
    Ok((out, t0.elapsed().as_secs_f64()))
}

/// Solves one instance and assembles its summary.
pub fn run_instance(
    inst: &ProjectInstance,
    settings: &RunSettings,
    reference_makespan: Option<u32>,
) -> Result<(RunSummary, ConvergenceTrace), HarnessError> {
    let cfg = &settings.solver;
    let prec_only = cfg.relaxation.precedence_only;
    let baseline_inst = if prec_only {
        inst.without_resources()
    } else {
        inst.clone()
    };
    let cp = critical_path(inst)?;
    let ssgs_makespan = ssgs(&baseline_inst, PriorityRule::default()).ok().map(|s| s.makespan);
    let (best, trace, lambdas, secs) = match settings.precision {
        Precision::F64 => {
            let (o, secs) = solve_as::<f64>(inst, cfg)?;
            (o.best, o.trace, (o.lambda_p, o.lambda_r), secs)
        }
        Precision::F32 => {
            let (o, secs) = solve_as::<f32>(inst, cfg)?;
            (o.best, o.trace, (o.lambda_p, o.lambda_r), secs)
        }
    };
    let summary = RunSummary {
        instance: inst.name.clone(),
        seed: cfg.optimizer.seed,
        mode: if prec_only { Mode::PrecedenceOnly } else { Mode::Full },
        best_makespan: best.as_ref().map(|s| s.makespan),
        critical_path: cp,
        ssgs_makespan,
        epochs_run: trace.records.len(),
        early_stop_epoch: trace.early_stop_epoch,
        wall_clock_seconds: secs,
        lambda_p: lambdas.0,
        lambda_r: lambdas.1,
        config_fingerprint: settings.fingerprint(),
        config: *cfg,
        precision: settings.precision,
        reference_makespan,
        schedule: best,
    };
    Ok((summary, trace))
}

#[derive(Debug, Parser)]
#[command(name = "rcpsp", version, about = "Gradient-based RCPSP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Solve every instance in a directory.
    Batch(BatchArgs),
    /// Check a schedule against an instance.
    Validate(ValidateArgs),
    /// Run a classical oracle on an instance.
    Oracle(OracleArgs),
}

/// Overrides for every solver setting; unset flags keep the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub precedence_only: bool,
    /// Epoch budget.
    #[arg(long, alias = "max-epochs")]
    pub epochs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    /// Right-shift repair of rounded candidates before checking.
    #[arg(long)]
    pub repair: bool,

    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    pub reheat_period: Option<usize>,
    #[arg(long)]
    pub plateau_window: Option<usize>,
    #[arg(long)]
    pub perturb_sigma: Option<f64>,
    #[arg(long)]
    pub stop_violation_eps: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub reset_moments: Option<bool>,
    #[arg(long)]
    pub stabilization_window: Option<usize>,

    #[arg(long)]
    pub beta_start: Option<f64>,
    #[arg(long)]
    pub beta_end: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tau_ramp: bool,
    #[arg(long)]
    pub lambda_p0: Option<f64>,
    #[arg(long)]
    pub lambda_r0: Option<f64>,
    #[arg(long)]
    pub lambda_h: Option<f64>,

    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub escalate_factor: Option<f64>,
    #[arg(long)]
    pub reduce_factor: Option<f64>,
    #[arg(long)]
    pub recover_factor: Option<f64>,
    #[arg(long)]
    pub small_violation_eps: Option<f64>,
    #[arg(long)]
    pub stable_rel_change: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub update_period: Option<usize>,
}

impl ConfigArgs {
    pub fn settings(&self, seed: u64) -> RunSettings {
        let mut c = SolverConfig::default();
        c.optimizer.seed = seed;
        c.relaxation.precedence_only = self.precedence_only;
        c.relaxation.tau_ramp = self.tau_ramp;
        c.repair = self.repair;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            epochs => c.optimizer.max_epochs,
            lr0 => c.optimizer.lr0,
            adam_beta1 => c.optimizer.adam_beta1,
            adam_beta2 => c.optimizer.adam_beta2,
            adam_eps => c.optimizer.adam_eps,
            reheat_period => c.optimizer.reheat_period,
            plateau_window => c.optimizer.plateau_window,
            perturb_sigma => c.optimizer.perturb_sigma,
            stop_violation_eps => c.optimizer.stop_violation_eps,
            grad_clip => c.optimizer.grad_clip,
            reset_moments => c.optimizer.reset_moments,
            stabilization_window => c.optimizer.stabilization_window,
            beta_start => c.relaxation.beta_start,
            beta_end => c.relaxation.beta_end,
            tau => c.relaxation.tau,
            lambda_p0 => c.relaxation.lambda_p0,
            lambda_r0 => c.relaxation.lambda_r0,
            lookback => c.penalty.lookback,
            escalate_factor => c.penalty.escalate_factor,
            reduce_factor => c.penalty.reduce_factor,
            recover_factor => c.penalty.recover_factor,
            small_violation_eps => c.penalty.small_violation_eps,
            stable_rel_change => c.penalty.stable_rel_change,
            lambda_min => c.penalty.lambda_min,
            lambda_max => c.penalty.lambda_max,
            update_period => c.penalty.update_period,
        }
        if self.lambda_h.is_some() {
            c.relaxation.lambda_h = self.lambda_h;
        }
        RunSettings {
            solver: c,
            precision: self.precision,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub path: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the per-epoch trace CSV here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the summary JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Best-known makespan, recorded in the summary as is.
    #[arg(long)]
    pub reference_makespan: Option<u32>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub dir: PathBuf,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    /// Only the first N instances in file-name order.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for per-run trace CSVs.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Per-run summary table (CSV); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate JSON; stdout when absent.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub instance: PathBuf,
    /// JSON with a `start` array (a solve summary works too).
    pub schedule: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Cp,
    Ssgs,
    Brute,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub instance: PathBuf,
    #[arg(value_enum)]
    pub which: OracleKind,
    /// Largest non-dummy activity count accepted by `brute`.
    #[arg(long, default_value_t = BRUTE_FORCE_LIMIT)]
    pub limit: usize,
}

/// Parses arguments, runs the command, and returns its exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Writes to stdout; a closed reader (broken pipe) is not an error.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            emit(&format!("{text}\n"));
            Ok(())
        }
    }
}

fn write_trace_file(path: &Path, trace: &ConvergenceTrace) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_trace_csv(&trace.records, io::BufWriter::new(file))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, HarnessError> {
    let inst = load_instance(&args.path)?;
    let settings = args.config.settings(args.seed);
    let (summary, trace) = run_instance(&inst, &settings, args.reference_makespan)?;
    if let Some(p) = &args.trace {
        write_trace_file(p, &trace)?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_output(args.out.as_deref(), &json)?;
    Ok(if summary.best_makespan.is_some() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// One row of the batch table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub instance: String,
    pub seed: u64,
    pub mode: Mode,
    pub best_makespan: Option<u32>,
    pub critical_path: u32,
    pub ssgs_makespan: Option<u32>,
    pub epochs_run: usize,
    pub early_stop_epoch: Option<usize>,
    pub wall_clock_seconds: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub config_fingerprint: String,
}

impl From<&RunSummary> for BatchRow {
    fn from(s: &RunSummary) -> Self {
        BatchRow {
            instance: s.instance.clone(),
            seed: s.seed,
            mode: s.mode,
            best_makespan: s.best_makespan,
            critical_path: s.critical_path,
            ssgs_makespan: s.ssgs_makespan,
            epochs_run: s.epochs_run,
            early_stop_epoch: s.early_stop_epoch,
            wall_clock_seconds: s.wall_clock_seconds,
            lambda_p: s.lambda_p,
            lambda_r: s.lambda_r,
            config_fingerprint: s.config_fingerprint.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregate {
    pub runs: usize,
    pub feasible: usize,
    /// Mean of `(makespan - critical_path) / critical_path` over feasible runs.
    pub mean_gap_to_critical_path: Option<f64>,
    pub mean_wall_clock_seconds: f64,
}

pub fn aggregate(rows: &[BatchRow]) -> BatchAggregate {
    let gaps: Vec<f64> = rows
        .iter()
        .filter_map(|r| {
            r.best_makespan
                .map(|m| (f64::from(m) - f64::from(r.critical_path)) / f64::from(r.critical_path.max(1)))
        })
        .collect();
    BatchAggregate {
        runs: rows.len(),
        feasible: gaps.len(),
        mean_gap_to_critical_path: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        mean_wall_clock_seconds: if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.wall_clock_seconds).sum::<f64>() / rows.len() as f64
        },
    }
}

/// `.sm` files in a directory, sorted by file name.
pub fn list_instances(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "sm"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_batch(args: &BatchArgs) -> Result<i32, HarnessError> {
    let mut files = list_instances(&args.dir)?;
    if let Some(n) = args.limit {
        files.truncate(n);
    }
    if files.is_empty() {
        return Err(HarnessError::Usage(format!("no .sm files in {}", args.dir.display())));
    }
    if args.seeds.is_empty() {
        return Err(HarnessError::Usage("empty seed list".into()));
    }
    if let Some(dir) = &args.trace {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let instances = files
        .iter()
        .map(|p| load_instance(p))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..instances.len())
        .flat_map(|i| args.seeds.iter().map(move |&s| (i, s)))
        .collect();

    let work = || {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let inst = &instances[i];
                let (summary, trace) = run_instance(inst, &args.config.settings(seed), None)?;
                if let Some(dir) = &args.trace {
                    write_trace_file(&dir.join(format!("{}_s{seed}.csv", inst.name)), &trace)?;
                }
                Ok(BatchRow::from(&summary))
            })
            .collect::<Result<Vec<BatchRow>, HarnessError>>()
    };
    let rows = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::Usage(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut table = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        table.serialize(r)?;
    }
    let table = String::from_utf8(table.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8");
    match &args.out {
        Some(p) => fs::write(p, &table).map_err(io_err(p))?,
        None => emit(&table),
    }
    let agg = aggregate(&rows);
    let json = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
    write_output(args.aggregate.as_deref(), &json)?;
    Ok(if agg.feasible == agg.runs {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// Schedule file accepted by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    #[serde(default)]
    pub instance: Option<String>,
    pub start: Vec<u32>,
    #[serde(default)]
    pub makespan: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub instance: String,
    pub feasible: bool,
    pub makespan: u32,
    pub violations: Vec<ScheduleViolation>,
}

fn read_schedule(path: &Path) -> Result<ScheduleDocument, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    // a solve summary nests the schedule
    let inner = match value.get("schedule") {
        Some(s) if !s.is_null() && value.get("start").is_none() => s.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32, HarnessError> {
    let inst = load_instance(&args.instance)?;
    let doc = read_schedule(&args.schedule)?;
    if doc.start.len() != inst.n() {
        return Err(HarnessError::Usage(format!(
            "schedule has {} start times, instance has {} activities",
            doc.start.len(),
            inst.n()
        )));
    }
    let sched = Schedule::new(doc.start, &inst.durations);
    let mut violations = Vec::new();
    if let Some(declared) = doc.makespan {
        if declared != sched.makespan {
            violations.push(ScheduleViolation::Makespan {
                declared,
                actual: sched.makespan,
            });
        }
    }
    violations.extend(check_feasible(&sched, &inst));
    for v in &violations {
        eprintln!("{v}");
    }
    let report = FeasibilityReport {
        instance: inst.name.clone(),
        feasible: violations.is_empty(),
        makespan: sched.makespan,
        violations,
    };
    emit(&format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")));
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub instance: String,
    pub oracle: &'static str,
    pub makespan: u32,
    pub schedule: Option<Schedule>,
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<i32, HarnessError> {
    let inst = load_instance(&args.instance)?;
    let (oracle, makespan, schedule) = match args.which {
        OracleKind::Cp => ("cp", critical_path(&inst)?, None),
        OracleKind::Ssgs => {
            let s = ssgs(&inst, PriorityRule::default())?;
            ("ssgs", s.makespan, Some(s))
        }
        OracleKind::Brute => {
            let s = brute_force_optimal(&inst, args.limit)?;
            ("brute", s.makespan, Some(s))
        }
    };
    let result = OracleResult {
        instance: inst.name.clone(),
        oracle,
        makespan,
        schedule,
    };
    emit(&format!("{}\n", serde_json::to_string_pretty(&result).expect("result serializes")));
    Ok(EXIT_OK)
}
