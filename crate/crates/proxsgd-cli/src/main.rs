//! Command-line front end: training runs (threaded engine), simulated runs,
//! the ProxGD baseline, reference computation, speedup sweeps, schedule
//! checks and the lemma self-test.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a runtime error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxsgd::core::{Mode, RunConfig, RunOutput};
use proxsgd::data::{self, Dataset};
use proxsgd::engine::{run_async, EngineOptions};
use proxsgd::harness::{
    self, compute_reference, load_reference, run_proxgd, save_reference, speedup_sweep,
};
use proxsgd::objectives::{ObjectiveKind, ObjectiveSpec};
use proxsgd::schedule::{check_theorem_conditions, materialize, StepSchedule};
use proxsgd::selftest::run_lemma_suites;
use proxsgd::sim::{run_sim, DelayKind, DelaySchedule};

#[derive(Parser, Debug)]
#[command(name = "proxsgd", version, about = "Asynchronous proximal SGD engine and harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the threaded parameter-server engine (real asynchrony).
    Train(RunArgs),
    /// Run the deterministic delayed-gradient simulator.
    Simulate(RunArgs),
    /// Run deterministic proximal gradient descent (full gradients).
    Baseline(RunArgs),
    /// Compute and persist a reference solution for a dataset.
    Reference(ReferenceArgs),
    /// Sweep worker counts (1, 2, 4, 8) and emit a speedup table.
    Speedup(SpeedupArgs),
    /// Check a step schedule against the theoretical conditions.
    Check(CheckArgs),
    /// Run the lemma property suites.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// LIBSVM dataset path (a9a/mnist file names pin d to published values)
    #[arg(long)]
    data: PathBuf,
    /// Objective: nnpca or logreg
    #[arg(long, default_value = "nnpca")]
    objective: String,
    /// l1 weight for logreg
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Mini-batch size N per update
    #[arg(long, default_value_t = 8192)]
    batch: usize,
    /// Worker count m (N must divide by m)
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Staleness bound T (simulator enforces; engine only observes)
    #[arg(long, default_value_t = 0)]
    max_delay: u64,
    /// Total model updates K
    #[arg(long, default_value_t = 200)]
    updates: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Step schedule: const:ETA | tinv:ETA0,ETAP,KP | corollary
    #[arg(long, default_value = "tinv:2.0,1,100")]
    eta_schedule: String,
    /// Evaluate metrics every this many updates
    #[arg(long, default_value_t = 10)]
    metric_stride: u64,
    /// Delay schedule (simulate only): zero | const:TAU | uniform | geom:P
    /// (bounds come from --max-delay)
    #[arg(long, default_value = "zero")]
    delay_schedule: String,
    /// Write the metric rows as CSV here (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReferenceArgs {
    #[command(flatten)]
    data: DataArgs,
    /// ProxGD iterations per restart
    #[arg(long, default_value_t = 2000)]
    updates: u64,
    /// Random restarts
    #[arg(long, default_value_t = 5)]
    restarts: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory for the reference file (default: alongside the dataset)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpeedupArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 8192)]
    batch: usize,
    #[arg(long, default_value_t = 200)]
    updates: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "tinv:2.0,1,100")]
    eta_schedule: String,
    /// Suboptimality level the crossing times are measured at
    #[arg(long, default_value_t = 1e-3)]
    target: f64,
    /// Reference directory (computed there if absent)
    #[arg(long)]
    ref_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Step schedule to check
    #[arg(long, default_value = "const:0.0625")]
    eta_schedule: String,
    #[arg(long, default_value_t = 0)]
    max_delay: u64,
    /// Horizon K the schedule is materialized over
    #[arg(long, default_value_t = 200)]
    updates: u64,
    /// Gradient Lipschitz constant (1 = NN-PCA on normalized data)
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(DispatchError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(DispatchError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

enum DispatchError {
    Usage(String),
    Runtime(proxsgd::Error),
}

impl From<proxsgd::Error> for DispatchError {
    fn from(e: proxsgd::Error) -> Self {
        match e {
            proxsgd::Error::InvalidInput(msg) => DispatchError::Usage(msg),
            other => DispatchError::Runtime(other),
        }
    }
}

type DResult<T> = std::result::Result<T, DispatchError>;

fn usage(msg: impl Into<String>) -> DispatchError {
    DispatchError::Usage(msg.into())
}

fn parse_objective(s: &str) -> DResult<ObjectiveKind> {
    match s {
        "nnpca" => Ok(ObjectiveKind::NnPca),
        "logreg" => Ok(ObjectiveKind::LogisticL1),
        other => Err(usage(format!("unknown objective '{other}' (nnpca|logreg)"))),
    }
}

fn parse_eta_schedule(spec: &str) -> DResult<EtaSpec> {
    if spec == "corollary" {
        return Ok(EtaSpec::Corollary);
    }
    if let Some(rest) = spec.strip_prefix("const:") {
        let eta: f64 = rest
            .parse()
            .map_err(|_| usage(format!("bad constant step '{rest}'")))?;
        return Ok(EtaSpec::Fixed(
            StepSchedule::constant(eta).map_err(DispatchError::from)?,
        ));
    }
    if let Some(rest) = spec.strip_prefix("tinv:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(usage(format!(
                "t-inverse schedule needs tinv:ETA0,ETAP,KP, got '{spec}'"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| usage(format!("bad t-inverse parameter in '{spec}'")))?;
        return Ok(EtaSpec::Fixed(
            StepSchedule::t_inverse(nums[0], nums[1], nums[2]).map_err(DispatchError::from)?,
        ));
    }
    Err(usage(format!(
        "unknown step schedule '{spec}' (const:ETA | tinv:ETA0,ETAP,KP | corollary)"
    )))
}

enum EtaSpec {
    Fixed(StepSchedule),
    Corollary,
}

fn parse_delay_schedule(spec: &str, bound: u64, seed: u64) -> DResult<DelaySchedule> {
    let kind = if spec == "zero" {
        return Ok(DelaySchedule::zero());
    } else if spec == "uniform" {
        DelayKind::UniformRandom
    } else if let Some(rest) = spec.strip_prefix("const:") {
        let tau: u64 = rest
            .parse()
            .map_err(|_| usage(format!("bad constant delay '{rest}'")))?;
        DelayKind::ConstantTau(tau)
    } else if let Some(rest) = spec.strip_prefix("geom:") {
        let p: f64 = rest
            .parse()
            .map_err(|_| usage(format!("bad geometric parameter '{rest}'")))?;
        DelayKind::GeometricCapped { p }
    } else {
        return Err(usage(format!(
            "unknown delay schedule '{spec}' (zero | const:TAU | uniform | geom:P)"
        )));
    };
    DelaySchedule::new(kind, bound, seed).map_err(DispatchError::from)
}

fn load_dataset(args: &DataArgs) -> DResult<(Dataset, ObjectiveSpec, u64)> {
    if !args.data.exists() {
        return Err(usage(format!("dataset {} not found", args.data.display())));
    }
    let fingerprint = data::file_fingerprint(&args.data).map_err(DispatchError::Runtime)?;
    let kind = parse_objective(&args.objective)?;
    let data = Dataset::load(&args.data, None)
        .map_err(DispatchError::Runtime)?
        .normalize()
        .map_err(DispatchError::Runtime)?;
    let obj = ObjectiveSpec::resolve(kind, args.lambda, &data).map_err(DispatchError::Runtime)?;
    Ok((data, obj, fingerprint))
}

fn build_config(args: &RunArgs, mode: Mode) -> DResult<RunConfig> {
    let mut cfg = RunConfig::new(args.batch, args.workers, args.updates, args.seed, mode);
    cfg.data_path = Some(args.data.data.clone());
    cfg.max_delay = args.max_delay;
    cfg.metric_stride = args.metric_stride;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_steps(
    spec: &EtaSpec,
    data: &Dataset,
    obj: &ObjectiveSpec,
    cfg: &RunConfig,
) -> DResult<StepSchedule> {
    match spec {
        EtaSpec::Fixed(s) => Ok(s.clone()),
        EtaSpec::Corollary => {
            let (sched, meta) = harness::resolve_corollary_schedule(data, obj, cfg, None)?;
            eprintln!(
                "corollary schedule: eta={:.6e} (psi_gap={:.6e} from {}, sigma^2={:.6e}, L={})",
                meta.eta, meta.psi_gap, meta.psi_gap_source, meta.sigma_sq, meta.lipschitz
            );
            Ok(sched)
        }
    }
}

fn emit_output(out: &RunOutput, path: &Option<PathBuf>) -> DResult<()> {
    match path {
        Some(p) => harness::write_records_csv(&out.records, p)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            harness::emit_records_csv(&out.records, &mut lock)?;
            lock.flush().map_err(proxsgd::Error::from)?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> DResult<()> {
    match cli.command {
        Command::Train(args) => {
            let (data, obj, _) = load_dataset(&args.data)?;
            let cfg = build_config(&args, Mode::Async)?;
            let steps = resolve_steps(&parse_eta_schedule(&args.eta_schedule)?, &data, &obj, &cfg)?;
            let out = run_async(&cfg, &data, &obj, &steps, &EngineOptions::default())?;
            emit_output(&out, &args.out)?;
            eprintln!(
                "train: K={} final objective {:.6e} max staleness {}",
                cfg.updates_k,
                out.records.last().map(|r| r.objective).unwrap_or(f64::NAN),
                out.max_staleness
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let (data, obj, _) = load_dataset(&args.data)?;
            let cfg = build_config(&args, Mode::Simulated)?;
            let steps = resolve_steps(&parse_eta_schedule(&args.eta_schedule)?, &data, &obj, &cfg)?;
            let delays = parse_delay_schedule(&args.delay_schedule, args.max_delay, args.seed)?
                .with_worker_groups(cfg.workers_m);
            let out = run_sim(&cfg, &data, &obj, &steps, &delays, false)?;
            emit_output(&out, &args.out)?;
            eprintln!(
                "simulate: K={} final objective {:.6e} max staleness {}",
                cfg.updates_k,
                out.records.last().map(|r| r.objective).unwrap_or(f64::NAN),
                out.max_staleness
            );
            Ok(())
        }
        Command::Baseline(args) => {
            let (data, obj, _) = load_dataset(&args.data)?;
            let mut cfg = build_config(&args, Mode::Sequential)?;
            cfg.workers_m = 1;
            let spec = parse_eta_schedule(&args.eta_schedule)?;
            let steps = match spec {
                // the deterministic baseline defaults to the safe 1/L step
                EtaSpec::Fixed(s) => s,
                EtaSpec::Corollary => StepSchedule::constant(1.0 / obj.lipschitz)?,
            };
            let out = run_proxgd(&cfg, &data, &obj, &steps, false)?;
            emit_output(&out, &args.out)?;
            Ok(())
        }
        Command::Reference(args) => {
            let (data, obj, fingerprint) = load_dataset(&args.data)?;
            let dir = args
                .out
                .clone()
                .or_else(|| args.data.data.parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let reference = compute_reference(
                &data,
                &obj,
                args.updates,
                args.restarts,
                args.seed,
                fingerprint,
            )?;
            let path = save_reference(&reference, &dir)?;
            println!(
                "reference value {:.17e} ({} restarts x {} iters) -> {}",
                reference.value,
                reference.restarts,
                reference.iters_per_restart,
                path.display()
            );
            Ok(())
        }
        Command::Speedup(args) => {
            let (data, obj, fingerprint) = load_dataset(&args.data)?;
            let mut cfg = RunConfig::new(args.batch, 1, args.updates, args.seed, Mode::Simulated);
            cfg.metric_stride = 1;
            cfg.validate()?;
            let ps = [1usize, 2, 4, 8];
            if ps.iter().any(|&p| args.batch % p != 0) {
                return Err(usage(format!(
                    "batch {} must divide by every worker count in {:?}",
                    args.batch, ps
                )));
            }
            let dir = args
                .ref_dir
                .clone()
                .or_else(|| args.data.data.parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let reference = match load_reference(&dir, fingerprint)? {
                Some(r) => r,
                None => {
                    eprintln!("no reference on disk; computing one (5 restarts x 2000 iters)");
                    let r = compute_reference(&data, &obj, 2000, 5, args.seed, fingerprint)?;
                    save_reference(&r, &dir)?;
                    r
                }
            };
            let steps = resolve_steps(&parse_eta_schedule(&args.eta_schedule)?, &data, &obj, &cfg)?;
            let (table, _) = speedup_sweep(
                &data,
                &obj,
                &steps,
                &reference,
                &cfg,
                &ps,
                args.target,
            )?;
            match &args.out {
                Some(p) => harness::write_speedup_csv(&table, p)?,
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    harness::emit_speedup_csv(&table, &mut lock)?;
                    lock.flush().map_err(proxsgd::Error::from)?;
                }
            }
            Ok(())
        }
        Command::Check(args) => {
            let spec = parse_eta_schedule(&args.eta_schedule)?;
            let steps = match spec {
                EtaSpec::Fixed(s) => s,
                EtaSpec::Corollary => {
                    return Err(usage(
                        "check needs an explicit schedule; corollary schedules depend on a dataset"
                            .to_string(),
                    ))
                }
            };
            let etas = materialize(&steps, args.updates);
            let report = check_theorem_conditions(&etas, args.lipschitz, args.max_delay);
            println!("{report}");
            Ok(())
        }
        Command::Selftest(args) => {
            let reports = run_lemma_suites(args.trials, args.seed)?;
            let mut all_ok = true;
            for r in &reports {
                println!("{r}");
                all_ok &= r.passed();
            }
            if !all_ok {
                return Err(DispatchError::Runtime(proxsgd::Error::InvalidInput(
                    "lemma suite failed".into(),
                )));
            }
            Ok(())
        }
    }
}
