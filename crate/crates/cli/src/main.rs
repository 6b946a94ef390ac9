use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_core::detector::{
    calibrate_threshold, detect_log, graph_file, practical_epsilon, theorem_schedule,
    theorem_threshold_for, CalibrationOptions,
};
use hawkes_core::experiments::{
    lemma2_bound, lemma2_check, max_rate_trials, planted_confound, planted_null, planted_ring,
    run_trial, sweep, worker_count, PlantedSpec, RandomModelRanges, SweepConfig, ThresholdRule,
    TrialConfig,
};
use hawkes_core::model::validate_model;
use hawkes_core::oracle::{mc_delta_drift, mc_indicator, Pattern};
use hawkes_core::simulator::simulate_with;
use hawkes_core::{
    accumulate_all, bin_events, detect_subset, DetectorConfig, EventLog, HawkesModel, ScoreTerms,
    SimulationOptions, ThresholdSource,
};

/// Simulate non-stationary multivariate Hawkes processes and recover their
/// dependency graph from binned pair and triple event counts.
#[derive(Parser, Debug)]
#[command(name = "hawkes", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an event log from a model file
    Simulate(SimulateArgs),
    /// Check a model file against the modelling assumptions
    Validate(ValidateArgs),
    /// Dump the D1/D2 statistics of every ordered pair as CSV
    Stats(StatsArgs),
    /// Estimate the dependency graph of an event log
    Detect(DetectArgs),
    /// Monte-Carlo check of the short-window expectation formulas
    Oracle(OracleArgs),
    /// Seeded recovery trials on one model
    Experiment(ExperimentArgs),
    /// Grid of recovery trials over random models, written as CSV
    Sweep(SweepArgs),
    /// Observed peak intensity against d² ln⁴(nT) on random models
    MaxRate(MaxRateArgs),
    /// Horizon and bin width of the asymptotic recovery guarantee
    Schedule(ScheduleArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lookahead of the dominating rate
    #[arg(long, default_value_t = 0.1)]
    lookahead: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Time range of the grid; use the experiment horizon
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    events: PathBuf,
    /// Bin width; defaults to 0.05 over the largest per-node event rate
    #[arg(long)]
    epsilon: Option<f64>,
    /// Must equal the log's horizon when given
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, conflicts_with_all = ["calibrate", "theorem_model"])]
    threshold: Option<f64>,
    /// Calibrate the threshold on circular-shift surrogates of the log
    #[arg(long)]
    calibrate: bool,
    /// Use w_min w_sep μ_min / 8 from this model file's constants
    #[arg(long, value_name = "MODEL")]
    theorem_model: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    surrogates: usize,
    #[arg(long, default_value_t = 0.99)]
    quantile: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the second-order term from the score
    #[arg(long)]
    first_order_only: bool,
    /// Comma-separated node subset; only their events are read
    #[arg(long, value_delimiter = ',')]
    observed: Option<Vec<usize>>,
    /// Defaults to standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PatternArg {
    Ij,
    Ji,
    Iij,
    Iji,
    Jii,
}

impl From<PatternArg> for Pattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Ij => Pattern::Ij,
            PatternArg::Ji => Pattern::Ji,
            PatternArg::Iij => Pattern::Iij,
            PatternArg::Iji => Pattern::Iji,
            PatternArg::Jii => Pattern::Jii,
        }
    }
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Conditioning history; events before --time are kept
    #[arg(long)]
    prefix: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    #[arg(long, default_value_t = 0)]
    i: usize,
    #[arg(long, default_value_t = 1)]
    j: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    epsilon: Vec<f64>,
    /// Patterns to check; all five by default
    #[arg(long, value_enum, value_delimiter = ',')]
    pattern: Vec<PatternArg>,
    #[arg(long, default_value_t = 10_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Constant C in the envelope sigmas·stderr + C (dΛε)^(k+1)
    #[arg(long, default_value_t = 100.0)]
    envelope_c: f64,
    #[arg(long, default_value_t = 4.0)]
    sigmas: f64,
    /// Also estimate the first- and second-order drifts
    #[arg(long)]
    drift: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Planted {
    Ring,
    Confound,
    Null,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, conflicts_with = "planted", required_unless_present = "planted")]
    model: Option<PathBuf>,
    /// Built-in ring model (w = 0.8, w_ii = 1.2, β = 2, μ = 1)
    #[arg(long, value_enum)]
    planted: Option<Planted>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    epsilon: f64,
    /// `calibrated`, `theorem`, or a number
    #[arg(long, default_value = "calibrated")]
    threshold: String,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    first_order_only: bool,
    /// Grid step for the peak-intensity trace
    #[arg(long)]
    trace_step: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MaxRateArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long)]
    n: usize,
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &PathBuf) -> Result<HawkesModel> {
    HawkesModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_events(path: &PathBuf) -> Result<EventLog> {
    EventLog::load(path).with_context(|| format!("loading events {}", path.display()))
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let report = validate_model(&model, 0.05, args.horizon.min(100.0));
    if !report.passed() {
        log::warn!("model does not satisfy every assumption:\n{report}");
    }
    let opts = SimulationOptions {
        lookahead: args.lookahead,
    };
    let (log, stats) = simulate_with(&model, args.horizon, args.seed, &opts)?;
    log.save(&args.out)?;
    eprintln!(
        "{} events written to {} ({} candidates, {} refreshes)",
        log.len(),
        args.out.display(),
        stats.candidates,
        stats.refreshes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let report = validate_model(&model, args.grid_step, args.horizon);
    print!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode> {
    let log = load_events(&args.events)?;
    let stats = accumulate_all(&bin_events(&log, args.epsilon)?);
    let mut buf = Vec::new();
    stats.write_csv(&mut buf)?;
    write_output(args.out.as_ref(), &String::from_utf8(buf)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_detect(args: DetectArgs) -> Result<ExitCode> {
    let log = load_events(&args.events)?;
    let epsilon = args.epsilon.unwrap_or_else(|| practical_epsilon(&log));
    let horizon = args.horizon.unwrap_or(log.horizon);
    let terms = if args.first_order_only {
        ScoreTerms::FirstOrderOnly
    } else {
        ScoreTerms::Full
    };
    let (threshold, source) = if let Some(h) = args.threshold {
        (h, ThresholdSource::User)
    } else if let Some(path) = &args.theorem_model {
        (
            theorem_threshold_for(&load_model(path)?)?,
            ThresholdSource::Theorem,
        )
    } else if args.calibrate {
        let opts = CalibrationOptions {
            surrogates: args.surrogates,
            quantile: args.quantile,
            terms,
        };
        (
            calibrate_threshold(&log, epsilon, &opts, args.seed)?.threshold,
            ThresholdSource::Calibrated,
        )
    } else {
        bail!("choose one of --threshold, --calibrate or --theorem-model");
    };
    let config = DetectorConfig::new(epsilon, horizon, threshold, source)?.with_terms(terms);
    let graph = match &args.observed {
        Some(nodes) => detect_subset(
            &log,
            &nodes.iter().copied().collect::<BTreeSet<_>>(),
            &config,
        )?,
        None => detect_log(&log, &config)?,
    };
    write_output(args.out.as_ref(), &graph_file(&graph, &config))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let prefix = match &args.prefix {
        Some(p) => load_events(p)?,
        None => EventLog::new(model.node_count(), args.time.max(1.0), Vec::new())?,
    };
    let patterns: Vec<Pattern> = if args.pattern.is_empty() {
        Pattern::ALL.to_vec()
    } else {
        args.pattern.iter().map(|&p| p.into()).collect()
    };
    println!(
        "{:<7} {:>8} {:>10} {:>12} {:>10} {:>12} {:>11} {:>11}  status",
        "pattern",
        "epsilon",
        "trials",
        "estimate",
        "stderr",
        "predicted",
        "discrepancy",
        "envelope"
    );
    let mut breaches = 0;
    for (k, &eps) in args.epsilon.iter().enumerate() {
        for (p, &pattern) in patterns.iter().enumerate() {
            let seed = args.seed.wrapping_add((k * patterns.len() + p) as u64);
            let r = mc_indicator(
                &model,
                &prefix,
                args.time,
                eps,
                pattern,
                (args.i, args.j),
                args.trials,
                seed,
            )?;
            let envelope = r.envelope(args.envelope_c, args.sigmas);
            let ok = r.discrepancy <= envelope;
            breaches += usize::from(!ok);
            println!(
                "{:<7} {:>8} {:>10} {:>12.4e} {:>10.2e} {:>12.4e} {:>11.2e} {:>11.2e}  {}",
                pattern.as_str(),
                eps,
                r.trials,
                r.estimate,
                r.std_error,
                r.predicted,
                r.discrepancy,
                envelope,
                if ok { "ok" } else { "BREACH" }
            );
        }
        if args.drift {
            let r = mc_delta_drift(
                &model,
                &prefix,
                args.time,
                eps,
                (args.i, args.j),
                args.trials,
                args.seed ^ 0xd1,
            )?;
            println!(
                "drift eps={eps}: D1/eps^2 {:.4} +- {:.4} (predicted {:.4}), D2/eps^3 {:.4} +- {:.4} (predicted {:.4})",
                r.first.estimate,
                r.first.std_error,
                r.first.predicted,
                r.second.estimate,
                r.second.std_error,
                r.second.predicted
            );
        }
    }
    Ok(if breaches == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let spec = PlantedSpec {
        n: args.n,
        ..PlantedSpec::default()
    };
    let model = match (args.planted, &args.model) {
        (Some(Planted::Ring), _) => planted_ring(&spec)?,
        (Some(Planted::Confound), _) => planted_confound(&spec, 2.5)?.0,
        (Some(Planted::Null), _) => planted_null(&spec)?,
        (None, Some(path)) => load_model(path)?,
        (None, None) => bail!("--model or --planted is required"),
    };
    let rule: ThresholdRule = args.threshold.parse()?;
    let terms = if args.first_order_only {
        ScoreTerms::FirstOrderOnly
    } else {
        ScoreTerms::Full
    };
    let config = TrialConfig {
        terms,
        trace_step: args.trace_step,
        ..TrialConfig::new(args.horizon, args.epsilon, rule)
    };
    println!("seed,threshold,edges_true,edges_found,precision,recall,exact,events,sup_intensity,wall_seconds");
    let mut exact = 0;
    for k in 0..args.seeds {
        let seed = args.seed + k;
        let r = run_trial(&model, &config, seed)?;
        exact += u64::from(r.exact);
        println!(
            "{seed},{},{},{},{:.4},{:.4},{},{},{},{:.2}",
            r.config.threshold,
            r.edges_true,
            r.edges_found,
            r.precision,
            r.recall,
            r.exact,
            r.events,
            r.sup_intensity.map(|v| v.to_string()).unwrap_or_default(),
            r.wall_seconds
        );
    }
    eprintln!("exact recovery in {exact}/{} seeds", args.seeds);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let config = SweepConfig::load(&args.config)?;
    let workers = worker_count();
    let out = sweep(&config, &args.out, workers)?;
    let failed = out.rows.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!(
        "{} rows ({} failed) in {}; computed {} cells with {workers} workers",
        out.rows.len(),
        failed,
        args.out.join("results.csv").display(),
        out.computed_cells.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_max_rate(args: MaxRateArgs) -> Result<ExitCode> {
    let obs = max_rate_trials(
        args.n,
        args.d,
        args.horizon,
        args.trials,
        args.seed,
        &RandomModelRanges::default(),
        args.grid_step,
    )?;
    let r = lemma2_check(&obs);
    let peak = obs.iter().map(|o| o.sup_intensity).fold(0.0, f64::max);
    println!(
        "bound d^2 ln^4(nT) = {:.4e}",
        lemma2_bound(args.n, args.d, args.horizon)
    );
    println!("largest observed sup rate = {peak:.4}");
    println!(
        "violations = {}/{}, max ratio = {:.4e}",
        r.violations, r.trials, r.max_ratio
    );
    Ok(if r.violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_schedule(args: ScheduleArgs) -> Result<ExitCode> {
    let s = theorem_schedule(args.n)?;
    println!("T = {:e}\nepsilon = {:e}", s.horizon, s.epsilon);
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::MaxRate(a) => cmd_max_rate(a),
        Command::Schedule(a) => cmd_schedule(a),
    }
}
