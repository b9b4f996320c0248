use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gmrf_infogeo::curve::FisherCurve;
use gmrf_infogeo::rng::{replica_seed, stream_rng, STREAM_INITIAL_FIELD};
use gmrf_infogeo::trajectory::format_real;
use gmrf_infogeo::{
    analyze, build_fisher_curve, export_curve, hysteresis_gap, read_trajectory_csv, run_schedule_with,
    write_trajectory_csv, Component, Configuration, CurveFormat, FisherTensor, Leg, SamplerKind, ScheduleMode,
    Snapshot, SnapshotAnalysis,
};
use rayon::prelude::*;
use serde::Serialize;

mod config;

use config::RunConfig;

const THREADS_ENV: &str = "GMRF_INFOGEO_THREADS";

#[derive(Parser)]
#[command(name = "gmrf-infogeo", version, about = "Simulate Gaussian-Markov random fields and track their information geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a β schedule and write trajectory.csv and run_meta.json
    Simulate(SimulateArgs),
    /// Estimate parameters, entropy and both metric tensors from a snapshot
    Analyze(AnalyzeArgs),
    /// Split a trajectory into forward and backward Fisher curves
    Curve(CurveArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// key = value settings file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    mu0: Option<f64>,
    /// Initial σ²
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_beta: Option<f64>,
    /// Override the number of steps per leg
    #[arg(long)]
    steps_per_leg: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ScheduleMode>,
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<SamplerKind>,
    /// Random-walk step; defaults to the current √σ²
    #[arg(long, allow_hyphen_values = true)]
    proposal_std: Option<f64>,
    #[arg(long)]
    sweeps_per_step: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write step_<k>.snap after every step
    #[arg(long)]
    dump_snapshots: bool,
    /// Independent chains, each in out/replica_<i>
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    snapshot: PathBuf,
    /// Print one JSON object instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CurveArgs {
    trajectory: PathBuf,
    /// mumu, s2s2, s2b or bb
    #[arg(long, default_value = "bb")]
    component: String,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output directory; defaults to the trajectory's directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<ScheduleMode, String> {
    s.parse().map_err(|e: gmrf_infogeo::Error| e.to_string())
}

fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    s.parse().map_err(|e: gmrf_infogeo::Error| e.to_string())
}

/// Usage and configuration problems exit with 2, everything else with 1.
enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

trait UsageContext<T> {
    fn usage(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Curve(args) => curve_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn build_config(args: &SimulateArgs) -> anyhow::Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(path) = &args.config {
        c.apply_file(path)?;
    }
    macro_rules! over {
        ($($field:ident <- $arg:ident),* $(,)?) => {
            $(if let Some(v) = args.$arg.clone() { c.$field = v; })*
        };
    }
    over!(
        rows <- rows,
        cols <- cols,
        mu0 <- mu0,
        sigma2_0 <- sigma2,
        beta_min <- beta_min,
        beta_max <- beta_max,
        delta_beta <- delta_beta,
        mode <- mode,
        sampler <- sampler,
        sweeps_per_step <- sweeps_per_step,
        seed <- seed,
        out_dir <- out,
        replicas <- replicas,
    );
    if args.steps_per_leg.is_some() {
        c.steps_per_leg = args.steps_per_leg;
    }
    if args.proposal_std.is_some() {
        c.proposal_std = args.proposal_std;
    }
    if args.dump_snapshots {
        c.dump_snapshots = true;
    }
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    replica: usize,
    seed: u64,
    records: usize,
    degenerate_records: usize,
}

fn thread_limit() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err(anyhow!("{THREADS_ENV} must be positive"));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow!("{THREADS_ENV}: {e}")),
    }
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let config = build_config(&args).usage()?;
    let threads = thread_limit().usage()?;
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))
        .usage()?;
    if config.replicas == 1 {
        return run_one(&config, 0, config.seed, &config.out_dir).internal();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().internal()?;
    pool.install(|| {
        (0..config.replicas).into_par_iter().try_for_each(|i| {
            let dir = config.out_dir.join(format!("replica_{i}"));
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            run_one(&config, i, replica_seed(config.seed, i as u64), &dir)
        })
    })
    .internal()
}

fn run_one(config: &RunConfig, replica: usize, seed: u64, dir: &Path) -> anyhow::Result<()> {
    let schedule = config.schedule()?;
    let params = config.params()?;
    let settings = config.settings(seed)?;
    let mut rng = stream_rng(seed, STREAM_INITIAL_FIELD);
    let initial = Configuration::iid_gaussian_with(config.rows, config.cols, config.mu0, config.sigma2_0, &mut rng)?;
    let records = run_schedule_with(&schedule, initial, params, &settings, |record, field| {
        if config.dump_snapshots {
            let path = dir.join(format!("step_{}.snap", record.iteration));
            let snap = Snapshot {
                config: field.clone(),
                beta_set: record.beta_set,
            };
            snap.write_to(BufWriter::new(File::create(&path)?))?;
        }
        Ok(())
    })?;
    let mut out = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    write_trajectory_csv(&records, &mut out)?;
    out.flush()?;
    let meta = RunMeta {
        tool: "gmrf-infogeo",
        version: env!("CARGO_PKG_VERSION"),
        config,
        replica,
        seed,
        records: records.len(),
        degenerate_records: records.iter().filter(|r| r.degenerate).count(),
    };
    fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct TensorJson {
    mumu: f64,
    s2s2: f64,
    s2b: f64,
    bb: f64,
}

impl From<&FisherTensor<f64>> for TensorJson {
    fn from(t: &FisherTensor<f64>) -> Self {
        Self {
            mumu: t.x,
            s2s2: t.y,
            s2b: t.w,
            bb: t.z,
        }
    }
}

#[derive(Serialize)]
struct AnalysisJson {
    rows: usize,
    cols: usize,
    beta_set: f64,
    degenerate: bool,
    mu_hat: Option<f64>,
    sigma2_hat: Option<f64>,
    beta_mpl: Option<f64>,
    entropy: Option<f64>,
    g1: Option<TensorJson>,
    g2: Option<TensorJson>,
    upsilon_beta: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn analysis_json(snap: &Snapshot<f64>, a: &SnapshotAnalysis<f64>) -> AnalysisJson {
    let est = a.estimate.as_ref();
    AnalysisJson {
        rows: snap.config.rows(),
        cols: snap.config.cols(),
        beta_set: snap.beta_set,
        degenerate: a.is_degenerate(),
        mu_hat: finite(a.mean_var.mean),
        sigma2_hat: finite(a.mean_var.variance),
        beta_mpl: est.map(|e| e.params.beta),
        entropy: est.map(|e| e.entropy),
        g1: est.map(|e| (&e.g1).into()),
        g2: est.map(|e| (&e.g2).into()),
        upsilon_beta: est.and_then(|e| e.upsilon_beta),
    }
}

fn analyze_cmd(args: AnalyzeArgs) -> CmdResult {
    let file = File::open(&args.snapshot)
        .with_context(|| format!("opening {}", args.snapshot.display()))
        .usage()?;
    let snap: Snapshot<f64> = Snapshot::read_from(BufReader::new(file))
        .with_context(|| format!("reading {}", args.snapshot.display()))
        .usage()?;
    let a = analyze(&snap.config, 8).internal()?;
    let report = analysis_json(&snap, &a);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).internal()?);
        return Ok(());
    }
    let show = |v: Option<f64>| v.map(format_real).unwrap_or_else(|| "unavailable".into());
    println!("lattice        {}x{}", report.rows, report.cols);
    println!("beta_set       {}", format_real(report.beta_set));
    println!("degenerate     {}", report.degenerate);
    println!("mu_hat         {}", show(report.mu_hat));
    println!("sigma2_hat     {}", show(report.sigma2_hat));
    println!("beta_mpl       {}", show(report.beta_mpl));
    println!("H              {}", show(report.entropy));
    for (name, t) in [("g1", &report.g1), ("g2", &report.g2)] {
        for (comp, v) in [
            ("mumu", t.as_ref().map(|t| t.mumu)),
            ("s2s2", t.as_ref().map(|t| t.s2s2)),
            ("s2b", t.as_ref().map(|t| t.s2b)),
            ("bb", t.as_ref().map(|t| t.bb)),
        ] {
            println!("{:<15}{}", format!("{name}_{comp}"), show(v));
        }
    }
    println!("upsilon_beta   {}", show(report.upsilon_beta));
    Ok(())
}

fn curve_cmd(args: CurveArgs) -> CmdResult {
    let component: Component = args.component.parse().usage()?;
    let format: CurveFormat = args.format.parse().usage()?;
    let file = File::open(&args.trajectory)
        .with_context(|| format!("opening {}", args.trajectory.display()))
        .usage()?;
    let records = read_trajectory_csv::<f64, _>(BufReader::new(file))
        .with_context(|| format!("reading {}", args.trajectory.display()))
        .usage()?;
    let out_dir = args.out.clone().unwrap_or_else(|| {
        args.trajectory
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&out_dir).internal()?;
    let mut curves: Vec<FisherCurve<f64>> = Vec::new();
    for leg in [Leg::Forward, Leg::Backward] {
        if let Ok(c) = build_fisher_curve(&records, component, leg) {
            let path = out_dir.join(format!("curve_{component}_{leg}.{}", format.extension()));
            fs::write(&path, export_curve(&c, format).internal()?).internal()?;
            println!("{} ({} points)", path.display(), c.len());
            curves.push(c);
        }
    }
    match curves.as_slice() {
        [] => Err(Failure::Usage(anyhow!("trajectory has no usable records"))),
        [only] => {
            eprintln!("only the {} leg is present; no gap computed", only.leg);
            Ok(())
        }
        [forward, backward] => {
            let gap = hysteresis_gap(forward, backward).usage()?;
            fs::write(out_dir.join("gap.txt"), format!("{}\n", format_real(gap))).internal()?;
            println!("gap {}", format_real(gap));
            Ok(())
        }
        _ => unreachable!("at most two legs"),
    }
}
