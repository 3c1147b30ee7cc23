use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_cpd::changepoint::{Calibration, CpConfig, Detector, DEFAULT_BOOTSTRAP_REPLICATES};
use hawkes_cpd::events::{prices_to_events, WindowSpec};
use hawkes_cpd::geometry::SpdPoint;
use hawkes_cpd::io::{self, EventFormat};
use hawkes_cpd::pipeline::{estimate_windows, run_pipeline, PipelineConfig, WMode};
use hawkes_cpd::report;
use hawkes_cpd::sim::{reference_scenario, simulate_scenario, Scenario};
use hawkes_cpd::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hawkes-cpd",
    version,
    about = "Change points in Hawkes causal networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a regime-switching multivariate Hawkes recording.
    Simulate(SimulateArgs),
    /// Convert price samples to threshold-crossing events.
    IngestPrices(IngestArgs),
    /// Per-window cumulants, kernel matrices and SPD snapshots.
    Estimate(EstimateArgs),
    /// Change-point detection on a snapshot sequence.
    Detect(DetectArgs),
    /// Estimate and detect in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON; when absent the reference generator is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    segments: usize,
    #[arg(long, default_value_t = 60_000.0)]
    segment_duration: f64,
    #[arg(long, default_value_t = 0.3)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<EventFormat>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Relative move that triggers an event.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<EventFormat>,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    format: Option<EventFormat>,
    #[arg(long)]
    window_length: Option<f64>,
    #[arg(long)]
    window_stride: Option<f64>,
    #[arg(long)]
    window_origin: Option<f64>,
    /// Fixed cumulant half-width; selected from the data when absent.
    #[arg(long = "W")]
    w: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "symmetrize-C")]
    symmetrize_c: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Include the matrix logarithm of each snapshot.
    #[arg(long)]
    with_log: bool,
}

#[derive(Args)]
struct CpArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    min_segment: Option<usize>,
    /// Threshold per segment from the bootstrap or from the asymptotic limit.
    #[arg(long, value_enum)]
    calibration: Option<CalibrationArg>,
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationArg {
    Asymptotic,
    Bootstrap,
}

#[derive(Args)]
struct DetectArgs {
    /// `snapshots.json` from `estimate`.
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    cp: CpArgs,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cp: CpArgs,
    /// Also write cumulants.json, kernels.json and snapshots.json.
    #[arg(long)]
    emit_intermediate: bool,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn apply_common(cfg: &mut PipelineConfig, a: &Common) -> Result<()> {
    let mut window = cfg.window;
    if let Some(l) = a.window_length {
        window.length = l;
    }
    if let Some(s) = a.window_stride {
        window.stride = s;
    }
    if let Some(o) = a.window_origin {
        window.origin = o;
    }
    cfg.window = WindowSpec::new(window.length, window.stride)?.with_origin(window.origin)?;
    if let Some(w) = a.w {
        cfg.w = WMode::Fixed { value: w };
    }
    if a.kappa.is_some() {
        cfg.nphc.kappa = a.kappa;
    }
    cfg.symmetrize_c |= a.symmetrize_c;
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    Ok(())
}

fn apply_cp(cfg: &mut PipelineConfig, a: &CpArgs) {
    let cp: &mut CpConfig = &mut cfg.cp;
    if let Some(v) = a.alpha {
        cp.alpha = v;
    }
    if let Some(v) = a.c {
        cp.c = v;
    }
    if let Some(v) = a.mc_samples {
        cp.mc_samples = v;
    }
    if let Some(v) = a.min_segment {
        cp.min_segment = v;
    }
    let current = match cp.calibration {
        Calibration::Bootstrap { replicates } => replicates,
        Calibration::Asymptotic => DEFAULT_BOOTSTRAP_REPLICATES,
    };
    match (a.calibration, a.bootstrap_replicates) {
        (Some(CalibrationArg::Asymptotic), _) => cp.calibration = Calibration::Asymptotic,
        (Some(CalibrationArg::Bootstrap), r) | (None, r @ Some(_)) => {
            cp.calibration = Calibration::Bootstrap {
                replicates: r.unwrap_or(current),
            }
        }
        (None, None) => {}
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
}

fn format_for(path: &Path, explicit: Option<EventFormat>) -> EventFormat {
    explicit.unwrap_or_else(|| EventFormat::from_path(path))
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let scenario = match &a.scenario {
        Some(p) => {
            let mut s: Scenario = serde_json::from_str(&fs::read_to_string(p)?)?;
            s.seed = a.seed;
            s
        }
        None => reference_scenario(a.dim, a.segments, a.segment_duration, a.mu, a.seed)?,
    };
    let (events, change_times) = simulate_scenario(&scenario)?;
    io::save_events(&events, &a.out, format_for(&a.out, a.format))?;
    let sidecar = serde_json::json!({
        "change_times": change_times,
        "params_hash": scenario.params_hash(),
        "seed": a.seed,
        "scenario": scenario,
    });
    let mut path = a.out.clone().into_os_string();
    path.push(".meta.json");
    fs::write(path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    log::info!(
        "{} events written to {}",
        events.total_events(),
        a.out.display()
    );
    Ok(false)
}

fn ingest(a: IngestArgs) -> Result<bool> {
    let prices = io::load_prices(&a.input)?;
    let events = prices_to_events(&prices, a.threshold)?;
    io::save_events(&events, &a.out, format_for(&a.out, a.format))?;
    Ok(false)
}

fn estimate(a: EstimateArgs) -> Result<bool> {
    let mut cfg = load_config(a.common.config.as_deref())?;
    apply_common(&mut cfg, &a.common)?;
    let events = io::load_events(
        &a.common.events,
        format_for(&a.common.events, a.common.format),
    )?;
    let (_, windows) = estimate_windows(&cfg, &events)?;
    report::write_intermediate(&cfg, &windows, &a.common.out, a.with_log)?;
    report::write_events_per_window(&windows, &a.common.out)?;
    Ok(false)
}

fn detect(a: DetectArgs) -> Result<bool> {
    let mut cfg = load_config(a.config.as_deref())?;
    apply_cp(&mut cfg, &a.cp);
    cfg.workers = a.workers.or(cfg.workers);
    cfg.validate()?;
    let records = report::read_snapshots(&a.snapshots)?;
    let points = records
        .iter()
        .map(|r| Ok(r.to_snapshot(cfg.spd_floor_rel)?.point))
        .collect::<Result<Vec<SpdPoint>>>()?;
    let run = || -> Result<_> {
        let detector = Detector::new(cfg.cp.clone(), cfg.seed)?;
        detector.detect_multiple(&points)
    };
    let result = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let config =
        serde_json::json!({ "cp": cfg.cp, "seed": cfg.seed, "spd_floor_rel": cfg.spd_floor_rel });
    report::render_cp_report(&result, &config, &a.out)?;
    Ok(!result.change_indices.is_empty())
}

fn pipeline(a: PipelineArgs) -> Result<bool> {
    let mut cfg = load_config(a.common.config.as_deref())?;
    apply_common(&mut cfg, &a.common)?;
    apply_cp(&mut cfg, &a.cp);
    let events = io::load_events(
        &a.common.events,
        format_for(&a.common.events, a.common.format),
    )?;
    let output = run_pipeline(&cfg, &events)?;
    report::render_report(&output, &a.common.out)?;
    if a.emit_intermediate {
        report::write_intermediate(&cfg, &output.windows, &a.common.out, false)?;
    }
    for (k, start, end) in output.change_windows() {
        println!("change at window {k} [{start}, {end})");
    }
    Ok(!output.report.change_indices.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::IngestPrices(a) => ingest(a),
        Command::Estimate(a) => estimate(a),
        Command::Detect(a) => detect(a),
        Command::Pipeline(a) => pipeline(a),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
