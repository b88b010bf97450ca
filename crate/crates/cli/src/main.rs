use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aeromob::analysis::{
    ho_summary, ingest_trace, nth_closest_strongest, parse_event_log, strongest_changes_per_minute, AltitudeBins,
    AnalysisError, DistanceMode, DEFAULT_EXTERNAL_BIN_M, NTH_BUCKETS,
};
use aeromob::sim::{self, Mitigation, RunOptions, ScenarioConfig, SimError, SweepAxis};
use aeromob::topology::{detect_pci_collision, CoverageGrid};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aeromob", version, about = "UAV mobility management simulator and trace analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics, event log and traces.
    Run(RunArgs),
    /// Run a scenario over several UAV altitudes or seeds.
    Sweep(SweepArgs),
    /// Strongest-cell metrics of an external trace, and optionally a handover summary.
    Analyze(AnalyzeArgs),
    /// Re-plan the PCIs of a scenario's topology.
    PlanPci(PlanArgs),
    /// Altitude sweep bundled into plot-ready CSV and JSON tables.
    Report(SweepArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, or the name of a packaged scenario.
    #[arg(long)]
    scenario: String,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: separate_aerial, always_resolve_ecgi, adaptive_a3.
    #[arg(long, value_delimiter = ',')]
    mitigations: Vec<Mitigation>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
    /// Skip the per-tick trace.
    #[arg(long)]
    no_trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
    /// UAV altitudes in metres.
    #[arg(long, value_delimiter = ',', default_value = "30,60,90,120")]
    altitudes: Vec<f64>,
    /// Repeat the base scenario N times instead of sweeping altitude.
    #[arg(long, conflicts_with = "altitudes")]
    replicates: Option<u32>,
    /// Run sweep points one after another.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    cells: PathBuf,
    /// Handover event log to summarise.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Rank cells by horizontal distance.
    #[arg(long, conflicts_with = "bins_3d")]
    bins_2d: bool,
    /// Rank cells by 3D distance (default).
    #[arg(long)]
    bins_3d: bool,
    /// Altitude bin width in metres; 0 bins on exact altitude.
    #[arg(long, default_value_t = DEFAULT_EXTERNAL_BIN_M)]
    bin_width: f64,
    #[arg(long, default_value_t = 2.0)]
    t_pingpong: f64,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: String,
    /// Where to write the re-planned scenario.
    #[arg(long)]
    out: PathBuf,
    /// Altitudes at which to check for PCI collisions.
    #[arg(long, value_delimiter = ',', default_value = "1.5,30,60,90,120")]
    altitudes: Vec<f64>,
    #[arg(long, default_value_t = 25.0)]
    grid_m: f64,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn invalid(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, err: err.into() }
    }

    fn runtime(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, err: err.into() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Self { code: e.exit_code() as u8, err: e.into() }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Io(_) => Failure::runtime(e),
            _ => Failure::invalid(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a, false),
        Command::Report(a) => sweep(a, true),
        Command::Analyze(a) => analyze(a),
        Command::PlanPci(a) => plan_pci(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_scenario(spec: &str) -> CliResult<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {spec}")).map_err(Failure::runtime)?;
        return Ok(ScenarioConfig::from_json(&text)?);
    }
    match aeromob::scenarios::source(spec) {
        Some(text) => Ok(ScenarioConfig::from_json(text)?),
        None => Err(Failure::invalid(anyhow!(
            "{spec}: no such file or packaged scenario (packaged: {})",
            aeromob::scenarios::names().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn scenario(a: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = load_scenario(&a.scenario)?.with_mitigations(&a.mitigations);
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> CliResult {
    let cfg = scenario(&a.scenario)?;
    let out = sim::run_with(&cfg, &RunOptions { record_trace: !a.no_trace })?;
    sim::write_outputs(&out, &a.out)?;
    let m = &out.metrics;
    println!(
        "{}: {} ticks, {} handovers, {} disconnects, {} ping-pongs -> {}",
        if m.scenario.is_empty() { "scenario" } else { &m.scenario },
        m.ticks,
        m.total.handovers,
        m.total.disconnects,
        m.total.pingpongs,
        a.out.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs, report: bool) -> CliResult {
    let base = scenario(&a.scenario)?;
    let axis = match a.replicates {
        Some(n) => SweepAxis::Replicates(n),
        None => {
            if let Some(bad) = a.altitudes.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
                return Err(Failure::invalid(anyhow!("altitude {bad} must be > 0")));
            }
            SweepAxis::Altitude(a.altitudes.clone())
        }
    };
    let opts = RunOptions { record_trace: !report };
    let runs = sim::run_sweep(&base, &axis, &opts, !a.serial);
    fs::create_dir_all(&a.out)?;

    let mut nth = csv_writer(&a.out.join("nth_closest.csv"), &["bin", "n", "fraction"])?;
    let mut rates = csv_writer(&a.out.join("changes_per_min.csv"), &["bin", "rate"])?;
    let mut nrt = csv_writer(
        &a.out.join("nrt_stats.csv"),
        &["run", "time_s", "owner_ecgi", "ground_size", "aerial_size", "ground_block_listed", "aerial_block_listed"],
    )?;
    let mut summaries = Vec::new();
    let mut first_error: Option<Failure> = None;
    for r in &runs {
        let out = match &r.result {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{}: {e}", r.label);
                first_error.get_or_insert_with(|| Failure::from(e.clone()));
                continue;
            }
        };
        if !report {
            sim::write_outputs(out, &a.out.join(&r.label))?;
        }
        for alt in &out.metrics.strongest {
            let bin = bin_label(&r.label, alt.altitude_m, &axis);
            for (n, f) in alt.nth_closest.iter().enumerate() {
                nth.write_record([bin.clone(), nth_label(n), f.to_string()]).map_err(Failure::runtime)?;
            }
            if let Some(rate) = alt.changes_per_min {
                rates.write_record([bin.clone(), rate.to_string()]).map_err(Failure::runtime)?;
            }
        }
        for s in &out.nrt_samples {
            let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            nrt.write_record([
                r.label.clone(),
                s.time_s.to_string(),
                s.owner.to_string(),
                s.ground_size.to_string(),
                opt(s.aerial_size),
                s.ground_block_listed.to_string(),
                opt(s.aerial_block_listed),
            ])
            .map_err(Failure::runtime)?;
        }
        let summary = ho_summary(&out.events, base.ho.t_pingpong_s)?;
        summaries.push(serde_json::json!({
            "run": r.label,
            "seed": r.seed,
            "altitude_m": out.metrics.altitude_m,
            "summary": summary,
        }));
        println!(
            "{}: {} handovers, {} disconnects, uav/gue ratio {}",
            r.label,
            out.metrics.total.handovers,
            out.metrics.total.disconnects,
            out.metrics.uav_gue_ratio.map_or("n/a".to_string(), |v| format!("{v:.2}"))
        );
    }
    nth.flush()?;
    rates.flush()?;
    nrt.flush()?;
    write_json(&a.out.join("ho_summary.json"), &serde_json::Value::Array(summaries))?;
    first_error.map_or(Ok(()), Err)
}

fn bin_label(run: &str, altitude: f64, axis: &SweepAxis) -> String {
    match axis {
        SweepAxis::Altitude(_) => altitude.to_string(),
        SweepAxis::Replicates(_) => format!("{run}:{altitude}"),
    }
}

fn nth_label(i: usize) -> String {
    if i + 1 == NTH_BUCKETS {
        format!(">={NTH_BUCKETS}")
    } else {
        (i + 1).to_string()
    }
}

fn csv_writer(path: &Path, header: &[&str]) -> CliResult<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path).map_err(Failure::runtime)?;
    w.write_record(header).map_err(Failure::runtime)?;
    Ok(w)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    for p in [&a.trace, &a.cells].into_iter().chain(a.events.as_ref()) {
        if !p.exists() {
            return Err(Failure::invalid(anyhow!("{}: no such file", p.display())));
        }
    }
    if !(a.bin_width >= 0.0) {
        return Err(Failure::invalid(anyhow!("--bin-width must be >= 0")));
    }
    let trace = ingest_trace(&a.trace, &a.cells)?;
    let bins = if a.bin_width == 0.0 { AltitudeBins::Exact } else { AltitudeBins::Width(a.bin_width) };
    let mode = if a.bins_2d { DistanceMode::TwoD } else { DistanceMode::ThreeD };
    fs::create_dir_all(&a.out)?;

    let mut nth = csv_writer(&a.out.join("nth_closest.csv"), &["bin", "n", "fraction"])?;
    for (bin, fractions) in nth_closest_strongest(&trace, bins, mode)? {
        for (n, f) in fractions.iter().enumerate() {
            nth.write_record([bin.to_string(), nth_label(n), f.to_string()]).map_err(Failure::runtime)?;
        }
    }
    nth.flush()?;
    let mut rates = csv_writer(&a.out.join("changes_per_min.csv"), &["bin", "rate"])?;
    for (bin, r) in strongest_changes_per_minute(&trace, bins) {
        rates.write_record([bin.to_string(), r.rate_per_min.to_string()]).map_err(Failure::runtime)?;
    }
    rates.flush()?;

    if let Some(events) = &a.events {
        let records = parse_event_log(fs::File::open(events)?)?;
        write_json(&a.out.join("ho_summary.json"), &ho_summary(&records, a.t_pingpong)?)?;
    }
    println!("{} rows analysed -> {}", trace.rows.len(), a.out.display());
    Ok(())
}

fn plan_pci(a: PlanArgs) -> CliResult {
    let cfg = load_scenario(&a.scenario)?;
    let planned = cfg.replan_pcis()?;
    let grid = CoverageGrid { spacing_m: a.grid_m };
    let count = |c: &ScenarioConfig| -> CliResult<Vec<(f64, usize)>> {
        let t = c.topology.build()?;
        Ok(a.altitudes.iter().map(|&z| (z, detect_pci_collision(&t, z, &c.params, &grid).len())).collect())
    };
    let (before, after) = (count(&cfg)?, count(&planned)?);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(&a.out)?;
    writeln!(f, "{}", planned.to_json())?;
    for ((z, b), (_, af)) in before.iter().zip(&after) {
        println!("altitude {z} m: {b} colliding pairs before, {af} after");
    }
    println!("re-planned scenario -> {}", a.out.display());
    Ok(())
}
