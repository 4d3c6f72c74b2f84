//! `rllp` command-line runner: single runs, variant comparisons, disturbance
//! sweeps and synthetic path generation.
//!
//! Exit codes: 0 success, 1 output error, 2 configuration error, 3 simulation abort.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use rllp::sim::config::{ConfigError, ConfigFile};
use rllp::sim::expr::eval;
use rllp::sim::log::{disturbance_csv, format_sig, to_csv, to_json};
use rllp::sim::metrics::compute_metrics_window;
use rllp::sim::pathgen::PathSpec;
use rllp::sim::{run, sweep_levels, Controller, RunMetrics, RunOutput, Scenario, SimError};
use serde_json::{Map, Value};

/// Disturbance bound used by `compare` when the config leaves `L_d` unset.
const COMPARE_DEFAULT_LD: f64 = std::f64::consts::PI / 15.0;

#[derive(Parser)]
#[command(name = "rllp", version, about = "Robust look-ahead pursuit guidance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its log and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<Controller>,
    },
    /// Run all three controller variants on the same path and seed.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Restrict metrics to `from:to` seconds.
        #[arg(long, value_name = "FROM:TO", value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Repeat a scenario over a list of disturbance bounds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<Controller>,
        /// Comma-separated `L_d` values; expressions such as `pi/40` are accepted.
        #[arg(long, value_name = "LIST", value_parser = parse_levels)]
        ld: Option<Levels>,
        /// Levels simulated concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Write a synthetic reference path as `x,y,z` CSV.
    GenPath {
        /// Scenario file whose `path_*` keys configure the generator.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed, overriding `path_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,
    /// Disturbance seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Clone)]
struct Levels(Vec<f64>);

fn parse_levels(text: &str) -> Result<Levels, String> {
    let values = text
        .split(',')
        .map(|v| eval(v.trim()).map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|v| *v < 0.0) {
        return Err("disturbance bounds must be non-negative".into());
    }
    Ok(Levels(values))
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text.split_once(':').ok_or("expected FROM:TO")?;
    let from = eval(a.trim()).map_err(|e| e.to_string())?;
    let to = eval(b.trim()).map_err(|e| e.to_string())?;
    if from > to {
        return Err(format!("window start {from} is after its end {to}"));
    }
    Ok((from, to))
}

enum Failure {
    Output(String),
    Config(String),
    Simulation(String),
}

impl Failure {
    fn config(path: &Path, e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Config(e.to_string()),
            other => Failure::Config(format!("{}: {other}", path.display())),
        }
    }

    fn sim(label: &str, e: SimError) -> Self {
        Failure::Simulation(format!("{label}: {e}"))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Output(_) => 1,
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Output(m) | Failure::Config(m) | Failure::Simulation(m) => m,
        }
    }
}

fn load(common: &Common) -> Result<(ConfigFile, Scenario), Failure> {
    let file = ConfigFile::load(&common.config).map_err(|e| Failure::config(&common.config, e))?;
    let mut scenario = file.scenario().map_err(|e| Failure::config(&common.config, e))?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    Ok((file, scenario))
}

/// Creates `dir` and checks that none of `names` exist in it unless `force`.
fn prepare(dir: &Path, names: &[String], force: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Output(format!("cannot create {}: {e}", dir.display())))?;
    if !force {
        if let Some(existing) = names.iter().map(|n| dir.join(n)).find(|p| p.exists()) {
            return Err(Failure::Output(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))
}

fn write_run(dir: &Path, prefix: &str, out: &RunOutput) -> Result<(), Failure> {
    write(&dir.join(format!("{prefix}.csv")), &to_csv(&out.records))?;
    write(&dir.join(format!("{prefix}_disturbance.csv")), &disturbance_csv(&out.records))
}

const RUN_FILES: [&str; 3] = ["run.csv", "run_disturbance.csv", "metrics.json"];

fn cmd_run(common: &Common, controller: Option<Controller>) -> Result<(), Failure> {
    let (_, mut scenario) = load(common)?;
    if let Some(c) = controller {
        scenario.controller = c;
    }
    prepare(&common.out, &RUN_FILES.map(String::from), common.force)?;
    let out = run(&scenario).map_err(|e| Failure::sim(scenario.controller.name(), e))?;
    write_run(&common.out, "run", &out)?;
    write(&common.out.join("metrics.json"), &to_json(&out.metrics))
}

fn cmd_compare(common: &Common, window: Option<(f64, f64)>) -> Result<(), Failure> {
    let (file, mut scenario) = load(common)?;
    if !file.contains("l_d") {
        scenario.cfg.l_d = COMPARE_DEFAULT_LD;
    }
    let mut names: Vec<String> = vec!["compare.json".into()];
    for c in Controller::ALL {
        names.push(format!("{}.csv", c.name()));
        names.push(format!("{}_disturbance.csv", c.name()));
    }
    prepare(&common.out, &names, common.force)?;
    let mut summary = Map::new();
    for c in Controller::ALL {
        let variant = Scenario { controller: c, ..scenario.clone() };
        let out = run(&variant).map_err(|e| Failure::sim(c.name(), e))?;
        write_run(&common.out, c.name(), &out)?;
        let metrics: RunMetrics = match window {
            Some((from, to)) => compute_metrics_window(&out.records, from, to).map_err(|_| {
                Failure::Simulation(format!("{}: no ticks inside window {from}:{to}", c.name()))
            })?,
            None => out.metrics,
        };
        summary.insert(c.name().into(), serde_json::to_value(metrics).expect("metrics serialise"));
    }
    write(&common.out.join("compare.json"), &to_json(&Value::Object(summary)))
}

const SWEEP_HEADER: &str = "level,l_d,eta_lon_mean,eta_lon_std,eta_lat_mean,eta_lat_std,\
a_yc_mean,a_yc_std,a_zc_mean,a_zc_std,median_convergence_time,unconverged_legs";

fn sweep_row(level: usize, l_d: f64, m: &RunMetrics) -> String {
    let mut row = format!("{level},{}", format_sig(l_d));
    for s in [&m.eta_lon, &m.eta_lat, &m.a_yc, &m.a_zc] {
        write!(row, ",{},{}", format_sig(s.mean), format_sig(s.std)).expect("string write");
    }
    let median = m.median_convergence_time.map_or(String::new(), format_sig);
    write!(row, ",{median},{}", m.unconverged_legs).expect("string write");
    row
}

fn level_dir(level: usize) -> String {
    format!("ld_{level}")
}

fn cmd_sweep(common: &Common, controller: Option<Controller>, levels: Option<Levels>, jobs: u16) -> Result<(), Failure> {
    let (_, mut scenario) = load(common)?;
    if let Some(c) = controller {
        scenario.controller = c;
    }
    let levels = levels.map_or_else(|| sweep_levels().to_vec(), |l| l.0);
    let mut names = vec!["sweep.csv".to_string()];
    names.extend((0..levels.len()).map(level_dir));
    prepare(&common.out, &names, common.force)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunMetrics, Failure>>>> =
        Mutex::new((0..levels.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&l_d) = levels.get(i) else { break };
        let mut s = scenario.clone();
        s.cfg.l_d = l_d;
        let outcome = run(&s)
            .map_err(|e| Failure::sim(&format!("L_d = {l_d}"), e))
            .and_then(|out| {
                let dir = common.out.join(level_dir(i));
                fs::create_dir_all(&dir)
                    .map_err(|e| Failure::Output(format!("cannot create {}: {e}", dir.display())))?;
                write_run(&dir, "run", &out)?;
                write(&dir.join("metrics.json"), &to_json(&out.metrics))?;
                Ok(out.metrics)
            });
        results.lock().expect("results lock")[i] = Some(outcome);
    };
    std::thread::scope(|scope| {
        for _ in 0..usize::from(jobs).min(levels.len()) {
            scope.spawn(worker);
        }
    });

    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for (i, outcome) in results.into_inner().expect("results lock").into_iter().enumerate() {
        let metrics = outcome.expect("every level visited")?;
        table.push_str(&sweep_row(i, levels[i], &metrics));
        table.push('\n');
    }
    write(&common.out.join("sweep.csv"), &table)
}

fn cmd_gen_path(config: Option<&Path>, out: &Path, seed: Option<u64>, force: bool) -> Result<(), Failure> {
    let mut spec = match config {
        Some(path) => ConfigFile::load(path)
            .and_then(|f| f.path_spec())
            .map_err(|e| Failure::config(path, e))?,
        None => PathSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let path = spec
        .generate()
        .map_err(|e| Failure::Config(format!("path generator: {e}")))?;
    if out.exists() && !force {
        return Err(Failure::Output(format!(
            "{} already exists; pass --force to overwrite",
            out.display()
        )));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Output(format!("cannot create {}: {e}", parent.display())))?;
    }
    let text = format!("# path_seed = {}\n{}", spec.seed, path.to_csv_string());
    write(out, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, controller } => cmd_run(common, *controller),
        Command::Compare { common, window } => cmd_compare(common, *window),
        Command::Sweep { common, controller, ld, jobs } => cmd_sweep(common, *controller, ld.clone(), *jobs),
        Command::GenPath { config, out, seed, force } => cmd_gen_path(config.as_deref(), out, *seed, *force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
