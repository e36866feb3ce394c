//! Command-line surface: single runs, Monte Carlo batches, the scripted
//! validation scenario, experiment comparison, and SVG chart emission.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unreadable or
//! invalid inputs), 2 on runtime errors (mismatched comparisons, output
//! failures).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::batch::{run_batch, EntityKind, ExperimentResult};
use crate::config::SimulationConfig;
use crate::history::{self, RunHistory};
use crate::metrics::ExclusionMode;
use crate::plot::{self, RidgeRow, Series};
use crate::scenario;
use crate::stats;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "IAQSIM_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "iaqsim",
    about = "Event-driven agent-based simulator of indoor air quality",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one day and export history, metrics, and summaries.
    Run(RunArgs),
    /// Run a seeded Monte Carlo batch and export the experiment result.
    Batch(BatchArgs),
    /// Emit the scripted two-person office CO₂ validation trace.
    Validate(ValidateArgs),
    /// Compare a batched experiment against a baseline batch.
    Compare(CompareArgs),
    /// Render SVG charts from exported run or experiment files.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Run seed; defaults to the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $IAQSIM_OUT_DIR or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export trajectories resampled on this many-minute grid.
    #[arg(long)]
    densify: Option<u32>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of seeded replicates.
    #[arg(long, default_value_t = 500)]
    runs: u32,
    /// Base seed; run i uses a SplitMix64-derived seed.
    #[arg(long, default_value_t = 1)]
    base_seed: u64,
    /// Worker threads (0 = one per core). The result is identical for any
    /// value.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Experiment name; defaults to the config file stem.
    #[arg(long)]
    name: Option<String>,
    /// Zero-quanta exclusion granularity.
    #[arg(long, value_parser = parse_exclusion, default_value = "per-place")]
    exclusion: ExclusionMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file overriding the built-in timetable.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline experiment result (JSON from `batch`).
    #[arg(long)]
    baseline: PathBuf,
    /// Experiment result to compare (JSON from `batch`).
    #[arg(long)]
    experiment: PathBuf,
    /// Compare only entities present on both sides instead of failing on a
    /// mismatch.
    #[arg(long)]
    intersect: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Run history JSON: emits per-place CO₂ and quanta timelines.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Experiment result JSON: emits distribution ridges and
    /// building-level densities.
    #[arg(long)]
    experiment: Option<PathBuf>,
    /// Optional baseline experiment layered under the experiment.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_exclusion(text: &str) -> Result<ExclusionMode, String> {
    match text {
        "per-place" => Ok(ExclusionMode::PerPlace),
        "whole-run" => Ok(ExclusionMode::WholeRun),
        other => Err(format!("unknown exclusion mode `{other}` (per-place|whole-run)")),
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

/// Parse arguments from the process environment and execute.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help or version requested: print and succeed
            if err.use_stderr() {
                eprint!("{err}");
                return 1;
            }
            print!("{err}");
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = read_file(path)?;
    crate::config::parse_config(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(config.options.seed);
    let dir = out_dir(args.out)?;

    let history = crate::engine::run_day(&config, seed);
    let outcome = crate::metrics::compute(&history, &config.places);

    write_file(&dir.join("history.json"), &history.to_json())?;
    write_file(&dir.join("places.csv"), &history.places_csv())?;
    write_file(&dir.join("persons.csv"), &history.persons_csv())?;
    let mut metrics_json =
        serde_json::to_string_pretty(&outcome).expect("metrics serialize");
    metrics_json.push('\n');
    write_file(&dir.join("metrics.json"), &metrics_json)?;
    if let Some(step) = args.densify {
        if step == 0 {
            return Err(CliError::Usage("--densify must be >= 1 minute".into()));
        }
        let points = history::densify(&history, &config, step);
        write_file(&dir.join("places_densified.csv"), &history::densify_csv(&points))?;
    }

    // summary: extrema grouped by place category (the hosted activity)
    let mut by_activity: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for place in &outcome.places {
        let activity = config
            .places
            .iter()
            .find(|p| p.name == place.place)
            .map(|p| p.activity.as_str())
            .unwrap_or("?");
        let entry = by_activity.entry(activity).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
        entry.0 = entry.0.max(place.max_co2);
        entry.1 = entry.1.max(place.max_quanta);
    }
    println!("run: config={} seed={seed} digest={}", args.config.display(), history.config_digest);
    println!("{:<12} {:>12} {:>14}", "category", "max_co2_ppm", "max_quanta/m3");
    for (activity, (co2, quanta)) in &by_activity {
        println!("{activity:<12} {co2:>12.1} {quanta:>14.6}");
    }
    println!(
        "reproduce with: iaqsim run --config {} --seed {seed}",
        args.config.display()
    );
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn cmd_batch(args: BatchArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    if args.runs < 1 {
        return Err(CliError::Usage("--runs must be >= 1".into()));
    }
    let name = args.name.clone().unwrap_or_else(|| {
        args.config
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into())
    });
    let dir = out_dir(args.out)?;
    let result = run_batch(
        &config,
        &name,
        args.runs,
        args.base_seed,
        args.parallelism,
        args.exclusion,
    );
    let result_path = dir.join(format!("{name}.experiment.json"));
    write_file(&result_path, &result.to_json())?;

    let manifest = serde_json::json!({
        "experiment": name,
        "config_path": args.config.display().to_string(),
        "config_digest": result.config_digest,
        "s_run": args.runs,
        "base_seed": args.base_seed,
        "exclusion": match args.exclusion {
            ExclusionMode::PerPlace => "per-place",
            ExclusionMode::WholeRun => "whole-run",
        },
    });
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest");
    manifest_json.push('\n');
    write_file(&dir.join(format!("{name}.manifest.json")), &manifest_json)?;

    println!(
        "batch: {name} s_run={} base_seed={} digest={}",
        args.runs,
        args.base_seed,
        result.digest()
    );
    println!("result written to {}", result_path.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let text = match &args.scenario {
        Some(path) => read_file(path)?,
        None => scenario::DEFAULT_SCENARIO.to_string(),
    };
    let spec = scenario::parse_scenario(&text)
        .map_err(|e| CliError::Usage(format!("scenario: {e}")))?;
    let constants = crate::config::AerosolConstants::default();
    let points = scenario::run_scenario(&spec, &constants);
    let dir = out_dir(args.out)?;
    write_file(&dir.join("validate.csv"), &scenario::scenario_csv(&points))?;

    let series = vec![Series {
        name: "simulated CO2".into(),
        points: points.iter().map(|p| (p.minute as f64, p.co2_ppm)).collect(),
    }];
    let svg = plot::line_chart(
        &series,
        "two-person office, constant 0.25/h outdoor air exchange",
        "time",
        "CO2 [ppm]",
        true,
    );
    write_file(&dir.join("validate.svg"), &svg)?;

    let peak = points.iter().map(|p| p.co2_ppm).fold(f64::NEG_INFINITY, f64::max);
    println!(
        "validation trace: {} samples, start {} ppm, peak {:.1} ppm",
        points.len(),
        points[0].co2_ppm,
        peak
    );
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn load_experiment(path: &Path) -> Result<ExperimentResult, CliError> {
    let text = read_file(path)?;
    ExperimentResult::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let baseline = load_experiment(&args.baseline)?;
    let experiment = load_experiment(&args.experiment)?;
    let report = stats::compare_experiments(&baseline, &experiment, args.intersect)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let dir = out_dir(args.out)?;
    write_file(&dir.join("comparison.json"), &report.to_json())?;
    print!("{}", report.to_table());
    println!("report written to {}", dir.join("comparison.json").display());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    if args.history.is_none() && args.experiment.is_none() {
        return Err(CliError::Usage(
            "plot needs --history and/or --experiment".into(),
        ));
    }
    let dir = out_dir(args.out.clone())?;
    let mut written = Vec::new();

    if let Some(path) = &args.history {
        let text = read_file(path)?;
        let history = RunHistory::from_json(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut co2_series: Vec<Series> = Vec::new();
        let mut quanta_series: Vec<Series> = Vec::new();
        let mut order: Vec<&str> = Vec::new();
        for snap in &history.places {
            if !order.contains(&snap.place.as_str()) {
                order.push(&snap.place);
            }
        }
        for place in order {
            let snaps: Vec<_> = history.places.iter().filter(|s| s.place == place).collect();
            co2_series.push(Series {
                name: place.to_string(),
                points: snaps.iter().map(|s| (s.time as f64, s.co2_ppm)).collect(),
            });
            quanta_series.push(Series {
                name: place.to_string(),
                points: snaps.iter().map(|s| (s.time as f64, s.quanta_per_m3)).collect(),
            });
        }
        let co2 = plot::line_chart(&co2_series, "CO2 per place", "time", "CO2 [ppm]", true);
        let quanta = plot::line_chart(
            &quanta_series,
            "quanta concentration per place",
            "time",
            "quanta [1/m3]",
            true,
        );
        write_file(&dir.join("timeline_co2.svg"), &co2)?;
        write_file(&dir.join("timeline_quanta.svg"), &quanta)?;
        written.push("timeline_co2.svg");
        written.push("timeline_quanta.svg");
    }

    if let Some(path) = &args.experiment {
        let experiment = load_experiment(path)?;
        let baseline = args.baseline.as_deref().map(load_experiment).transpose()?;
        let groups_for = |kind: EntityKind, entity: &str, parameter: &str| {
            let mut groups = Vec::new();
            if let Some(base) = &baseline {
                if let Some(set) = base.distribution(kind, entity, parameter) {
                    groups.push((format!("baseline: {}", base.experiment), set.samples.clone()));
                }
            }
            if let Some(set) = experiment.distribution(kind, entity, parameter) {
                groups.push((experiment.experiment.clone(), set.samples.clone()));
            }
            groups
        };

        for (kind, parameter, file) in [
            (EntityKind::Place, "max_co2", "ridges_place_max_co2.svg"),
            (EntityKind::Place, "max_quanta", "ridges_place_max_quanta.svg"),
            (EntityKind::Department, "mean_inhaled_co2", "ridges_department_co2.svg"),
            (EntityKind::Department, "mean_inhaled_quanta", "ridges_department_quanta.svg"),
        ] {
            let entities: Vec<String> = experiment
                .distributions
                .iter()
                .filter(|d| d.kind == kind && d.parameter == parameter)
                .map(|d| d.entity.clone())
                .collect();
            let rows: Vec<RidgeRow> = entities
                .iter()
                .map(|entity| RidgeRow {
                    entity: entity.clone(),
                    groups: groups_for(kind, entity, parameter),
                })
                .collect();
            let svg = plot::ridge_chart(&rows, &format!("{parameter} per entity"), parameter);
            write_file(&dir.join(file), &svg)?;
            written.push(file);
        }

        for (parameter, file) in [
            ("volume_weighted_max_co2", "building_co2_density.svg"),
            ("mean_inhaled_quanta", "building_quanta_density.svg"),
        ] {
            let groups = groups_for(EntityKind::Building, "building", parameter);
            let svg = plot::density_chart(&groups, &format!("building {parameter}"), parameter);
            write_file(&dir.join(file), &svg)?;
            written.push(file);
        }
    }

    println!("wrote {} chart(s) to {}", written.len(), dir.display());
    Ok(())
}
