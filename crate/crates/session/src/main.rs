use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use reefloop::channel::{ChannelConfig, ConsoleOperator, ConsoleServer};
use reefloop::episode::{EpisodeSummary, Pacing};
use reefloop::export::export_scenario;
use reefloop::{
    run_benchmark, run_episode, BenchmarkConfig, EpisodeConfig, EpisodeStore, RunStore, ScriptedOperator, TrackerSpec,
};
use reefloop_core::dataset::{load_dataset, Attribute};
use reefloop_core::metrics::{MetricReport, MetricsConfig, SuccessRule, Weighting};
use reefloop_sim::Scenario;

#[derive(Parser)]
#[command(name = "reefloop", version, about = "Underwater tracking benchmark and closed-loop servo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a dataset.
    Dataset {
        #[command(subcommand)]
        action: DatasetCmd,
    },
    /// Run trackers over a dataset and write a report.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// ncc, ncc-scale, mosse, mosse-scale, oracle or bridge:<endpoint>; repeatable.
        #[arg(long = "tracker", required = true)]
        trackers: Vec<String>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Output directory for runs/ and the report.
        #[arg(long)]
        out: PathBuf,
        /// Count IoU equal to the threshold as a failure.
        #[arg(long)]
        strict: bool,
        /// Weight sequences by frame count instead of equally.
        #[arg(long)]
        per_frame: bool,
    },
    /// Print a saved report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Restrict the breakdown to these attributes.
        #[arg(long = "attr")]
        attrs: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Fly a scenario with the ground-truth-driven servo.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// Write the view as a dataset sequence under this root.
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long)]
        tick_hz: Option<f64>,
        /// Override the scenario length, seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run a closed-loop episode with a tracker.
    Episode {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "ncc-scale")]
        tracker: String,
        #[arg(long, value_enum, default_value_t = OperatorKind::Scripted)]
        operator: OperatorKind,
        /// Address for the console operator.
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long)]
        tick_hz: Option<f64>,
        #[arg(long, default_value_t = 0)]
        operator_delay: usize,
        /// Override the scenario length, seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Directory for episodes/<id>/.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a scenario to an operator console in real time.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "ncc-scale")]
        tracker: String,
        #[arg(long, default_value_t = 1)]
        frame_every: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Load every sequence and report problems.
    Validate { root: PathBuf },
    /// Attribute table, one row per sequence.
    Attrs { root: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OperatorKind {
    Scripted,
    Console,
}

/// A scenario file, or one of the built-in names.
fn load_scenario(name: &str) -> Result<Scenario> {
    match name {
        "reference-midwater" => Ok(Scenario::reference_midwater()),
        "teleport" => Ok(Scenario::teleport()),
        path => Scenario::load(Path::new(path)).with_context(|| format!("loading scenario {path}")),
    }
}

fn with_duration(mut scenario: Scenario, duration: Option<f64>) -> Scenario {
    if let Some(d) = duration {
        scenario.duration_s = d;
    }
    scenario
}

fn parse_specs(ids: &[String]) -> Result<Vec<TrackerSpec>> {
    ids.iter().map(|s| s.parse::<TrackerSpec>().map_err(Into::into)).collect()
}

fn print_summary(s: &EpisodeSummary) {
    println!("episode {} ({} on {})", s.episode_id, s.tracker, s.scenario);
    println!("  duration        {:.1} s, {} ticks", s.duration_s, s.ticks);
    println!("  autonomous      {:.1} %", s.percent_autonomous);
    match s.mean_iou {
        Some(m) => println!("  mean IoU        {m:.3}"),
        None => println!("  mean IoU        n/a (target never in view)"),
    }
    println!("  track losses    {}", s.track_losses);
    println!("  interventions   {}", s.interventions.len());
    for i in &s.interventions {
        println!("    {:.1} s - {:.1} s", i.start, i.end);
    }
    println!("  min altitude    {:.2} m", s.min_altitude);
}

fn save_episode(out: Option<&Path>, outcome: &reefloop::EpisodeOutcome) -> Result<()> {
    if let Some(out) = out {
        let store = EpisodeStore::open(out)?;
        let id = store.save(&outcome.log, &outcome.summary)?;
        let dir = store.path(&id)?;
        outcome.log.write_exports(&dir)?;
        println!("saved {}", dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Dataset { action: DatasetCmd::Validate { root } } => {
            let ds = load_dataset(&root)?;
            for w in &ds.warnings {
                println!("warning: {w}");
            }
            let frames: usize = ds.sequences.iter().map(|s| s.frame_count).sum();
            println!("{} sequences, {frames} frames, {} warnings", ds.sequences.len(), ds.warnings.len());
        }
        Command::Dataset { action: DatasetCmd::Attrs { root } } => {
            let ds = load_dataset(&root)?;
            let codes: Vec<&str> = Attribute::ALL.iter().map(Attribute::code).collect();
            println!("sequence,{}", codes.join(","));
            for s in &ds.sequences {
                let flags: Vec<&str> =
                    Attribute::ALL.iter().map(|a| if s.attributes.get(*a) { "1" } else { "0" }).collect();
                println!("{},{}", s.id, flags.join(","));
            }
        }
        Command::Eval { dataset, trackers, runs, out, strict, per_frame } => {
            let specs = parse_specs(&trackers)?;
            let ds = load_dataset(&dataset)?;
            for w in &ds.warnings {
                log::warn!("{w}");
            }
            let metrics = MetricsConfig {
                success_rule: if strict { SuccessRule::Strict } else { SuccessRule::Inclusive },
                weighting: if per_frame { Weighting::PerFrame } else { Weighting::PerSequence },
            };
            let store = RunStore::open(&out)?;
            let outcome = run_benchmark(&ds, &specs, &BenchmarkConfig { runs, metrics }, Some(&store))?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.failed {
                eprintln!("failed: {} run {} on {}: {}", f.tracker_id, f.run_index, f.sequence_id, f.reason);
            }
            let report_dir = out.join("report");
            outcome.report.write_to(&report_dir).with_context(|| format!("writing {}", report_dir.display()))?;
            print!("{}", outcome.report.to_csv(None));
            println!("report written to {}", report_dir.display());
            if !outcome.failed.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { input, attrs, format } => {
            let dir = if input.join("report.json").exists() { input } else { input.join("report") };
            let report = MetricReport::read_from(&dir).with_context(|| format!("reading {}", dir.display()))?;
            let attrs: Vec<Attribute> =
                attrs.iter().map(|a| a.parse::<Attribute>()).collect::<Result<_, _>>().map_err(anyhow::Error::msg)?;
            let filter = (!attrs.is_empty()).then_some(attrs.as_slice());
            match format {
                Format::Csv => print!("{}", report.to_csv(filter)),
                Format::Json => {
                    let r = match filter {
                        Some(a) => report.filter_attributes(a),
                        None => report,
                    };
                    println!("{}", serde_json::to_string_pretty(&r)?);
                }
            }
        }
        Command::Simulate { scenario, export, tick_hz, duration } => {
            let scenario = with_duration(load_scenario(&scenario)?, duration);
            let config = EpisodeConfig { tick_hz, tracker: TrackerSpec::Oracle, ..Default::default() };
            match export {
                Some(root) => {
                    let (rec, outcome) = export_scenario(scenario, &config, &root)?;
                    print_summary(&outcome.summary);
                    println!("exported {} frames to {}", rec.frame_count, root.join(&rec.id).display());
                }
                None => {
                    let outcome = run_episode(scenario, &config, &mut ScriptedOperator::default())?;
                    print_summary(&outcome.summary);
                }
            }
        }
        Command::Episode { scenario, tracker, operator, bind, tick_hz, operator_delay, duration, out } => {
            let scenario = with_duration(load_scenario(&scenario)?, duration);
            let spec: TrackerSpec = tracker.parse()?;
            let mut config =
                EpisodeConfig { tick_hz, tracker: spec, operator_delay_ticks: operator_delay, ..Default::default() };
            let outcome = match operator {
                OperatorKind::Scripted => run_episode(scenario, &config, &mut ScriptedOperator::default())?,
                OperatorKind::Console => {
                    config.pacing = Pacing::WallClock;
                    let server = ConsoleServer::bind(&bind, ChannelConfig::default())?;
                    println!("waiting for the operator console on {}", server.local_addr());
                    let mut op = ConsoleOperator::new(&server);
                    run_episode(scenario, &config, &mut op)?
                }
            };
            print_summary(&outcome.summary);
            save_episode(out.as_deref(), &outcome)?;
        }
        Command::Serve { bind, scenario, tracker, frame_every, out } => {
            let scenario = load_scenario(&scenario)?;
            let config = EpisodeConfig { tracker: tracker.parse()?, pacing: Pacing::WallClock, ..Default::default() };
            let server = ConsoleServer::bind(&bind, ChannelConfig { frame_every, ..Default::default() })?;
            println!("operator channel on {}", server.local_addr());
            let mut op = ConsoleOperator::new(&server);
            let outcome = run_episode(scenario, &config, &mut op)?;
            if server.dropped() > 0 {
                eprintln!("{} outbound messages dropped for slow consoles", server.dropped());
            }
            print_summary(&outcome.summary);
            save_episode(out.as_deref(), &outcome)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
