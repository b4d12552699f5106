//! Experiment driver CLI.
//!
//! Verbs: `run` (one config, writes summary/per-node reports), `sweep`
//! (cartesian parameter grid, writes sweep.csv), `stats` (workload
//! statistics), `trace` (re-run with the transition log emitted).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gnnsim::experiment::{self, ExperimentConfig, SchedulerChoice, SweepAxis};
use gnnsim::Error;

#[derive(Parser)]
#[command(name = "gnnsim", version, about = "Event-driven GNN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [run] out_dir).
    #[arg(long)]
    out_dir: Option<String>,
    /// Top-level seed (overrides [run] seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Scheduler policy: event-driven | double-buffered | both.
    #[arg(long)]
    scheduler: Option<String>,
    /// Emit the transition trace alongside the reports.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write reports.
    Run(CommonOpts),
    /// Run a cartesian parameter grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Grid axis `section.key=v1,v2,...`; repeatable.
        #[arg(long = "grid")]
        grid: Vec<String>,
    },
    /// Print workload statistics for the configured graph.
    Stats {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-run with the event trace enabled and emit trace.txt.
    Trace(CommonOpts),
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(s) = &opts.scheduler {
        cfg.scheduler = SchedulerChoice::parse(s)?;
    }
    if opts.trace {
        cfg.trace = true;
    }
    Ok(cfg)
}

fn run(opts: &CommonOpts, force_trace: bool) -> Result<(), Error> {
    let mut cfg = load_config(opts)?;
    if force_trace {
        cfg.trace = true;
    }
    let out_dir = experiment::out_dir_path(&cfg, None);
    let artifacts = experiment::run_to_dir(&cfg, &out_dir)?;
    for s in &artifacts.summaries {
        println!(
            "{}: total_cycles={} latency_ms={:.6} nodes_per_ms={:.3} output_hash={}",
            s.scheduler, s.total_cycles, s.latency_ms_at_clock, s.nodes_per_ms, s.output_hash
        );
    }
    println!("reports written to {}", out_dir.display());
    Ok(())
}

fn sweep(common: &CommonOpts, grid: &[String]) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let axes = grid
        .iter()
        .map(|spec| SweepAxis::parse(spec))
        .collect::<Result<Vec<_>, Error>>()?;
    let csv = experiment::sweep(&cfg, &axes)?;
    let out_dir = experiment::out_dir_path(&cfg, None);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Io { path: out_dir.display().to_string(), source: e })?;
    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, &csv)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    print!("{csv}");
    println!("# written to {}", path.display());
    Ok(())
}

fn stats(config: &PathBuf, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    print!("{}", experiment::stats_text(&cfg)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(opts) => run(opts, false),
        Command::Sweep { common, grid } => sweep(common, grid),
        Command::Stats { config, seed } => stats(config, *seed),
        Command::Trace(opts) => run(opts, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Deadlock {
            cycle,
            in_flight,
            trace_dump,
        }) => {
            let dump = std::env::temp_dir().join("gnnsim_deadlock_trace.txt");
            let wrote = std::fs::write(&dump, trace_dump).is_ok();
            eprintln!("error: deadlock at cycle {cycle} with {in_flight} node(s) in flight");
            if wrote {
                eprintln!("event trace dumped to {}", dump.display());
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
