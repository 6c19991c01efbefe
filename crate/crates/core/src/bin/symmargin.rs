use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symmargin::config::ExperimentConfig;
use symmargin::pipeline::{run_pipeline, table1_matrix, table1_sweep, write_table1_csv, Stage, TABLE1};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Symbolic abstractions and their robustness margins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the symbolic model and save it
    Abstract(Common),
    /// Compute the margin table and its summary
    Margins(Common),
    /// Synthesize the controller for the configured specification
    Synthesize(Common),
    /// Simulate the closed loop under the configured policies
    Simulate(Common),
    /// Run every stage and write summary.json
    Report(Common),
    /// Uniform margin over the grid-size sweep
    Table1(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output.dir, then ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the simulation and sampling seeds
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the number of worker threads
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Abstract(a) => (Some(Stage::Abstract), a),
        Command::Margins(a) => (Some(Stage::Margins), a),
        Command::Synthesize(a) => (Some(Stage::Synthesize), a),
        Command::Simulate(a) => (Some(Stage::Simulate), a),
        Command::Report(a) => (Some(Stage::Report), a),
        Command::Table1(a) => (None, a),
    };
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        if let Some(s) = cfg.simulation.as_mut() {
            s.seed = seed;
        }
        if let Some(a) = cfg.alt_sim.as_mut() {
            a.seed = seed;
        }
    }
    let out = args
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = match stage {
        Some(stage) => run_pipeline(&cfg, &out, stage).and_then(|o| {
            println!("{}", serde_json::to_string_pretty(&o.summary)?);
            Ok(())
        }),
        None => std::fs::create_dir_all(&out)
            .map_err(Into::into)
            .and_then(|_| table1_sweep(&cfg, &TABLE1))
            .and_then(|rows| {
                write_table1_csv(&rows, &out.join("table1.csv"))?;
                println!("shapes: 1600=40x40 3200=80x40 6400=80x80 12800=80x160");
                for (nu, cols) in table1_matrix(&rows) {
                    let cells: Vec<String> = cols
                        .iter()
                        .map(|(n, m, r)| format!("{n}: {m:.6} (ref {r})"))
                        .collect();
                    println!("N_u={nu:<3} {}", cells.join("  "));
                }
                Ok(())
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
