//! Runs every stage for a config file and prints the summary.
//!
//! `cargo run --release --example run_config -- configs/unicycle_cosafe.json /tmp/out`

use std::path::PathBuf;

use symmargin::pipeline::{run_pipeline, Stage};
use symmargin::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let config: PathBuf = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json").into());
    let out: PathBuf = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("symmargin_out"));
    let cfg = ExperimentConfig::load(&config)?;
    let o = run_pipeline(&cfg, &out, Stage::Report)?;
    let s = &o.summary;
    println!("{}: {} cells x {} inputs, {} transitions", s.name, s.cells, s.inputs, s.transitions);
    if let Some(u) = s.uniform_margin {
        println!("uniform margin {:.6}", u.value);
    }
    for sim in &s.simulations {
        println!(
            "{} from {:?}: {}/{} completed, {} accepted",
            sim.policy, sim.x0, sim.completed, sim.runs, sim.accepted
        );
    }
    println!("artifacts in {}: {}", out.display(), s.artifacts.join(", "));
    Ok(())
}
