//! Uniform margin of the double integrator across grid sizes and input counts.

use symmargin::pipeline::{table1_matrix, table1_sweep, TABLE1};
use symmargin::prelude::*;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let rows = table1_sweep(&cfg, &TABLE1)?;
    println!("N_u  uniform margin by cell count (reference)");
    for (inputs, cols) in table1_matrix(&rows) {
        let cells: Vec<String> = cols
            .iter()
            .map(|(n, m, r)| format!("{n}: {m:.5} ({r})"))
            .collect();
        println!("{inputs:>5}  {}", cells.join("  "));
    }
    Ok(())
}
