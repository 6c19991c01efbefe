//! Margin table of the double integrator on the 80x160 grid with five inputs.

use std::time::Instant;

use symmargin::margins::summarize;
use symmargin::prelude::*;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;

    let t = Instant::now();
    let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
    let table = margin_table(&model)?;
    println!(
        "{} cells, {} inputs, {} transitions in {:.2?}",
        model.num_cells(),
        model.num_inputs(),
        model.transition_count(),
        t.elapsed()
    );

    let s = summarize(&model, &table);
    let u = s.uniform;
    println!("uniform margin {:.6} at cell {} input {}", u.value, u.cell, u.input);
    if let Some(inner) = s.in_domain {
        println!("pairs that cannot overflow: margins in [{:.5}, {:.5}]", inner.min, inner.max);
    }
    let q = model.grid().quantize(&[3.0, 0.0]).cell().expect("inside the domain");
    for v in 0..model.num_inputs() {
        println!("  eps(q={q}, u={:+.1}) = {:.5}", model.inputs().value(v)[0], table.get(q, v));
    }
    Ok(())
}
