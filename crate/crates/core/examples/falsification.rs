//! The margin is sharp for exact reachability: sampling below it never breaks
//! the abstraction, and a perturbation just above it does.

use symmargin::prelude::*;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
    let table = margin_table(&model)?;

    let below = check_alt_simulation(&model, &table, 0.99, 200_000, 7, SamplingMode::Uniform)?;
    println!("rho 0.99, uniform samples: {} violations of {}", below.violations, below.samples);
    let above = check_alt_simulation(&model, &table, 1.01, 200_000, 7, SamplingMode::FaceTargeted)?;
    println!("rho 1.01, face-targeted samples: {} violations of {}", above.violations, above.samples);

    let u = uniform_margin(&table);
    let w = adversarial_escape_witness(&model, &table, u.cell, u.input)?;
    println!("escape witness for cell {} input {} (margin {:.6}):", w.cell, w.input, w.margin);
    println!("  state {:?}, disturbance {:?}", w.state, w.disturbance);
    println!("  perturbation {:?} moves {:?} to {:?}", w.perturbation, w.image, w.landing);
    println!(
        "  lands in {:?}, a successor: {}",
        w.landed,
        model.is_successor(CellId::Cell(w.cell), w.input, w.landed)
    );
    Ok(())
}
