//! Maximal safety controller, its margin-maximizing determinization and the
//! margin field over the controller domain.

use symmargin::prelude::*;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
    let table = margin_table(&model)?;

    let safe = cells_in_region(model.grid(), model.grid().domain(), RegionMode::Contained)?;
    let ctrl = maximal_safety_controller(&model, &safe)?;
    let det = determinize_max_margin(&ctrl, &table);
    let field = state_margin_field(&table, &ctrl);
    println!("controller domain: {} of {} cells", ctrl.domain_size(), model.num_cells());

    let (lo, hi) = field
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    println!("best margin per controlled cell ranges over [{lo:.5}, {hi:.5}]");

    // a coarse text map of the chosen input: '.' outside the domain
    let grid = model.grid();
    for j in (0..grid.counts()[1]).rev().step_by(10) {
        let row: String = (0..grid.counts()[0])
            .step_by(2)
            .map(|i| {
                let q = grid.flat_index(&[i, j]).expect("index in range");
                match det.input(CellId::Cell(q)) {
                    None => '.',
                    Some(v) => char::from_digit(v as u32, 10).unwrap_or('?'),
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
