//! Closed-loop runs of the double integrator under perturbations below and
//! beyond the margin.

use symmargin::prelude::*;
use symmargin::simulation::simulate_many;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/double_integrator_table1_5x12800.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
    let table = margin_table(&model)?;
    let ctrl = maximal_safety_controller(&model, &vec![true; model.num_cells()])?;
    let det = determinize_max_margin(&ctrl, &table);

    let x0 = std::env::args()
        .nth(1)
        .map(|s| s.split(',').map(|v| v.trim().parse().expect("x0 as 'p,v'")).collect())
        .unwrap_or_else(|| vec![2.0, 1.5]);
    println!("x0 = {x0:?}, in controller domain: {}", ctrl.in_domain(model.grid().quantize(&x0)));

    let policies = [
        ("nominal", DisturbanceMode::Zero, PerturbationMap::None),
        ("rho 0.99", DisturbanceMode::UniformRandom, PerturbationMap::Scaled { rho: 0.99 }),
        ("adversarial 1.01", DisturbanceMode::Corner, PerturbationMap::Adversarial { rho: 1.01 }),
    ];
    for (name, disturbance, perturbation) in policies {
        let policy = SimPolicy { disturbance, perturbation, horizon: 100, seed: 1 };
        let runs = simulate_many(&model, &table, ClosedLoop::Deterministic(&det), &x0, &policy, 100)?;
        let kept = runs.iter().filter(|t| t.status == symmargin::simulation::RunStatus::Completed).count();
        let last = runs[0].states.last().expect("at least the start");
        println!("{name:>17}: {kept}/100 runs stay controlled; run 0 ends at ({:.3}, {:.3})", last[0], last[1]);
    }
    Ok(())
}
