//! Unicycle on a 100x100x30 grid with growth-bound reachability: visit exactly
//! one of two regions, then reach a target, avoiding an obstacle.

use std::time::Instant;

use symmargin::config::expand_initial_state;
use symmargin::margins::summarize;
use symmargin::prelude::*;
use symmargin::simulation::{satisfies_exclusive_visit, SpecVerdict};

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/unicycle_cosafe.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;

    let t = Instant::now();
    let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
    let table = margin_table(&model)?;
    println!("{} pairs, {} transitions, {:.1?}", model.num_pairs(), model.transition_count(), t.elapsed());
    let s = summarize(&model, &table);
    println!("uniform margin {:.5}", s.uniform.value);
    for (d, st) in s.per_dimension_per_state.iter().enumerate() {
        if let Some(st) = st {
            println!("  axis {d}: gaps in [{:.4}, {:.4}], mean {:.4}", st.min, st.max, st.mean);
        }
    }

    let regions = cfg.spec.regions();
    let labeling = Labeling::from_regions(model.grid(), regions.clone())?;
    let policy = cosafe_controller(&model, &SpecDFA::exclusive_visit_then_reach(), &labeling)?;
    println!("{} winning start cells", policy.winning_initial_cells().count());

    let sim = SimPolicy {
        disturbance: DisturbanceMode::UniformRandom,
        perturbation: PerturbationMap::Scaled { rho: 0.99 },
        horizon: 200,
        seed: 1,
    };
    for p in [[0.5, 4.0], [0.5, 5.0]] {
        for x0 in expand_initial_state(model.grid(), &p)?.into_iter().step_by(5) {
            let t = simulate_closed_loop(&model, &table, ClosedLoop::CoSafe(&policy), &x0, &sim, 0)?;
            let verdict = match t.verdict {
                Some(SpecVerdict::Accepted { step }) => format!("accepted after {step} steps"),
                Some(SpecVerdict::Rejected { step }) => format!("rejected after {step} steps"),
                _ => format!("{:?}", t.status),
            };
            println!(
                "  from ({:.1}, {:.1}, {:+.2}): {verdict}, order respected: {}",
                x0[0],
                x0[1],
                x0[2],
                satisfies_exclusive_visit(&t.states, &regions)
            );
        }
    }
    Ok(())
}
