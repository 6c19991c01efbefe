mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use symmargin::prelude::*;
use symmargin::simulation::{replay_dfa, simulate_many, RunStatus};
use symmargin::synthesis::DeterministicController;

struct Fixture {
    model: SymbolicModel,
    table: MarginTable,
    det: DeterministicController,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = common::di_model([40, 40], 5);
        let table = margin_table(&model).unwrap();
        let ctrl = maximal_safety_controller(&model, &vec![true; model.num_cells()]).unwrap();
        let det = determinize_max_margin(&ctrl, &table);
        Fixture { model, table, det }
    })
}

fn controlled_start(f: &Fixture, pick: usize) -> Vec<f64> {
    let dom: Vec<usize> = f.det.choices().iter().enumerate().filter_map(|(q, c)| c.map(|_| q)).collect();
    let q = dom[pick % dom.len()];
    f.model.grid().cell_bounds(CellId::Cell(q)).unwrap().center()
}

fn policy(perturbation: PerturbationMap, seed: u64) -> SimPolicy {
    SimPolicy {
        disturbance: DisturbanceMode::UniformRandom,
        perturbation,
        horizon: 60,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_replay_from_their_recorded_inputs(pick in any::<usize>(), seed in any::<u64>(), rho in 0.0f64..0.999) {
        let f = fixture();
        let x0 = controlled_start(f, pick);
        let p = policy(PerturbationMap::Scaled { rho }, seed);
        let t = simulate_closed_loop(&f.model, &f.table, ClosedLoop::Deterministic(&f.det), &x0, &p, 3).unwrap();
        let sys = f.model.system();
        for k in 0..t.steps() {
            let q = f.model.grid().quantize(&t.states[k]).cell().unwrap();
            let v = t.inputs[k];
            prop_assert_eq!(Some(v), f.det.input(CellId::Cell(q)));
            prop_assert_eq!(t.budgets[k], rho * f.table.get(q, v));
            prop_assert!(t.perturbations[k].iter().all(|c| c.abs() <= t.budgets[k]));
            let y = sys.perturbed_step(&t.states[k], f.model.inputs().value(v), &t.disturbances[k], &t.perturbations[k], t.budgets[k]).unwrap();
            prop_assert_eq!(&y, &t.states[k + 1]);
        }
        // below the margin the safety controller keeps the run in its domain
        prop_assert_eq!(t.status, RunStatus::Completed);
        prop_assert_eq!(t.steps(), 60);
    }

    #[test]
    fn same_seed_same_run(pick in any::<usize>(), seed in any::<u64>()) {
        let f = fixture();
        let x0 = controlled_start(f, pick);
        let p = policy(PerturbationMap::Scaled { rho: 0.5 }, seed);
        let a = simulate_closed_loop(&f.model, &f.table, ClosedLoop::Deterministic(&f.det), &x0, &p, 9).unwrap();
        let b = simulate_closed_loop(&f.model, &f.table, ClosedLoop::Deterministic(&f.det), &x0, &p, 9).unwrap();
        prop_assert_eq!(&a, &b);
        let c = simulate_closed_loop(&f.model, &f.table, ClosedLoop::Deterministic(&f.det), &x0, &p, 10).unwrap();
        prop_assert_ne!(a.disturbances, c.disturbances);
    }
}

#[test]
fn batches_do_not_depend_on_the_thread_count() {
    let f = fixture();
    let x0 = controlled_start(f, 17);
    let p = policy(PerturbationMap::Scaled { rho: 0.9 }, 5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let runs = simulate_many(&f.model, &f.table, ClosedLoop::Deterministic(&f.det), &x0, &p, 16).unwrap();
            let alt = check_alt_simulation(&f.model, &f.table, 0.99, 20_000, 3, SamplingMode::Uniform).unwrap();
            (runs, alt)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn alternating_simulation_holds_below_and_breaks_above_the_margin() {
    let f = fixture();
    let below = check_alt_simulation(&f.model, &f.table, 0.99, 50_000, 11, SamplingMode::Uniform).unwrap();
    assert!(below.passed(), "{} violations", below.violations);
    let below = check_alt_simulation(&f.model, &f.table, 0.99, 50_000, 11, SamplingMode::FaceTargeted).unwrap();
    assert!(below.passed(), "{} violations", below.violations);
    let above = check_alt_simulation(&f.model, &f.table, 1.01, 50_000, 11, SamplingMode::FaceTargeted).unwrap();
    assert!(above.violations > 0);
    for w in &above.witnesses {
        assert!(!f.model.is_successor(CellId::Cell(w.cell), w.input, w.landed));
    }
}

#[test]
fn escape_witnesses_leave_the_successor_set() {
    let f = fixture();
    let mut built = 0;
    for q in (0..f.model.num_cells()).step_by(13) {
        for v in 0..f.model.num_inputs() {
            let Ok(w) = adversarial_escape_witness(&f.model, &f.table, q, v) else { continue };
            built += 1;
            assert_eq!(f.model.grid().quantize(&w.state), CellId::Cell(q));
            let norm = w.perturbation.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            assert!(norm <= f.table.get(q, v) * (1.0 + 2e-6));
            assert!(!f.model.is_successor(CellId::Cell(q), v, w.landed));
        }
    }
    assert!(built > 100);
}

#[test]
fn cosafe_runs_track_the_automaton() {
    let model = common::drift_1d(12, &[-2.0, 0.0, 2.0], 0.05, 0.1);
    let table = margin_table(&model).unwrap();
    let regions = vec![common::rect(&[9.0], &[12.0]), common::rect(&[4.2], &[4.8])];
    let labeling = Labeling::from_regions(model.grid(), regions).unwrap();
    let dfa = SpecDFA::reach_avoid();
    let pp = cosafe_controller(&model, &dfa, &labeling).unwrap();
    let p = policy(PerturbationMap::Scaled { rho: 0.99 }, 2);
    let mut accepted = 0;
    for x0 in [0.5, 2.5, 6.5, 11.5] {
        let t = simulate_closed_loop(&model, &table, ClosedLoop::CoSafe(&pp), &[x0], &p, 0).unwrap();
        assert_eq!(t.dfa_states, replay_dfa(&dfa, &labeling, &t.cells(&model)));
        let winning = pp.winning_initial_cells().any(|q| q == model.grid().quantize(&[x0]).cell().unwrap());
        assert_eq!(winning, matches!(t.verdict, Some(symmargin::simulation::SpecVerdict::Accepted { .. })), "x0 = {x0}");
        accepted += winning as usize;
    }
    assert!(accepted > 0);
}
