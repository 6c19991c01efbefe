#![allow(dead_code)]

use std::f64::consts::PI;

use symmargin::prelude::*;
use symmargin::systems::AffineDynamics;

pub fn rect(lo: &[f64], hi: &[f64]) -> HyperRect {
    HyperRect::new(lo.to_vec(), hi.to_vec()).unwrap()
}

pub fn double_integrator() -> SystemSpec {
    SystemSpec::new(
        Dynamics::DoubleIntegrator { tau: 0.5 },
        rect(&[0.0, -6.0], &[6.0, 6.0]),
        rect(&[-1.0], &[1.0]),
        rect(&[-0.01, -0.01], &[0.01, 0.01]),
        vec![false, false],
    )
    .unwrap()
}

pub fn di_model(counts: [usize; 2], inputs: usize) -> SymbolicModel {
    let sys = double_integrator();
    let grid = UniformGrid::new(sys.domain().clone(), counts.to_vec(), vec![false, false]).unwrap();
    let u = InputGrid::new(sys.input_set(), vec![inputs]).unwrap();
    build_abstraction(&sys, &grid, &u, &ReachOperator::ExactLinear).unwrap()
}

pub fn unicycle(counts: [usize; 3]) -> SymbolicModel {
    let sys = SystemSpec::new(
        Dynamics::Unicycle { tau: 1.0 },
        rect(&[0.0, 0.0, -PI], &[10.0, 10.0, PI]),
        rect(&[0.25, -1.0], &[1.0, 1.0]),
        rect(&[-0.05; 3], &[0.05; 3]),
        vec![false, false, true],
    )
    .unwrap();
    let grid = UniformGrid::new(sys.domain().clone(), counts.to_vec(), vec![false, false, true]).unwrap();
    let u = InputGrid::new(sys.input_set(), vec![3, 5]).unwrap();
    build_abstraction(&sys, &grid, &u, &ReachOperator::growth_bound()).unwrap()
}

/// `x⁺ = x + u + c + d` on `[0, cells]` with unit cells and the given inputs.
pub fn drift_1d(cells: usize, inputs: &[f64], c: f64, dist: f64) -> SymbolicModel {
    drift_1d_gain(cells, inputs, 1.0, c, dist)
}

/// `x⁺ = x + g·u + c + d`.
pub fn drift_1d_gain(cells: usize, inputs: &[f64], g: f64, c: f64, dist: f64) -> SymbolicModel {
    let lo = inputs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dom = rect(&[0.0], &[cells as f64]);
    let sys = SystemSpec::new(
        Dynamics::Affine(AffineDynamics {
            a: vec![vec![1.0]],
            b: vec![vec![g]],
            e: vec![vec![1.0]],
            c: vec![c],
        }),
        dom.clone(),
        rect(&[lo], &[hi]),
        rect(&[-dist], &[dist]),
        vec![false],
    )
    .unwrap();
    let grid = UniformGrid::new(dom, vec![cells], vec![false]).unwrap();
    let u = InputGrid::new(&rect(&[lo], &[hi]), vec![inputs.len()]).unwrap();
    // the input grid must reproduce the requested values
    for (k, &v) in inputs.iter().enumerate() {
        assert!((u.value(k)[0] - v).abs() < 1e-12, "inputs must be evenly spaced and sorted");
    }
    build_abstraction(&sys, &grid, &u, &ReachOperator::ExactLinear).unwrap()
}

/// Successors by direct closed-box intersection with every cell.
pub fn brute_successors(model: &SymbolicModel, q: usize, v: usize) -> Vec<CellId> {
    let r = model.reach_box(q, v).unwrap();
    let grid = model.grid();
    let mut out: Vec<CellId> = (0..grid.num_cells())
        .filter(|&c| grid.cell_bounds(CellId::Cell(c)).unwrap().intersects(&r))
        .map(CellId::Cell)
        .collect();
    let inside = (0..grid.dim()).all(|d| {
        grid.periodic()[d] || (grid.domain().lo()[d] < r.lo()[d] && r.hi()[d] < grid.domain().hi()[d])
    });
    if !inside {
        out.push(CellId::Overflow);
    }
    out
}
