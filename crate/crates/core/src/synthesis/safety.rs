use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{check_input_count, Controller, InputSet};
use crate::abstraction::SymbolicModel;
use crate::error::{Error, Result};
use crate::geometry::{CellId, HyperRect, UniformGrid, FACE_TOL};

/// How a cell is matched against a region box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    /// The closed cell lies inside the region.
    Contained,
    /// The closed cell meets the region.
    Intersecting,
}

/// Cell mask of a region, with faces compared up to [`FACE_TOL`] cell widths.
pub fn cells_in_region(grid: &UniformGrid, region: &HyperRect, mode: RegionMode) -> Result<Vec<bool>> {
    if region.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            what: "region",
            expected: grid.dim(),
            got: region.dim(),
        });
    }
    let tol: Vec<f64> = grid.widths().iter().map(|h| h * FACE_TOL).collect();
    let grown = HyperRect::new(
        region.lo().iter().zip(&tol).map(|(a, t)| a - t).collect(),
        region.hi().iter().zip(&tol).map(|(b, t)| b + t).collect(),
    )?;
    (0..grid.num_cells())
        .map(|q| {
            let b = grid.cell_bounds(CellId::Cell(q))?;
            Ok(match mode {
                RegionMode::Contained => grown.contains_rect(&b),
                RegionMode::Intersecting => grown.intersects(&b),
            })
        })
        .collect()
}

/// Greatest fixed point of the safety game on `safe`.
///
/// Each sweep keeps the inputs whose successor block avoids the overflow
/// state and stays in the current candidate set, then drops cells left
/// without inputs. Sweeps use the previous candidate set only, so the result
/// does not depend on the number of worker threads.
pub fn maximal_safety_controller(model: &SymbolicModel, safe: &[bool]) -> Result<Controller> {
    check_input_count(model)?;
    if safe.len() != model.num_cells() {
        return Err(Error::DimensionMismatch {
            what: "safe set",
            expected: model.num_cells(),
            got: safe.len(),
        });
    }
    let grid = model.grid();
    let m = model.num_inputs();
    let mut candidate = safe.to_vec();
    let mut sweeps = 0;
    let enabled = loop {
        sweeps += 1;
        let enabled: Vec<InputSet> = (0..model.num_cells())
            .into_par_iter()
            .map(|q| {
                if !candidate[q] {
                    return InputSet::EMPTY;
                }
                (0..m)
                    .filter(|&v| {
                        !model.can_overflow(q, v)
                            && grid
                                .ranges_cells(model.block_ranges(q, v))
                                .all(|c| candidate[c])
                    })
                    .fold(InputSet::EMPTY, InputSet::with)
            })
            .collect();
        let next: Vec<bool> = enabled.iter().map(|s| !s.is_empty()).collect();
        if next == candidate {
            break enabled;
        }
        candidate = next;
    };
    let c = Controller::new(enabled);
    let size = c.domain_size();
    debug!(sweeps, size, "safety fixed point reached");
    if size == 0 {
        warn!("safety controller has an empty domain");
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::build_abstraction;
    use crate::reachability::ReachOperator;
    use crate::systems::{AffineDynamics, Dynamics, InputGrid, SystemSpec};

    fn drift_model(cells: usize) -> SymbolicModel {
        let dom = HyperRect::new(vec![0.0], vec![cells as f64]).unwrap();
        let sys = SystemSpec::new(
            Dynamics::Affine(AffineDynamics {
                a: vec![vec![1.0]],
                b: vec![vec![1.0]],
                e: vec![vec![1.0]],
                c: vec![0.5],
            }),
            dom.clone(),
            HyperRect::new(vec![-1.0], vec![0.0]).unwrap(),
            HyperRect::new(vec![-0.1], vec![0.1]).unwrap(),
            vec![false],
        )
        .unwrap();
        let grid = UniformGrid::new(dom, vec![cells], vec![false]).unwrap();
        let inputs = InputGrid::new(sys.input_set(), vec![2]).unwrap();
        build_abstraction(&sys, &grid, &inputs, &ReachOperator::ExactLinear).unwrap()
    }

    #[test]
    fn everything_safe_when_no_block_leaves() {
        let m = drift_model(5);
        // with all cells safe, the only losses come from the overflow state
        let c = maximal_safety_controller(&m, &[true; 5]).unwrap();
        for q in 0..5 {
            for v in c.enabled(q).iter() {
                assert!(!m.can_overflow(q, v));
            }
        }
    }

    #[test]
    fn cells_in_region_modes() {
        let g = UniformGrid::new(HyperRect::new(vec![0.0], vec![1.0]).unwrap(), vec![10], vec![false])
            .unwrap();
        let r = HyperRect::new(vec![0.2], vec![0.45]).unwrap();
        let inside = cells_in_region(&g, &r, RegionMode::Contained).unwrap();
        let touch = cells_in_region(&g, &r, RegionMode::Intersecting).unwrap();
        let idx = |m: &[bool]| m.iter().enumerate().filter(|x| *x.1).map(|x| x.0).collect::<Vec<_>>();
        assert_eq!(idx(&inside), vec![2, 3]);
        assert_eq!(idx(&touch), vec![1, 2, 3, 4]);
    }
}
