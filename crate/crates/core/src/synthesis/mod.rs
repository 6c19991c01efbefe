//! Controllers on the symbolic model: safety and co-safe synthesis,
//! refinement to concrete states, and determinization by margin.

mod automaton;
mod product;
mod safety;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::SymbolicModel;
use crate::error::{Error, Result};
use crate::geometry::{CellId, UniformGrid};
use crate::margins::MarginTable;

pub use automaton::{DfaState, Labeling, SpecDFA};
pub use product::{cosafe_controller, ProductPolicy};
pub use safety::{cells_in_region, maximal_safety_controller, RegionMode};

/// Set of input indices, limited to 64 inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputSet(pub u64);

impl InputSet {
    pub const EMPTY: InputSet = InputSet(0);
    pub const MAX_INPUTS: usize = 64;

    pub fn full(n: usize) -> InputSet {
        debug_assert!(n <= Self::MAX_INPUTS);
        if n >= 64 {
            InputSet(u64::MAX)
        } else {
            InputSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices(it: impl IntoIterator<Item = usize>) -> InputSet {
        it.into_iter().fold(InputSet::EMPTY, |s, v| s.with(v))
    }

    #[must_use]
    pub fn with(self, v: usize) -> InputSet {
        InputSet(self.0 | 1u64 << v)
    }

    pub fn contains(self, v: usize) -> bool {
        v < 64 && self.0 >> v & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(v)
            }
        })
    }
}

pub(crate) fn check_input_count(model: &SymbolicModel) -> Result<()> {
    if model.num_inputs() > InputSet::MAX_INPUTS {
        return Err(Error::Config(format!(
            "at most {} inputs are supported by the synthesis engine, got {}",
            InputSet::MAX_INPUTS,
            model.num_inputs()
        )));
    }
    Ok(())
}

/// Map from grid cells to enabled inputs; the overflow state is never controlled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Controller {
    enabled: Vec<InputSet>,
}

impl Controller {
    pub fn new(enabled: Vec<InputSet>) -> Self {
        Controller { enabled }
    }

    pub fn num_cells(&self) -> usize {
        self.enabled.len()
    }

    pub fn enabled(&self, q: usize) -> InputSet {
        self.enabled.get(q).copied().unwrap_or_default()
    }

    pub fn enabled_at(&self, q: CellId) -> InputSet {
        q.cell().map_or(InputSet::EMPTY, |q| self.enabled(q))
    }

    pub fn in_domain(&self, q: CellId) -> bool {
        !self.enabled_at(q).is_empty()
    }

    /// Cells with at least one enabled input, increasing.
    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.enabled
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(q, _)| q)
    }

    pub fn domain_size(&self) -> usize {
        self.domain().count()
    }

    /// Concrete view `x ↦ C_d(Q(x))`.
    pub fn refine<'a>(&'a self, grid: &'a UniformGrid) -> RefinedController<'a> {
        RefinedController { grid, inner: self }
    }

    /// CSV: cell multi-index, then the enabled input indices separated by `;`.
    pub fn write_csv(&self, grid: &UniformGrid, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = grid.dim();
        let mut header: Vec<String> = (0..n).map(|d| format!("i{d}")).collect();
        header.push("inputs".into());
        w.write_record(&header)?;
        for q in self.domain() {
            let mut row: Vec<String> = grid.multi_index(q).iter().map(|i| i.to_string()).collect();
            row.push(join_inputs(self.enabled(q)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn join_inputs(s: InputSet) -> String {
    s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// The refined controller `C(x) = C_d(Q(x))`.
#[derive(Clone, Copy, Debug)]
pub struct RefinedController<'a> {
    grid: &'a UniformGrid,
    inner: &'a Controller,
}

impl RefinedController<'_> {
    /// Enabled inputs at a concrete state; empty outside the domain.
    pub fn enabled(&self, x: &[f64]) -> InputSet {
        self.inner.enabled_at(self.grid.quantize(x))
    }
}

/// The controlled transition system: base transitions under enabled inputs only.
#[derive(Clone, Copy, Debug)]
pub struct ControlledModel<'a> {
    pub model: &'a SymbolicModel,
    pub controller: &'a Controller,
}

impl ControlledModel<'_> {
    pub fn has_transition(&self, q: CellId, v: usize, next: CellId) -> bool {
        self.controller.enabled_at(q).contains(v) && self.model.is_successor(q, v, next)
    }

    /// True when the quantized run `(q_k, v_k)` is a behavior prefix of the
    /// controlled model.
    pub fn accepts_trace(&self, cells: &[CellId], inputs: &[usize]) -> bool {
        inputs.len() + 1 == cells.len()
            && inputs
                .iter()
                .enumerate()
                .all(|(k, &v)| self.has_transition(cells[k], v, cells[k + 1]))
    }
}

/// One input per controlled cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicController {
    choice: Vec<Option<usize>>,
}

impl DeterministicController {
    pub fn input(&self, q: CellId) -> Option<usize> {
        q.cell().and_then(|q| self.choice.get(q).copied().flatten())
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choice
    }

    pub fn as_controller(&self) -> Controller {
        Controller::new(
            self.choice
                .iter()
                .map(|c| c.map_or(InputSet::EMPTY, |v| InputSet::EMPTY.with(v)))
                .collect(),
        )
    }

    /// CSV: cell multi-index, chosen input index, chosen input value, margin.
    pub fn write_csv(&self, model: &SymbolicModel, table: &MarginTable, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = model.grid().dim();
        let p = model.inputs().dim();
        let mut header: Vec<String> = (0..n).map(|d| format!("i{d}")).collect();
        header.push("input".into());
        header.extend((0..p).map(|j| format!("u{j}")));
        header.push("margin".into());
        w.write_record(&header)?;
        for (q, c) in self.choice.iter().enumerate() {
            let Some(v) = *c else { continue };
            let mut row: Vec<String> = model.grid().multi_index(q).iter().map(|i| i.to_string()).collect();
            row.push(v.to_string());
            row.extend(model.inputs().value(v).iter().map(|u| u.to_string()));
            row.push(crate::margins::format_f64(table.get(q, v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Most robust enabled input; the lowest index wins ties.
pub(crate) fn argmax_margin(set: InputSet, margin: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for v in set.iter() {
        let e = margin(v);
        if best.map_or(true, |(_, b)| e > b) {
            best = Some((v, e));
        }
    }
    best.map(|(v, _)| v)
}

/// Keeps, per cell, the enabled input with the largest margin.
pub fn determinize_max_margin(controller: &Controller, table: &MarginTable) -> DeterministicController {
    DeterministicController {
        choice: (0..controller.num_cells())
            .map(|q| argmax_margin(controller.enabled(q), |v| table.get(q, v)))
            .collect(),
    }
}
