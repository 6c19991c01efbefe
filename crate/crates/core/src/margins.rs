//! Robustness margins carried by a symbolic model.
//!
//! `η(q, v, A)` is the largest ε for which the reach box of `(q, v)`, inflated
//! by the closed ε-ball, stays in the interior of `Q⁻¹(A)`. The margin table
//! evaluates it at `A = Δ_d(q, v)`; its minimum is the uniform margin.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::SymbolicModel;
use crate::error::{Error, Result};
use crate::geometry::{CellBlock, CellId};
use crate::synthesis::Controller;

/// `η(q, v, A)` for an explicit set `A` of abstract states.
///
/// Returns 0 when some successor of `(q, v)` is missing from `A`. Otherwise
/// `A` must be a rectangular block, optionally with the overflow state.
pub fn eta(model: &SymbolicModel, q: CellId, v: usize, a: &[CellId]) -> Result<f64> {
    let q = q.cell().ok_or(Error::OverflowHasNoBox)?;
    let own = model.successor_block(CellId::Cell(q), v)?;
    let set: HashSet<CellId> = a.iter().copied().collect();
    if own.overflow && !set.contains(&CellId::Overflow) {
        return Ok(0.0);
    }
    if model
        .grid()
        .block_cells(&own)
        .any(|c| !set.contains(&CellId::Cell(c)))
    {
        return Ok(0.0);
    }
    let block = model.grid().block_from_cells(a)?;
    eta_block(model, q, v, &block)
}

/// `η(q, v, A)` for a block `A`.
pub fn eta_block(model: &SymbolicModel, q: usize, v: usize, block: &CellBlock) -> Result<f64> {
    let r = model.reach_box(q, v)?;
    Ok(model.grid().block_margin(&r, block))
}

/// Margins `ε(q, v) = η(q, v, Δ_d(q, v))` for every cell and input.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginTable {
    values: Vec<f64>,
    num_inputs: usize,
    declared_delta: Option<f64>,
}

/// Builds the margin table; a zero entry means the model is inconsistent.
pub fn margin_table(model: &SymbolicModel) -> Result<MarginTable> {
    let m = model.num_inputs();
    let grid = model.grid();
    let values: Vec<f64> = (0..model.num_pairs())
        .into_par_iter()
        .map(|p| {
            let (q, v) = (p / m, p % m);
            let (lo, hi) = model.reach_bounds(q, v);
            grid.margin_raw(lo, hi, model.block_ranges(q, v), model.can_overflow(q, v))
        })
        .collect();
    if let Some(p) = values.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::ZeroMargin {
            cell: p / m,
            input: p % m,
        });
    }
    Ok(MarginTable {
        values,
        num_inputs: m,
        declared_delta: model.reach_operator().declared_delta(),
    })
}

impl MarginTable {
    /// Builds a table from raw values (row-major in cell, then input).
    pub fn from_values(values: Vec<f64>, num_inputs: usize, declared_delta: Option<f64>) -> Result<Self> {
        if num_inputs == 0 || values.len() % num_inputs != 0 {
            return Err(Error::DimensionMismatch {
                what: "margin table",
                expected: num_inputs,
                got: values.len(),
            });
        }
        Ok(MarginTable {
            values,
            num_inputs,
            declared_delta,
        })
    }

    #[inline]
    pub fn get(&self, q: usize, v: usize) -> f64 {
        self.values[q * self.num_inputs + v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_cells(&self) -> usize {
        self.values.len() / self.num_inputs
    }

    pub fn declared_delta(&self) -> Option<f64> {
        self.declared_delta
    }

    /// Margin at a concrete state: constant on cells, zero outside the grid.
    pub fn at(&self, q: CellId, v: usize) -> f64 {
        q.cell().map_or(0.0, |q| self.get(q, v))
    }
}

/// The uniform margin with the pair attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformMargin {
    pub value: f64,
    pub cell: usize,
    pub input: usize,
}

/// Global minimum of the table; the lowest flat index wins ties.
pub fn uniform_margin(table: &MarginTable) -> UniformMargin {
    let (p, value) = table
        .values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bp, bv), (p, v)| if v < bv { (p, v) } else { (bp, bv) });
    UniformMargin {
        value,
        cell: p / table.num_inputs,
        input: p % table.num_inputs,
    }
}

/// Per controlled cell, the largest margin over its enabled inputs.
pub fn state_margin_field(table: &MarginTable, controller: &Controller) -> BTreeMap<usize, f64> {
    controller
        .domain()
        .map(|q| {
            let best = controller
                .enabled(q)
                .iter()
                .map(|v| table.get(q, v))
                .fold(f64::NEG_INFINITY, f64::max);
            (q, best)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Stats {
    /// Statistics of the finite values; `None` if there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Stats> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let count = v.len();
        let median = if count % 2 == 1 {
            v[count / 2]
        } else {
            0.5 * (v[count / 2 - 1] + v[count / 2])
        };
        Some(Stats {
            count,
            min: v[0],
            max: v[count - 1],
            mean: v.iter().sum::<f64>() / count as f64,
            median,
        })
    }
}

/// Headline numbers of a margin table.
///
/// `in_domain` restricts to pairs whose successors avoid the overflow state.
/// The per-dimension statistics use the smaller of the two face gaps of the
/// reach box to its block along each axis; `per_pair` takes every pair,
/// `per_state` first takes the minimum over inputs in each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub uniform: UniformMargin,
    pub infinite: usize,
    pub all: Option<Stats>,
    pub in_domain: Option<Stats>,
    pub per_dimension_per_pair: Vec<Option<Stats>>,
    pub per_dimension_per_state: Vec<Option<Stats>>,
}

pub fn summarize(model: &SymbolicModel, table: &MarginTable) -> MarginSummary {
    let n = model.grid().dim();
    let m = model.num_inputs();
    let gaps: Vec<Vec<f64>> = (0..model.num_pairs())
        .into_par_iter()
        .map(|p| pair_gaps(model, p / m, p % m))
        .collect();
    let per_state: Vec<Vec<f64>> = gaps
        .chunks(m)
        .map(|cell| {
            (0..n)
                .map(|d| cell.iter().map(|g| g[d]).fold(f64::INFINITY, f64::min))
                .collect()
        })
        .collect();
    MarginSummary {
        uniform: uniform_margin(table),
        infinite: table.values.iter().filter(|v| v.is_infinite()).count(),
        all: Stats::of(table.values.iter().copied()),
        in_domain: Stats::of(
            (0..model.num_pairs())
                .filter(|&p| !model.can_overflow(p / m, p % m))
                .map(|p| table.values[p]),
        ),
        per_dimension_per_pair: (0..n)
            .map(|d| Stats::of(gaps.iter().map(|g| g[d])))
            .collect(),
        per_dimension_per_state: (0..n)
            .map(|d| Stats::of(per_state.iter().map(|g| g[d])))
            .collect(),
    }
}

/// Smaller face gap per axis between the reach box of `(q, v)` and its block.
pub fn pair_gaps(model: &SymbolicModel, q: usize, v: usize) -> Vec<f64> {
    let (lo, hi) = model.reach_bounds(q, v);
    model
        .grid()
        .side_gaps_raw(lo, hi, model.block_ranges(q, v), model.can_overflow(q, v))
        .into_iter()
        .map(|[a, b]| a.min(b))
        .collect()
}

/// CSV with one row per pair: cell multi-index, input index, margin.
pub fn write_margin_csv(model: &SymbolicModel, table: &MarginTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = model.grid().dim();
    let mut header: Vec<String> = (0..n).map(|d| format!("i{d}")).collect();
    header.push("input".into());
    header.push("margin".into());
    w.write_record(&header)?;
    for q in 0..table.num_cells() {
        let idx = model.grid().multi_index(q);
        for v in 0..table.num_inputs {
            let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            row.push(v.to_string());
            row.push(format_f64(table.get(q, v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(summary: &MarginSummary, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    Ok(())
}

/// Shortest round-trip representation, with `inf` for infinite values.
pub(crate) fn format_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}
