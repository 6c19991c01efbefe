//! The symbolic model: cells plus the overflow state, the finite input grid,
//! and per (cell, input) pair the cached reach box and its covering block.
//!
//! Pairs are stored flat with index `q * num_inputs + v`. The overflow
//! state's transitions (to every state, under every input) are never stored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::error::{Error, Result};
use crate::geometry::{CellBlock, CellId, HyperRect, IndexRange, UniformGrid, FACE_TOL};
use crate::reachability::ReachOperator;
use crate::systems::{InputGrid, SystemSpec};

const MAGIC: &str = "SYMMARGIN-MODEL 1";

#[derive(Clone, Debug)]
pub struct SymbolicModel {
    sys: SystemSpec,
    grid: UniformGrid,
    inputs: InputGrid,
    reach: ReachOperator,
    initial: Vec<usize>,
    reach_lo: Vec<f64>,
    reach_hi: Vec<f64>,
    ranges: Vec<IndexRange>,
    overflow: Vec<bool>,
}

/// Builds the symbolic model, evaluating every (cell, input) pair in parallel.
pub fn build_abstraction(
    sys: &SystemSpec,
    grid: &UniformGrid,
    inputs: &InputGrid,
    reach: &ReachOperator,
) -> Result<SymbolicModel> {
    if grid.domain() != sys.domain() {
        return Err(Error::System("grid domain differs from the system domain".into()));
    }
    if grid.periodic() != sys.periodic() {
        return Err(Error::System("grid and system disagree on periodic axes".into()));
    }
    if inputs.dim() != sys.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input grid",
            expected: sys.input_dim(),
            got: inputs.dim(),
        });
    }
    if !sys.input_set().contains_rect(inputs.set()) {
        return Err(Error::System("input grid leaves the input set".into()));
    }
    let eval = reach.evaluator(sys)?;
    let n = grid.dim();
    let m = inputs.len();
    let cells = grid.num_cells();
    let pairs = cells * m;
    info!(cells, inputs = m, pairs, op = reach.name(), "building abstraction");

    let mut reach_lo = vec![0.0; pairs * n];
    let mut reach_hi = vec![0.0; pairs * n];
    let mut ranges = vec![IndexRange { start: 0, len: 0 }; pairs * n];
    let mut overflow = vec![false; pairs];

    reach_lo
        .par_chunks_mut(m * n)
        .zip(reach_hi.par_chunks_mut(m * n))
        .zip(ranges.par_chunks_mut(m * n))
        .zip(overflow.par_chunks_mut(m))
        .enumerate()
        .try_for_each(|(q, (((lo, hi), rg), of))| -> Result<()> {
            let cell = grid.cell_bounds(CellId::Cell(q))?;
            for v in 0..m {
                let r = eval.eval(&cell, inputs.value(v))?;
                let block = grid.covering_block(&r);
                let s = v * n..(v + 1) * n;
                lo[s.clone()].copy_from_slice(r.lo());
                hi[s.clone()].copy_from_slice(r.hi());
                rg[s].copy_from_slice(&block.ranges);
                of[v] = block.overflow;
            }
            Ok(())
        })?;

    let model = SymbolicModel {
        sys: sys.clone(),
        grid: grid.clone(),
        inputs: inputs.clone(),
        reach: reach.clone(),
        initial: (0..cells).collect(),
        reach_lo,
        reach_hi,
        ranges,
        overflow,
    };
    debug!(transitions = model.transition_count(), "abstraction built");
    Ok(model)
}

impl SymbolicModel {
    pub fn system(&self) -> &SystemSpec {
        &self.sys
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn inputs(&self) -> &InputGrid {
        &self.inputs
    }

    pub fn reach_operator(&self) -> &ReachOperator {
        &self.reach
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.overflow.len()
    }

    #[inline]
    pub fn pair_index(&self, q: usize, v: usize) -> usize {
        q * self.num_inputs() + v
    }

    /// Initial abstract states (grid cells).
    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    /// Restricts the initial states to the cells contained in `region`, so
    /// that every concrete point of an initial cell is an initial state.
    pub fn set_initial_region(&mut self, region: &HyperRect) -> Result<()> {
        if region.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch {
                what: "initial region",
                expected: self.grid.dim(),
                got: region.dim(),
            });
        }
        let tol: Vec<f64> = self.grid.widths().iter().map(|h| h * FACE_TOL).collect();
        let grown = HyperRect::new(
            region.lo().iter().zip(&tol).map(|(a, t)| a - t).collect(),
            region.hi().iter().zip(&tol).map(|(b, t)| b + t).collect(),
        )?;
        self.initial = (0..self.num_cells())
            .filter(|&q| {
                self.grid
                    .cell_bounds(CellId::Cell(q))
                    .map(|b| grown.contains_rect(&b))
                    .unwrap_or(false)
            })
            .collect();
        Ok(())
    }

    fn check(&self, q: usize, v: usize) -> Result<()> {
        if q >= self.num_cells() {
            return Err(Error::CellOutOfRange(q));
        }
        if v >= self.num_inputs() {
            return Err(Error::InputOutOfRange(v));
        }
        Ok(())
    }

    /// Cached reach box of `(q, v)`.
    pub fn reach_box(&self, q: usize, v: usize) -> Result<HyperRect> {
        self.check(q, v)?;
        let (lo, hi) = self.reach_bounds(q, v);
        Ok(HyperRect::from_parts_unchecked(lo.to_vec(), hi.to_vec()))
    }

    #[inline]
    pub(crate) fn reach_bounds(&self, q: usize, v: usize) -> (&[f64], &[f64]) {
        let n = self.grid.dim();
        let s = self.pair_index(q, v) * n;
        (&self.reach_lo[s..s + n], &self.reach_hi[s..s + n])
    }

    #[inline]
    pub(crate) fn block_ranges(&self, q: usize, v: usize) -> &[IndexRange] {
        let n = self.grid.dim();
        let s = self.pair_index(q, v) * n;
        &self.ranges[s..s + n]
    }

    #[inline]
    pub fn can_overflow(&self, q: usize, v: usize) -> bool {
        self.overflow[self.pair_index(q, v)]
    }

    /// The successor block `Δ_d(q, v)`; for the overflow state this is
    /// every cell together with the overflow state.
    pub fn successor_block(&self, q: CellId, v: usize) -> Result<CellBlock> {
        match q {
            CellId::Overflow => {
                if v >= self.num_inputs() {
                    return Err(Error::InputOutOfRange(v));
                }
                Ok(CellBlock {
                    ranges: self
                        .grid
                        .counts()
                        .iter()
                        .map(|&c| IndexRange {
                            start: 0,
                            len: c as u32,
                        })
                        .collect(),
                    overflow: true,
                })
            }
            CellId::Cell(q) => {
                self.check(q, v)?;
                Ok(CellBlock {
                    ranges: self.block_ranges(q, v).to_vec(),
                    overflow: self.can_overflow(q, v),
                })
            }
        }
    }

    /// Explicit successor list, cells in block order followed by the overflow state.
    pub fn successors(&self, q: CellId, v: usize) -> Result<Vec<CellId>> {
        let block = self.successor_block(q, v)?;
        let mut out: Vec<CellId> = self.grid.block_cells(&block).map(CellId::Cell).collect();
        if block.overflow {
            out.push(CellId::Overflow);
        }
        Ok(out)
    }

    /// True when `q'` is a `v`-successor of `q`.
    pub fn is_successor(&self, q: CellId, v: usize, next: CellId) -> bool {
        match q {
            CellId::Overflow => true,
            CellId::Cell(q) => match next {
                CellId::Overflow => self.can_overflow(q, v),
                CellId::Cell(n) => self.grid.ranges_contain(self.block_ranges(q, v), n),
            },
        }
    }

    /// Inputs with a nonempty successor set; every input under this construction.
    pub fn enabled_inputs(&self, _q: CellId) -> Vec<usize> {
        (0..self.num_inputs()).collect()
    }

    /// Number of stored transitions `(q, v, q')`, counting overflow targets.
    pub fn transition_count(&self) -> u64 {
        (0..self.num_pairs())
            .into_par_iter()
            .map(|p| {
                let n = self.grid.dim();
                let cells: u64 = self.ranges[p * n..(p + 1) * n]
                    .iter()
                    .map(|r| r.len as u64)
                    .product();
                cells + self.overflow[p] as u64
            })
            .sum()
    }

    /// Writes the model as a magic line, a one-line JSON header, then a
    /// little-endian body with per pair: `n` lower bounds (f64), `n` upper
    /// bounds (f64), `n` (start, len) pairs (u32) and an overflow byte.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{MAGIC}")?;
        serde_json::to_writer(&mut w, &self.header())?;
        writeln!(w)?;
        let n = self.grid.dim();
        for p in 0..self.num_pairs() {
            for x in &self.reach_lo[p * n..(p + 1) * n] {
                w.write_all(&x.to_le_bytes())?;
            }
            for x in &self.reach_hi[p * n..(p + 1) * n] {
                w.write_all(&x.to_le_bytes())?;
            }
            for r in &self.ranges[p * n..(p + 1) * n] {
                w.write_all(&r.start.to_le_bytes())?;
                w.write_all(&r.len.to_le_bytes())?;
            }
            w.write_all(&[self.overflow[p] as u8])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            system: self.sys.clone(),
            grid: self.grid.clone(),
            inputs: self.inputs.clone(),
            reach: self.reach.clone(),
            initial: self.initial.clone(),
            pairs: self.num_pairs(),
        }
    }

    pub fn load(path: &Path) -> Result<SymbolicModel> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::ModelFormat("bad magic line".into()));
        }
        line.clear();
        r.read_line(&mut line)?;
        let header: ModelHeader = serde_json::from_str(line.trim_end())?;
        let n = header.grid.dim();
        let pairs = header.grid.num_cells() * header.inputs.len();
        if pairs != header.pairs {
            return Err(Error::ModelFormat(format!(
                "header declares {} pairs, grid and inputs give {pairs}",
                header.pairs
            )));
        }
        let record = n * 8 * 2 + n * 8 + 1;
        let mut body = Vec::with_capacity(pairs * record);
        r.read_to_end(&mut body)?;
        if body.len() != pairs * record {
            return Err(Error::ModelFormat(format!(
                "body has {} bytes, expected {}",
                body.len(),
                pairs * record
            )));
        }
        let f64_at = |b: &[u8], i: usize| f64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let u32_at = |b: &[u8], i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let mut reach_lo = Vec::with_capacity(pairs * n);
        let mut reach_hi = Vec::with_capacity(pairs * n);
        let mut ranges = Vec::with_capacity(pairs * n);
        let mut overflow = Vec::with_capacity(pairs);
        for rec in body.chunks_exact(record) {
            for d in 0..n {
                reach_lo.push(f64_at(rec, d * 8));
                reach_hi.push(f64_at(rec, (n + d) * 8));
                let o = 16 * n + d * 8;
                ranges.push(IndexRange {
                    start: u32_at(rec, o),
                    len: u32_at(rec, o + 4),
                });
            }
            overflow.push(match rec[record - 1] {
                0 => false,
                1 => true,
                b => return Err(Error::ModelFormat(format!("bad overflow byte {b}"))),
            });
        }
        if let Some(&bad) = header.initial.iter().find(|&&q| q >= header.grid.num_cells()) {
            return Err(Error::CellOutOfRange(bad));
        }
        Ok(SymbolicModel {
            sys: header.system,
            grid: header.grid,
            inputs: header.inputs,
            reach: header.reach,
            initial: header.initial,
            reach_lo,
            reach_hi,
            ranges,
            overflow,
        })
    }
}

/// Self-describing header of a saved model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub system: SystemSpec,
    pub grid: UniformGrid,
    pub inputs: InputGrid,
    pub reach: ReachOperator,
    pub initial: Vec<usize>,
    pub pairs: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{AffineDynamics, Dynamics};

    fn identity_model() -> SymbolicModel {
        let dom = HyperRect::new(vec![0.0], vec![1.0]).unwrap();
        let sys = SystemSpec::new(
            Dynamics::Affine(AffineDynamics {
                a: vec![vec![1.0]],
                b: vec![vec![0.0]],
                e: vec![vec![0.0]],
                c: vec![0.0],
            }),
            dom.clone(),
            HyperRect::new(vec![0.0], vec![0.0]).unwrap(),
            HyperRect::new(vec![0.0], vec![0.0]).unwrap(),
            vec![false],
        )
        .unwrap();
        let grid = UniformGrid::new(dom, vec![10], vec![false]).unwrap();
        let inputs = InputGrid::new(sys.input_set(), vec![1]).unwrap();
        build_abstraction(&sys, &grid, &inputs, &ReachOperator::ExactLinear).unwrap()
    }

    #[test]
    fn identity_successors_are_face_neighbours() {
        let m = identity_model();
        for q in 0..10usize {
            let succ = m.successors(CellId::Cell(q), 0).unwrap();
            let expect: Vec<CellId> = (q.saturating_sub(1)..=(q + 1).min(9))
                .map(CellId::Cell)
                .collect();
            // the edge cells touch the domain boundary, hence the overflow state
            let mut expect = expect;
            if q == 0 || q == 9 {
                expect.push(CellId::Overflow);
            }
            assert_eq!(succ, expect, "cell {q}");
        }
    }

    #[test]
    fn overflow_state_reaches_everything() {
        let m = identity_model();
        let succ = m.successors(CellId::Overflow, 0).unwrap();
        assert_eq!(succ.len(), 11);
        assert!(m.is_successor(CellId::Overflow, 0, CellId::Cell(5)));
    }

    #[test]
    fn save_and_load_round_trip() {
        let m = identity_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        let back = SymbolicModel::load(&path).unwrap();
        assert_eq!(back.header(), m.header());
        assert_eq!(back.reach_lo, m.reach_lo);
        assert_eq!(back.ranges, m.ranges);
        assert_eq!(back.overflow, m.overflow);
    }

    #[test]
    fn initial_region_keeps_contained_cells() {
        let mut m = identity_model();
        m.set_initial_region(&HyperRect::new(vec![0.2], vec![0.45]).unwrap())
            .unwrap();
        assert_eq!(m.initial(), &[2, 3]);
    }
}
