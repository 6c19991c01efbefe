//! Axis-aligned boxes, uniform grids with optional periodic axes, and the
//! index-level machinery behind quantization, covering blocks and margins.
//!
//! Cells are half-open `[a, b)` along every axis, except that the top face of
//! a non-periodic domain belongs to the last cell. Whenever a decision depends
//! on a point lying exactly on a cell face, it is taken on integer indices
//! with a relative tolerance of [`FACE_TOL`] cell widths, and always in the
//! direction that keeps successor sets conservative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance, in cell widths, for deciding that a value sits on a face.
pub const FACE_TOL: f64 = 1e-9;

/// Separation between the closed intervals `[alo, ahi]` and `[blo, bhi]`.
#[inline]
pub(crate) fn interval_gap(alo: f64, ahi: f64, blo: f64, bhi: f64) -> f64 {
    (alo - bhi).max(blo - ahi).max(0.0)
}

/// Closed axis-aligned box in ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectRepr", into = "RectRepr")]
pub struct HyperRect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RectRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RectRepr> for HyperRect {
    type Error = Error;
    fn try_from(r: RectRepr) -> Result<Self> {
        HyperRect::new(r.lo, r.hi)
    }
}

impl From<HyperRect> for RectRepr {
    fn from(r: HyperRect) -> Self {
        RectRepr { lo: r.lo, hi: r.hi }
    }
}

impl HyperRect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::Geometry(format!(
                    "bounds [{a}, {b}] in dimension {i} are not ordered"
                )));
            }
        }
        Ok(HyperRect { lo, hi })
    }

    /// Degenerate box holding a single point.
    pub fn from_point(x: &[f64]) -> Self {
        HyperRect {
            lo: x.to_vec(),
            hi: x.to_vec(),
        }
    }

    pub(crate) fn from_parts_unchecked(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        HyperRect { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (b - a))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn contains_rect(&self, other: &HyperRect) -> bool {
        (0..self.dim()).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d])
    }

    /// Closed-set intersection test: touching faces count.
    pub fn intersects(&self, other: &HyperRect) -> bool {
        (0..self.dim()).all(|d| self.lo[d] <= other.hi[d] && other.lo[d] <= self.hi[d])
    }

    /// Minkowski sum with the closed infinity-norm ball of radius `eps`.
    pub fn inflate(&self, eps: f64) -> Result<HyperRect> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::NegativeInflation(eps));
        }
        Ok(HyperRect {
            lo: self.lo.iter().map(|v| v - eps).collect(),
            hi: self.hi.iter().map(|v| v + eps).collect(),
        })
    }

    /// Infinity-norm distance between two boxes (zero when they intersect).
    pub fn distance(&self, other: &HyperRect) -> f64 {
        (0..self.dim())
            .map(|d| interval_gap(self.lo[d], self.hi[d], other.lo[d], other.hi[d]))
            .fold(0.0, f64::max)
    }
}

/// Symbol of the abstract state space: a grid cell (flat index) or the
/// overflow state standing for everything outside the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellId {
    Cell(usize),
    Overflow,
}

impl CellId {
    pub fn cell(self) -> Option<usize> {
        match self {
            CellId::Cell(i) => Some(i),
            CellId::Overflow => None,
        }
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, CellId::Overflow)
    }
}

/// Contiguous run of cell indices along one axis. On periodic axes the run
/// may wrap past the last index back to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub start: u32,
    pub len: u32,
}

/// Rectangular set of cells, optionally together with the overflow state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBlock {
    pub ranges: Vec<IndexRange>,
    pub overflow: bool,
}

impl CellBlock {
    /// True when the block holds no grid cell (it may still hold the overflow state).
    pub fn has_no_cells(&self) -> bool {
        self.ranges.iter().any(|r| r.len == 0)
    }

    pub fn is_empty(&self) -> bool {
        self.has_no_cells() && !self.overflow
    }
}

/// Uniform partition of a box domain, with optional wraparound axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct UniformGrid {
    domain: HyperRect,
    counts: Vec<usize>,
    periodic: Vec<bool>,
    widths: Vec<f64>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    domain: HyperRect,
    counts: Vec<usize>,
    periodic: Vec<bool>,
}

impl TryFrom<GridRepr> for UniformGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        UniformGrid::new(r.domain, r.counts, r.periodic)
    }
}

impl From<UniformGrid> for GridRepr {
    fn from(g: UniformGrid) -> Self {
        GridRepr {
            domain: g.domain,
            counts: g.counts,
            periodic: g.periodic,
        }
    }
}

impl UniformGrid {
    pub fn new(domain: HyperRect, counts: Vec<usize>, periodic: Vec<bool>) -> Result<Self> {
        let n = domain.dim();
        if n == 0 {
            return Err(Error::Geometry("grid needs at least one dimension".into()));
        }
        if counts.len() != n {
            return Err(Error::DimensionMismatch {
                what: "grid counts",
                expected: n,
                got: counts.len(),
            });
        }
        if periodic.len() != n {
            return Err(Error::DimensionMismatch {
                what: "periodic flags",
                expected: n,
                got: periodic.len(),
            });
        }
        let mut widths = Vec::with_capacity(n);
        for d in 0..n {
            if counts[d] == 0 {
                return Err(Error::Geometry(format!("zero cells along dimension {d}")));
            }
            let h = domain.width(d) / counts[d] as f64;
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Geometry(format!(
                    "degenerate cell width along dimension {d}"
                )));
            }
            widths.push(h);
        }
        counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .filter(|&t| t <= u32::MAX as usize)
            .ok_or_else(|| Error::Geometry("too many cells".into()))?;
        let mut strides = vec![1usize; n];
        for d in (0..n - 1).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        Ok(UniformGrid {
            domain,
            counts,
            periodic,
            widths,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn domain(&self) -> &HyperRect {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn width(&self, d: usize) -> f64 {
        self.widths[d]
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    fn period(&self, d: usize) -> f64 {
        self.domain.width(d)
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "multi-index",
                expected: self.dim(),
                got: multi.len(),
            });
        }
        let mut flat = 0;
        for d in 0..self.dim() {
            if multi[d] >= self.counts[d] {
                return Err(Error::Geometry(format!(
                    "index {} out of range along dimension {d}",
                    multi[d]
                )));
            }
            flat += multi[d] * self.strides[d];
        }
        Ok(flat)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dim()).map(|d| self.index_along(flat, d)).collect()
    }

    #[inline]
    pub fn index_along(&self, flat: usize, d: usize) -> usize {
        (flat / self.strides[d]) % self.counts[d]
    }

    /// Wraps periodic coordinates into `[lo, hi)`; other coordinates are untouched.
    pub fn wrap(&self, x: &mut [f64]) {
        for d in 0..self.dim() {
            if self.periodic[d] {
                x[d] = wrap_into(x[d], self.domain.lo[d], self.period(d));
            }
        }
    }

    /// The quantizer: the unique cell containing `x`, or the overflow state.
    pub fn quantize(&self, x: &[f64]) -> CellId {
        if x.len() != self.dim() {
            return CellId::Overflow;
        }
        let mut flat = 0;
        for d in 0..self.dim() {
            let mut v = x[d];
            if !v.is_finite() {
                return CellId::Overflow;
            }
            let lo = self.domain.lo[d];
            let n = self.counts[d] as i64;
            if self.periodic[d] {
                v = wrap_into(v, lo, self.period(d));
            } else if v < lo || v > self.domain.hi[d] {
                return CellId::Overflow;
            }
            let raw = ((v - lo) / self.widths[d] + FACE_TOL).floor() as i64;
            let i = if self.periodic[d] {
                raw.rem_euclid(n)
            } else {
                raw.clamp(0, n - 1)
            };
            flat += i as usize * self.strides[d];
        }
        CellId::Cell(flat)
    }

    /// Closed box of a cell.
    pub fn cell_bounds(&self, q: CellId) -> Result<HyperRect> {
        let flat = match q {
            CellId::Overflow => return Err(Error::OverflowHasNoBox),
            CellId::Cell(i) if i >= self.num_cells() => return Err(Error::CellOutOfRange(i)),
            CellId::Cell(i) => i,
        };
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let (a, b) = self.cell_interval(d, self.index_along(flat, d));
            lo.push(a);
            hi.push(b);
        }
        Ok(HyperRect::from_parts_unchecked(lo, hi))
    }

    #[inline]
    pub(crate) fn cell_interval(&self, d: usize, i: usize) -> (f64, f64) {
        let x0 = self.domain.lo[d];
        let h = self.widths[d];
        let hi = if i + 1 == self.counts[d] {
            self.domain.hi[d]
        } else {
            x0 + (i + 1) as f64 * h
        };
        (x0 + i as f64 * h, hi)
    }

    /// Cells whose closed boxes meet the closed box `r`, plus the overflow
    /// state when `r` reaches the boundary of a non-periodic domain axis.
    pub fn covering_block(&self, r: &HyperRect) -> CellBlock {
        let mut ranges = Vec::with_capacity(self.dim());
        let mut overflow = false;
        for d in 0..self.dim() {
            let (range, exits) = self.cover_dim(d, r.lo[d], r.hi[d]);
            ranges.push(range);
            overflow |= exits;
        }
        CellBlock { ranges, overflow }
    }

    #[inline]
    pub(crate) fn cover_dim(&self, d: usize, lo: f64, hi: f64) -> (IndexRange, bool) {
        let n = self.counts[d] as i64;
        let x0 = self.domain.lo[d];
        let h = self.widths[d];
        let to_index = |v: f64| v.clamp(-1e15, 1e15) as i64;
        // closure-inclusive: a face within tolerance pulls in the neighbour
        let l = to_index(((lo - x0) / h - FACE_TOL).ceil()) - 1;
        let u = to_index(((hi - x0) / h + FACE_TOL).floor());
        if self.periodic[d] {
            if u - l + 1 >= n {
                (IndexRange { start: 0, len: n as u32 }, false)
            } else {
                let range = IndexRange {
                    start: l.rem_euclid(n) as u32,
                    len: (u - l + 1) as u32,
                };
                (range, false)
            }
        } else {
            let exits = l < 0 || u >= n;
            let start = l.max(0);
            let end = u.min(n - 1);
            if end < start {
                (IndexRange { start: start.min(n) as u32, len: 0 }, exits)
            } else {
                let range = IndexRange {
                    start: start as u32,
                    len: (end - start + 1) as u32,
                };
                (range, exits)
            }
        }
    }

    /// Coordinates `[blo, bhi]` of a block's run along axis `d`. On periodic
    /// axes the run is shifted by whole periods so that `blo <= anchor < blo + period`.
    #[inline]
    fn range_bounds(&self, d: usize, range: IndexRange, anchor: f64) -> (f64, f64) {
        let x0 = self.domain.lo[d];
        let h = self.widths[d];
        let mut blo = x0 + range.start as f64 * h;
        let mut bhi = x0 + (range.start + range.len) as f64 * h;
        if (range.start + range.len) as usize == self.counts[d] {
            bhi = self.domain.hi[d];
        }
        if self.periodic[d] {
            let p = self.period(d);
            let k = ((anchor - blo) / p).floor();
            blo += k * p;
            bhi += k * p;
        }
        (blo, bhi)
    }

    fn full_axis(&self, d: usize, range: IndexRange) -> bool {
        range.len as usize >= self.counts[d]
    }

    /// Largest ε such that `r` inflated by ε stays in the interior of the
    /// region covered by `block` (its cells, plus everything outside the
    /// domain when the overflow state belongs to the block). Zero when `r`
    /// itself is not in that interior; `f64::INFINITY` when the region is the
    /// whole space.
    pub fn block_margin(&self, r: &HyperRect, block: &CellBlock) -> f64 {
        self.margin_raw(&r.lo, &r.hi, &block.ranges, block.overflow)
    }

    pub(crate) fn margin_raw(
        &self,
        lo: &[f64],
        hi: &[f64],
        ranges: &[IndexRange],
        overflow: bool,
    ) -> f64 {
        let n = self.dim();
        if ranges.iter().any(|r| r.len == 0) {
            if !overflow {
                return 0.0;
            }
            // only the outside of the domain is allowed
            let d = (0..n)
                .map(|j| self.outside_gap(j, lo[j], hi[j]))
                .fold(0.0, f64::max);
            return if d > 0.0 { d } else { 0.0 };
        }
        if !overflow {
            let mut m = f64::INFINITY;
            for d in 0..n {
                if self.periodic[d] && self.full_axis(d, ranges[d]) {
                    continue;
                }
                let (blo, bhi) = self.range_bounds(d, ranges[d], lo[d]);
                let g = (lo[d] - blo).min(bhi - hi[d]);
                if !(g > 0.0) {
                    return 0.0;
                }
                m = m.min(g);
            }
            return m;
        }
        // With the overflow state in the block, the forbidden set is the
        // closure of (domain \ block box): a union of at most 2n slabs.
        let outside: Vec<f64> = (0..n).map(|j| self.outside_gap(j, lo[j], hi[j])).collect();
        let others = |d: usize| {
            outside
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != d)
                .fold(0.0f64, |acc, (_, &g)| acc.max(g))
        };
        let mut m = f64::INFINITY;
        for d in 0..n {
            let range = ranges[d];
            if self.periodic[d] {
                if self.full_axis(d, range) {
                    continue;
                }
                let (blo, bhi) = self.range_bounds(d, range, lo[d]);
                let s = (lo[d] - blo).min(bhi - hi[d]).max(0.0);
                m = m.min(s.max(others(d)));
            } else {
                let (blo, bhi) = self.range_bounds(d, range, lo[d]);
                let xlo = self.domain.lo[d];
                let xhi = self.domain.hi[d];
                if range.start > 0 {
                    let s = interval_gap(lo[d], hi[d], xlo, blo);
                    m = m.min(s.max(others(d)));
                }
                if ((range.start + range.len) as usize) < self.counts[d] {
                    let s = interval_gap(lo[d], hi[d], bhi, xhi);
                    m = m.min(s.max(others(d)));
                }
            }
        }
        if m > 0.0 {
            m
        } else {
            0.0
        }
    }

    /// Separation of `[lo, hi]` from the domain along axis `d` (zero on periodic axes).
    #[inline]
    fn outside_gap(&self, d: usize, lo: f64, hi: f64) -> f64 {
        if self.periodic[d] {
            0.0
        } else {
            interval_gap(lo, hi, self.domain.lo[d], self.domain.hi[d])
        }
    }

    /// Per-axis distances `[lower, upper]` from the faces of `r` to the
    /// faces of the block. A side is infinite when the block wraps a whole
    /// periodic axis, or when the block holds the overflow state and
    /// reaches the domain boundary on that side. Negative values mean `r`
    /// sticks out of the block on that side.
    pub fn side_gaps(&self, r: &HyperRect, block: &CellBlock) -> Vec<[f64; 2]> {
        self.side_gaps_raw(&r.lo, &r.hi, &block.ranges, block.overflow)
    }

    pub(crate) fn side_gaps_raw(
        &self,
        lo: &[f64],
        hi: &[f64],
        ranges: &[IndexRange],
        overflow: bool,
    ) -> Vec<[f64; 2]> {
        (0..self.dim())
            .map(|d| {
                let range = ranges[d];
                if range.len == 0 {
                    return [f64::NEG_INFINITY, f64::NEG_INFINITY];
                }
                if self.periodic[d] && self.full_axis(d, range) {
                    return [f64::INFINITY, f64::INFINITY];
                }
                let (blo, bhi) = self.range_bounds(d, range, lo[d]);
                let mut lower = lo[d] - blo;
                let mut upper = bhi - hi[d];
                if overflow && !self.periodic[d] {
                    if range.start == 0 {
                        lower = f64::INFINITY;
                    }
                    if (range.start + range.len) as usize == self.counts[d] {
                        upper = f64::INFINITY;
                    }
                }
                [lower, upper]
            })
            .collect()
    }

    /// Membership of a grid cell in a block.
    pub fn block_contains(&self, block: &CellBlock, q: CellId) -> bool {
        match q {
            CellId::Overflow => block.overflow,
            CellId::Cell(flat) => self.ranges_contain(&block.ranges, flat),
        }
    }

    #[inline]
    pub(crate) fn ranges_contain(&self, ranges: &[IndexRange], flat: usize) -> bool {
        (0..self.dim()).all(|d| {
            let i = self.index_along(flat, d) as i64;
            let start = ranges[d].start as i64;
            let len = ranges[d].len as i64;
            let off = if self.periodic[d] {
                (i - start).rem_euclid(self.counts[d] as i64)
            } else {
                i - start
            };
            off >= 0 && off < len
        })
    }

    /// Number of grid cells in a block (the overflow state is not counted).
    pub fn block_cell_count(&self, block: &CellBlock) -> usize {
        block.ranges.iter().map(|r| r.len as usize).product()
    }

    /// Flat indices of the grid cells in a block, in row-major order of the
    /// block's own (possibly wrapped) runs.
    pub fn block_cells<'a>(&'a self, block: &'a CellBlock) -> BlockCells<'a> {
        BlockCells::new(self, &block.ranges)
    }

    pub(crate) fn ranges_cells<'a>(&'a self, ranges: &'a [IndexRange]) -> BlockCells<'a> {
        BlockCells::new(self, ranges)
    }

    /// Recovers a block from an explicit cell set, if the set is a
    /// rectangular (possibly wrapped) product of index runs, with or without
    /// the overflow state.
    pub fn block_from_cells(&self, cells: &[CellId]) -> Result<CellBlock> {
        let overflow = cells.iter().any(|c| c.is_overflow());
        let mut flats: Vec<usize> = cells.iter().filter_map(|c| c.cell()).collect();
        flats.sort_unstable();
        flats.dedup();
        if let Some(&bad) = flats.iter().find(|&&f| f >= self.num_cells()) {
            return Err(Error::CellOutOfRange(bad));
        }
        if flats.is_empty() {
            return Ok(CellBlock {
                ranges: vec![IndexRange { start: 0, len: 0 }; self.dim()],
                overflow,
            });
        }
        let mut ranges = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let n = self.counts[d];
            let mut present = vec![false; n];
            for &f in &flats {
                present[self.index_along(f, d)] = true;
            }
            ranges.push(contiguous_run(&present, self.periodic[d]).ok_or(Error::NonRectangular)?);
        }
        let block = CellBlock { ranges, overflow };
        if self.block_cell_count(&block) != flats.len() {
            return Err(Error::NonRectangular);
        }
        Ok(block)
    }
}

/// The single run of `true` entries, allowing wraparound on periodic axes.
fn contiguous_run(present: &[bool], periodic: bool) -> Option<IndexRange> {
    let n = present.len();
    let count = present.iter().filter(|&&p| p).count();
    if count == n {
        return Some(IndexRange {
            start: 0,
            len: n as u32,
        });
    }
    // a run starts where an entry is present and its predecessor is not
    let starts: Vec<usize> = (0..n)
        .filter(|&i| {
            present[i]
                && if i == 0 {
                    !(periodic && present[n - 1])
                } else {
                    !present[i - 1]
                }
        })
        .collect();
    if starts.len() != 1 {
        return None;
    }
    Some(IndexRange {
        start: starts[0] as u32,
        len: count as u32,
    })
}

#[inline]
pub(crate) fn wrap_into(v: f64, lo: f64, period: f64) -> f64 {
    let w = lo + (v - lo).rem_euclid(period);
    if w >= lo + period {
        lo
    } else {
        w
    }
}

/// Iterator over the flat indices of a rectangular run product.
pub struct BlockCells<'a> {
    grid: &'a UniformGrid,
    ranges: &'a [IndexRange],
    offsets: Vec<u32>,
    done: bool,
}

impl<'a> BlockCells<'a> {
    fn new(grid: &'a UniformGrid, ranges: &'a [IndexRange]) -> Self {
        let done = ranges.iter().any(|r| r.len == 0);
        BlockCells {
            grid,
            ranges,
            offsets: vec![0; ranges.len()],
            done,
        }
    }
}

impl Iterator for BlockCells<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.done {
            return None;
        }
        let mut flat = 0;
        for (d, r) in self.ranges.iter().enumerate() {
            let i = (r.start + self.offsets[d]) as usize % self.grid.counts[d];
            flat += i * self.grid.strides[d];
        }
        let mut d = self.ranges.len();
        loop {
            if d == 0 {
                self.done = true;
                break;
            }
            d -= 1;
            self.offsets[d] += 1;
            if self.offsets[d] < self.ranges[d].len {
                break;
            }
            self.offsets[d] = 0;
        }
        Some(flat)
    }
}
