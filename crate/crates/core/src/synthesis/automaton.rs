//! Deterministic automata over region labels, and the labeling of cells.
//!
//! A letter records, for `k` region boxes, which regions a closed cell
//! touches (low `k` bits) and which regions contain it (next `k` bits).
//! Reaching a region only counts when the cell is contained in it, while
//! touching an avoided region already counts as entering it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellId, HyperRect, UniformGrid, FACE_TOL};

pub type DfaState = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDFA {
    names: Vec<String>,
    num_letters: usize,
    initial: DfaState,
    accepting: Vec<bool>,
    rejecting: Option<DfaState>,
    delta: Vec<DfaState>,
}

impl SpecDFA {
    /// Checks totality, and that accepting states and the rejecting sink are absorbing.
    pub fn new(
        names: Vec<String>,
        num_letters: usize,
        initial: DfaState,
        accepting: Vec<bool>,
        rejecting: Option<DfaState>,
        delta: Vec<DfaState>,
    ) -> Result<Self> {
        let s = names.len();
        if s == 0 || num_letters == 0 {
            return Err(Error::Automaton("no states or no letters".into()));
        }
        if accepting.len() != s || delta.len() != s * num_letters {
            return Err(Error::Automaton("transition table is not total".into()));
        }
        if initial >= s || delta.iter().any(|&t| t >= s) {
            return Err(Error::Automaton("state index out of range".into()));
        }
        let absorbing = |q: DfaState| (0..num_letters).all(|a| delta[q * num_letters + a] == q);
        if let Some(q) = (0..s).find(|&q| accepting[q] && !absorbing(q)) {
            return Err(Error::Automaton(format!("accepting state {} is not absorbing", names[q])));
        }
        if let Some(r) = rejecting {
            if r >= s || accepting[r] || !absorbing(r) {
                return Err(Error::Automaton("rejecting sink must be a non-accepting absorbing state".into()));
            }
        }
        Ok(SpecDFA {
            names,
            num_letters,
            initial,
            accepting,
            rejecting,
            delta,
        })
    }

    fn from_fn(
        names: &[&str],
        regions: usize,
        accept: DfaState,
        reject: DfaState,
        f: impl Fn(DfaState, u32, u32) -> DfaState,
    ) -> Result<Self> {
        let num_letters = 1usize << (2 * regions);
        let mask = (1u32 << regions) - 1;
        let mut delta = Vec::with_capacity(names.len() * num_letters);
        for s in 0..names.len() {
            for a in 0..num_letters as u32 {
                delta.push(f(s, a & mask, a >> regions));
            }
        }
        let accepting = (0..names.len()).map(|s| s == accept).collect();
        SpecDFA::new(
            names.iter().map(|s| s.to_string()).collect(),
            num_letters,
            0,
            accepting,
            Some(reject),
            delta,
        )
    }

    /// Regions `[target, avoid]`: reach the target without entering the avoid set.
    pub fn reach_avoid() -> Self {
        const ACC: usize = 1;
        const REJ: usize = 2;
        SpecDFA::from_fn(&["start", "accept", "reject"], 2, ACC, REJ, |s, touch, inside| {
            match s {
                ACC | REJ => s,
                _ if touch & 0b10 != 0 => REJ,
                _ if inside & 0b01 != 0 => ACC,
                _ => s,
            }
        })
        .expect("reach-avoid automaton is well formed")
    }

    /// Regions `[R1, R2, R3, R4]`: visit exactly one of R1, R2, then reach
    /// R3, never entering R4.
    ///
    /// A cell that only touches R1 moves the automaton to `committed1`, where
    /// R2 is already forbidden but R3 does not yet count; containment in R1
    /// is needed to reach `visited1`. Symmetrically for R2.
    pub fn exclusive_visit_then_reach() -> Self {
        const START: usize = 0;
        const COMMITTED1: usize = 1;
        const VISITED1: usize = 2;
        const COMMITTED2: usize = 3;
        const VISITED2: usize = 4;
        const ACC: usize = 5;
        const REJ: usize = 6;
        let names = [
            "start",
            "committed1",
            "visited1",
            "committed2",
            "visited2",
            "accept",
            "reject",
        ];
        SpecDFA::from_fn(&names, 4, ACC, REJ, |s, touch, inside| {
            let t = |i: u32| touch >> i & 1 == 1;
            let inn = |i: u32| inside >> i & 1 == 1;
            match s {
                ACC | REJ => s,
                _ if t(3) => REJ,
                START if t(0) && t(1) => REJ,
                START if inn(0) => VISITED1,
                START if inn(1) => VISITED2,
                START if t(0) => COMMITTED1,
                START if t(1) => COMMITTED2,
                COMMITTED1 | VISITED1 if t(1) => REJ,
                COMMITTED2 | VISITED2 if t(0) => REJ,
                COMMITTED1 if inn(0) => VISITED1,
                COMMITTED2 if inn(1) => VISITED2,
                VISITED1 | VISITED2 if inn(2) => ACC,
                _ => s,
            }
        })
        .expect("co-safe automaton is well formed")
    }

    /// Single accepting state.
    pub fn trivially_accepting(num_letters: usize) -> Self {
        SpecDFA::new(vec!["accept".into()], num_letters, 0, vec![true], None, vec![0; num_letters])
            .expect("one-state automaton is well formed")
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn num_letters(&self) -> usize {
        self.num_letters
    }

    pub fn initial(&self) -> DfaState {
        self.initial
    }

    pub fn is_accepting(&self, s: DfaState) -> bool {
        self.accepting[s]
    }

    pub fn is_rejecting(&self, s: DfaState) -> bool {
        self.rejecting == Some(s)
    }

    pub fn name(&self, s: DfaState) -> &str {
        &self.names[s]
    }

    #[inline]
    pub fn step(&self, s: DfaState, letter: u32) -> DfaState {
        self.delta[s * self.num_letters + letter as usize]
    }
}

/// Region letters of every grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    regions: Vec<HyperRect>,
    letters: Vec<u32>,
}

impl Labeling {
    pub fn from_regions(grid: &UniformGrid, regions: Vec<HyperRect>) -> Result<Self> {
        let k = regions.len();
        if k > 16 {
            return Err(Error::Automaton("at most 16 regions".into()));
        }
        if let Some(r) = regions.iter().find(|r| r.dim() != grid.dim()) {
            return Err(Error::DimensionMismatch {
                what: "region",
                expected: grid.dim(),
                got: r.dim(),
            });
        }
        let tol: Vec<f64> = grid.widths().iter().map(|h| h * FACE_TOL).collect();
        let grown: Vec<HyperRect> = regions
            .iter()
            .map(|r| {
                HyperRect::new(
                    r.lo().iter().zip(&tol).map(|(a, t)| a - t).collect(),
                    r.hi().iter().zip(&tol).map(|(b, t)| b + t).collect(),
                )
            })
            .collect::<Result<_>>()?;
        let letters = (0..grid.num_cells())
            .map(|q| {
                let b = grid.cell_bounds(CellId::Cell(q))?;
                let mut touch = 0u32;
                let mut inside = 0u32;
                for (i, g) in grown.iter().enumerate() {
                    if g.intersects(&b) {
                        touch |= 1 << i;
                    }
                    if g.contains_rect(&b) {
                        inside |= 1 << i;
                    }
                }
                Ok(touch | inside << k)
            })
            .collect::<Result<_>>()?;
        Ok(Labeling { regions, letters })
    }

    pub fn regions(&self) -> &[HyperRect] {
        &self.regions
    }

    pub fn num_letters(&self) -> usize {
        1 << (2 * self.regions.len())
    }

    /// Letter of an abstract state; the overflow state carries no region.
    #[inline]
    pub fn letter(&self, q: CellId) -> u32 {
        q.cell().map_or(0, |q| self.letters[q])
    }

    /// Regions the cell touches and regions containing it, as bit masks.
    pub fn masks(&self, q: CellId) -> (u32, u32) {
        let k = self.regions.len();
        let a = self.letter(q);
        (a & ((1 << k) - 1), a >> k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter(touch: u32, inside: u32) -> u32 {
        touch | inside << 4
    }

    #[test]
    fn cosafe_automaton_paths() {
        let d = SpecDFA::exclusive_visit_then_reach();
        let run = |word: &[u32]| word.iter().fold(d.initial(), |s, &a| d.step(s, a));
        let r1 = letter(0b0001, 0b0001);
        let r1_edge = letter(0b0001, 0);
        let r2 = letter(0b0010, 0b0010);
        let r3 = letter(0b0100, 0b0100);
        let r4_edge = letter(0b1000, 0);
        assert!(d.is_accepting(run(&[0, r1, 0, r3])));
        assert!(d.is_accepting(run(&[r2, r3])));
        assert!(d.is_rejecting(run(&[r1, r2, r3])));
        assert!(d.is_rejecting(run(&[0, r4_edge])));
        // touching R1 alone does not earn the visit
        assert_eq!(d.name(run(&[r1_edge, r3])), "committed1");
        assert!(d.is_accepting(run(&[r1_edge, r1, r3])));
        // acceptance is absorbing
        assert!(d.is_accepting(run(&[r1, r3, r4_edge, r2])));
    }

    #[test]
    fn reach_avoid_automaton() {
        let d = SpecDFA::reach_avoid();
        assert_eq!(d.num_letters(), 16);
        let target = 0b01 | 0b01 << 2;
        let avoid_edge = 0b10;
        assert!(d.is_accepting(d.step(0, target)));
        assert!(d.is_rejecting(d.step(0, avoid_edge)));
        assert!(d.is_rejecting(d.step(0, target | avoid_edge)));
    }

    #[test]
    fn new_rejects_non_absorbing_acceptance() {
        let err = SpecDFA::new(
            vec!["a".into(), "b".into()],
            1,
            0,
            vec![true, false],
            None,
            vec![1, 1],
        );
        assert!(err.is_err());
    }

    #[test]
    fn labels_from_regions() {
        let g = UniformGrid::new(HyperRect::new(vec![0.0], vec![1.0]).unwrap(), vec![10], vec![false])
            .unwrap();
        let l = Labeling::from_regions(
            &g,
            vec![
                HyperRect::new(vec![0.2], vec![0.4]).unwrap(),
                HyperRect::new(vec![0.75], vec![1.0]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(l.masks(CellId::Cell(1)), (0b01, 0));
        assert_eq!(l.masks(CellId::Cell(2)), (0b01, 0b01));
        assert_eq!(l.masks(CellId::Cell(7)), (0b10, 0));
        assert_eq!(l.masks(CellId::Cell(8)), (0b10, 0b10));
        assert_eq!(l.masks(CellId::Overflow), (0, 0));
    }
}
