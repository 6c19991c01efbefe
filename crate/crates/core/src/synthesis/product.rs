use std::path::Path;

use rayon::prelude::*;
use tracing::{debug, warn};

use super::{check_input_count, join_inputs, Controller, DfaState, InputSet, Labeling, SpecDFA};
use crate::abstraction::SymbolicModel;
use crate::error::{Error, Result};
use crate::geometry::CellId;

const LOSING: u32 = u32::MAX;

/// Memoryful controller on the product of the model with a DFA.
///
/// Product states are `(q, s)` where `s` already accounts for the label of
/// `q`. `rank(q, s)` is the number of steps within which acceptance is
/// forced; the enabled inputs of a state lead only to states of smaller rank.
#[derive(Clone, Debug)]
pub struct ProductPolicy {
    dfa: SpecDFA,
    labeling: Labeling,
    rank: Vec<u32>,
    enabled: Vec<InputSet>,
}

/// Solves the reachability game towards accepting DFA states, treating the
/// overflow state and the rejecting sink as losing.
///
/// Sweeps are Jacobi-style: a state joins the winning set at sweep `k` when
/// some input has all successors winning before sweep `k`, which makes the
/// ranks exact and independent of the thread count.
pub fn cosafe_controller(model: &SymbolicModel, dfa: &SpecDFA, labeling: &Labeling) -> Result<ProductPolicy> {
    check_input_count(model)?;
    if dfa.num_letters() != labeling.num_letters() {
        return Err(Error::Automaton(format!(
            "automaton reads {} letters, labeling produces {}",
            dfa.num_letters(),
            labeling.num_letters()
        )));
    }
    let ns = dfa.num_states();
    let m = model.num_inputs();
    let grid = model.grid();
    let letters: Vec<u32> = (0..model.num_cells())
        .map(|q| labeling.letter(CellId::Cell(q)))
        .collect();
    let mut rank = vec![LOSING; model.num_cells() * ns];
    let mut enabled = vec![InputSet::EMPTY; model.num_cells() * ns];
    for q in 0..model.num_cells() {
        let safe_inputs = (0..m)
            .filter(|&v| !model.can_overflow(q, v))
            .fold(InputSet::EMPTY, InputSet::with);
        for s in (0..ns).filter(|&s| dfa.is_accepting(s)) {
            rank[q * ns + s] = 0;
            enabled[q * ns + s] = safe_inputs;
        }
    }
    let open: Vec<DfaState> = (0..ns)
        .filter(|&s| !dfa.is_accepting(s) && !dfa.is_rejecting(s))
        .collect();
    let mut k = 0u32;
    loop {
        k += 1;
        let updates: Vec<(usize, InputSet)> = (0..model.num_cells())
            .into_par_iter()
            .flat_map_iter(|q| {
                let rank = &rank;
                let letters = &letters;
                open.iter().filter_map(move |&s| {
                    let idx = q * ns + s;
                    if rank[idx] != LOSING {
                        return None;
                    }
                    let good = (0..m)
                        .filter(|&v| {
                            !model.can_overflow(q, v)
                                && grid.ranges_cells(model.block_ranges(q, v)).all(|c| {
                                    rank[c * ns + dfa.step(s, letters[c])] != LOSING
                                })
                        })
                        .fold(InputSet::EMPTY, InputSet::with);
                    (!good.is_empty()).then_some((idx, good))
                })
            })
            .collect();
        if updates.is_empty() {
            break;
        }
        debug!(sweep = k, added = updates.len(), "product game sweep");
        for (idx, good) in updates {
            rank[idx] = k;
            enabled[idx] = good;
        }
    }
    let policy = ProductPolicy {
        dfa: dfa.clone(),
        labeling: labeling.clone(),
        rank,
        enabled,
    };
    if policy.winning_initial_cells().next().is_none() {
        warn!("no cell wins the co-safe game from the initial automaton state");
    }
    Ok(policy)
}

impl ProductPolicy {
    pub fn dfa(&self) -> &SpecDFA {
        &self.dfa
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    fn index(&self, q: usize, s: DfaState) -> usize {
        q * self.dfa.num_states() + s
    }

    /// Automaton state after reading the label of the starting cell.
    pub fn initial_state(&self, q: CellId) -> DfaState {
        self.dfa.step(self.dfa.initial(), self.labeling.letter(q))
    }

    /// Automaton state after moving into `next`.
    pub fn advance(&self, s: DfaState, next: CellId) -> DfaState {
        self.dfa.step(s, self.labeling.letter(next))
    }

    pub fn rank(&self, q: CellId, s: DfaState) -> Option<u32> {
        let q = q.cell()?;
        let r = self.rank[self.index(q, s)];
        (r != LOSING).then_some(r)
    }

    pub fn is_winning(&self, q: CellId, s: DfaState) -> bool {
        self.rank(q, s).is_some()
    }

    pub fn enabled(&self, q: CellId, s: DfaState) -> InputSet {
        q.cell().map_or(InputSet::EMPTY, |q| self.enabled[self.index(q, s)])
    }

    /// Cells that win when the run starts there.
    pub fn winning_initial_cells(&self) -> impl Iterator<Item = usize> + '_ {
        let cells = self.rank.len() / self.dfa.num_states();
        (0..cells).filter(|&q| self.is_winning(CellId::Cell(q), self.initial_state(CellId::Cell(q))))
    }

    /// Controller seen by the cells while the automaton is in state `s`.
    pub fn project(&self, s: DfaState) -> Controller {
        let cells = self.rank.len() / self.dfa.num_states();
        Controller::new((0..cells).map(|q| self.enabled[self.index(q, s)]).collect())
    }

    /// CSV: cell multi-index, automaton state, rank, enabled inputs.
    pub fn write_csv(&self, model: &SymbolicModel, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = model.grid().dim();
        let mut header: Vec<String> = (0..n).map(|d| format!("i{d}")).collect();
        header.extend(["dfa_state".into(), "rank".into(), "inputs".into()]);
        w.write_record(&header)?;
        for q in 0..model.num_cells() {
            for s in 0..self.dfa.num_states() {
                let Some(r) = self.rank(CellId::Cell(q), s) else { continue };
                if self.dfa.is_accepting(s) {
                    continue;
                }
                let mut row: Vec<String> = model.grid().multi_index(q).iter().map(|i| i.to_string()).collect();
                row.push(self.dfa.name(s).to_string());
                row.push(r.to_string());
                row.push(join_inputs(self.enabled(CellId::Cell(q), s)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
