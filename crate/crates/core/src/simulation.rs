//! Closed-loop simulation of the perturbed system, Monte Carlo checks of the
//! relation `x ∈ q` as an alternating simulation, and constructed escapes
//! beyond the margin.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::SymbolicModel;
use crate::error::{Error, Result};
use crate::geometry::{CellId, HyperRect};
use crate::margins::MarginTable;
use crate::synthesis::{argmax_margin, Controller, DeterministicController, DfaState, Labeling, ProductPolicy, SpecDFA};
use crate::systems::{inf_norm, PerturbationMap};

/// How the disturbance `d_k` is drawn at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    Zero,
    /// Uniform on the disturbance box.
    UniformRandom,
    /// A uniformly chosen vertex of the disturbance box.
    Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPolicy {
    pub disturbance: DisturbanceMode,
    pub perturbation: PerturbationMap,
    pub horizon: usize,
    pub seed: u64,
}

impl SimPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("simulation horizon must be at least 1".into()));
        }
        self.perturbation.validate()
    }
}

/// Per-run generator: the stream index separates runs sharing a seed.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// The controller driving a closed-loop run.
#[derive(Clone, Copy, Debug)]
pub enum ClosedLoop<'a> {
    /// Set-valued controller, resolved per step by the largest margin.
    Static(&'a Controller),
    Deterministic(&'a DeterministicController),
    /// Memoryful co-safe policy; the run tracks the automaton state.
    CoSafe(&'a ProductPolicy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    LeftControllerDomain { step: usize },
    LeftDomain { step: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SpecVerdict {
    Accepted { step: usize },
    Rejected { step: usize },
    Undecided,
}

/// A simulated behavior: `states[k+1]` follows from `states[k]` under
/// `inputs[k]`, `disturbances[k]` and `perturbations[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<usize>,
    pub disturbances: Vec<Vec<f64>>,
    pub perturbations: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
    pub dfa_states: Vec<DfaState>,
    pub status: RunStatus,
    pub verdict: Option<SpecVerdict>,
    pub seed: u64,
    pub run: u64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn cells(&self, model: &SymbolicModel) -> Vec<CellId> {
        self.states.iter().map(|x| model.grid().quantize(x)).collect()
    }

    /// CSV: one row per visited state; input, disturbance and perturbation
    /// columns are empty on the final row.
    pub fn write_csv(&self, model: &SymbolicModel, dfa: Option<&SpecDFA>, path: &Path) -> Result<()> {
        let n = model.grid().dim();
        let p = model.inputs().dim();
        let q = model.system().disturbance_dim();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["step".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.push("input".into());
        header.extend((0..p).map(|i| format!("u{i}")));
        header.extend((0..q).map(|i| format!("d{i}")));
        header.extend((0..n).map(|i| format!("p{i}")));
        header.extend(["budget".into(), "dfa_state".into(), "status".into()]);
        w.write_record(&header)?;
        let status = match self.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::LeftControllerDomain { step } => format!("left_controller_domain@{step}"),
            RunStatus::LeftDomain { step } => format!("left_domain@{step}"),
        };
        for (k, x) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            if k < self.inputs.len() {
                let v = self.inputs[k];
                row.push(v.to_string());
                row.extend(model.inputs().value(v).iter().map(|u| u.to_string()));
                row.extend(self.disturbances[k].iter().map(|d| d.to_string()));
                row.extend(self.perturbations[k].iter().map(|d| d.to_string()));
                row.push(self.budgets[k].to_string());
            } else {
                row.extend(std::iter::repeat(String::new()).take(1 + p + q + n + 1));
            }
            row.push(match (dfa, self.dfa_states.get(k)) {
                (Some(d), Some(&s)) => d.name(s).to_string(),
                _ => String::new(),
            });
            row.push(if k + 1 == self.states.len() { status.clone() } else { String::new() });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn draw_disturbance(set: &HyperRect, mode: DisturbanceMode, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..set.dim())
        .map(|i| {
            let (a, b) = (set.lo()[i], set.hi()[i]);
            match mode {
                DisturbanceMode::Zero => 0.0_f64.clamp(a, b),
                DisturbanceMode::UniformRandom => {
                    if a < b {
                        rng.gen_range(a..=b)
                    } else {
                        a
                    }
                }
                DisturbanceMode::Corner => {
                    if rng.gen_bool(0.5) {
                        b
                    } else {
                        a
                    }
                }
            }
        })
        .collect()
}

fn uniform_ball(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| if radius > 0.0 { rng.gen_range(-radius..=radius) } else { 0.0 })
        .collect()
}

/// Direction towards the nearest finite face of the successor block.
fn attack_direction(model: &SymbolicModel, q: usize, v: usize) -> Option<(usize, f64)> {
    let (lo, hi) = model.reach_bounds(q, v);
    let gaps = model
        .grid()
        .side_gaps_raw(lo, hi, model.block_ranges(q, v), model.can_overflow(q, v));
    let mut best: Option<(usize, f64, f64)> = None;
    for (d, [l, u]) in gaps.into_iter().enumerate() {
        for (g, sign) in [(l, -1.0), (u, 1.0)] {
            if g.is_finite() && best.map_or(true, |(_, _, b)| g < b) {
                best = Some((d, sign, g));
            }
        }
    }
    best.map(|(d, s, _)| (d, s))
}

fn budget_cap(model: &SymbolicModel, b: f64) -> f64 {
    if b.is_finite() {
        b
    } else {
        let dom = model.grid().domain();
        (0..dom.dim()).map(|d| dom.width(d)).fold(0.0, f64::max)
    }
}

/// Runs the perturbed closed loop from `x0` for at most `policy.horizon` steps.
pub fn simulate_closed_loop(
    model: &SymbolicModel,
    table: &MarginTable,
    ctrl: ClosedLoop<'_>,
    x0: &[f64],
    policy: &SimPolicy,
    run: u64,
) -> Result<Trajectory> {
    policy.validate()?;
    let sys = model.system();
    let grid = model.grid();
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    let mut rng = run_rng(policy.seed, run);
    let delta = table.declared_delta();
    let mut x = x0.to_vec();
    sys.wrap(&mut x);
    let mut traj = Trajectory {
        states: vec![x.clone()],
        inputs: Vec::new(),
        disturbances: Vec::new(),
        perturbations: Vec::new(),
        budgets: Vec::new(),
        dfa_states: Vec::new(),
        status: RunStatus::Completed,
        verdict: None,
        seed: policy.seed,
        run,
    };
    let q0 = grid.quantize(&x);
    let mut s = match ctrl {
        ClosedLoop::CoSafe(pp) => {
            let s = pp.initial_state(q0);
            traj.dfa_states.push(s);
            traj.verdict = Some(SpecVerdict::Undecided);
            Some(s)
        }
        _ => None,
    };
    if q0.is_overflow() {
        traj.status = RunStatus::LeftDomain { step: 0 };
        return Ok(traj);
    }
    if let (ClosedLoop::CoSafe(pp), Some(s0)) = (ctrl, s) {
        if pp.dfa().is_accepting(s0) {
            traj.verdict = Some(SpecVerdict::Accepted { step: 0 });
            return Ok(traj);
        }
    }
    for k in 0..policy.horizon {
        let cell = grid.quantize(&x);
        let Some(q) = cell.cell() else {
            traj.status = RunStatus::LeftDomain { step: k };
            break;
        };
        let chosen = match ctrl {
            ClosedLoop::Static(c) => argmax_margin(c.enabled(q), |v| table.get(q, v)),
            ClosedLoop::Deterministic(c) => c.input(cell),
            ClosedLoop::CoSafe(pp) => argmax_margin(pp.enabled(cell, s.unwrap_or(0)), |v| table.get(q, v)),
        };
        let Some(v) = chosen else {
            traj.status = RunStatus::LeftControllerDomain { step: k };
            break;
        };
        let u = model.inputs().value(v);
        let d = draw_disturbance(sys.disturbance_set(), policy.disturbance, &mut rng);
        let budget = budget_cap(model, policy.perturbation.bound(table.get(q, v), delta));
        let p = match policy.perturbation {
            PerturbationMap::None => vec![0.0; n],
            PerturbationMap::Scaled { .. } | PerturbationMap::Uniform { .. } => uniform_ball(n, budget, &mut rng),
            PerturbationMap::Adversarial { .. } => {
                let mut p = vec![0.0; n];
                if let Some((dim, sign)) = attack_direction(model, q, v) {
                    p[dim] = sign * budget;
                }
                p
            }
        };
        let next = sys.perturbed_step(&x, u, &d, &p, budget)?;
        traj.inputs.push(v);
        traj.disturbances.push(d);
        traj.perturbations.push(p);
        traj.budgets.push(budget);
        traj.states.push(next.clone());
        x = next;
        let nq = grid.quantize(&x);
        if let (ClosedLoop::CoSafe(pp), Some(cur)) = (ctrl, s) {
            let ns = pp.advance(cur, nq);
            traj.dfa_states.push(ns);
            s = Some(ns);
            if pp.dfa().is_accepting(ns) {
                traj.verdict = Some(SpecVerdict::Accepted { step: k + 1 });
                return Ok(traj);
            }
            if pp.dfa().is_rejecting(ns) {
                traj.verdict = Some(SpecVerdict::Rejected { step: k + 1 });
                return Ok(traj);
            }
        }
        if nq.is_overflow() {
            traj.status = RunStatus::LeftDomain { step: k + 1 };
            return Ok(traj);
        }
    }
    if traj.status == RunStatus::Completed {
        let last = grid.quantize(&x);
        let inside = match ctrl {
            ClosedLoop::Static(c) => c.in_domain(last),
            ClosedLoop::Deterministic(c) => c.input(last).is_some(),
            ClosedLoop::CoSafe(pp) => !pp.enabled(last, s.unwrap_or(0)).is_empty(),
        };
        if !inside {
            traj.status = RunStatus::LeftControllerDomain { step: traj.steps() };
        }
    }
    Ok(traj)
}

/// Independent runs sharing a seed; run `i` uses RNG stream `i`.
pub fn simulate_many(
    model: &SymbolicModel,
    table: &MarginTable,
    ctrl: ClosedLoop<'_>,
    x0: &[f64],
    policy: &SimPolicy,
    runs: u64,
) -> Result<Vec<Trajectory>> {
    (0..runs)
        .into_par_iter()
        .map(|r| simulate_closed_loop(model, table, ctrl, x0, policy, r))
        .collect()
}

/// Replays a cell trace through the automaton, starting from its initial state.
pub fn replay_dfa(dfa: &SpecDFA, labeling: &Labeling, cells: &[CellId]) -> Vec<DfaState> {
    let mut out = Vec::with_capacity(cells.len());
    let mut s = dfa.initial();
    for &c in cells {
        s = dfa.step(s, labeling.letter(c));
        out.push(s);
    }
    out
}

/// Checks, on the concrete states, that the run enters `regions[2]` after
/// visiting exactly one of `regions[0]`, `regions[1]`, and never enters
/// `regions[3]` up to that point.
pub fn satisfies_exclusive_visit(states: &[Vec<f64>], regions: &[HyperRect]) -> bool {
    let [r1, r2, r3, r4] = regions else {
        return false;
    };
    let mut seen1 = false;
    let mut seen2 = false;
    for x in states {
        if r4.contains(x) {
            return false;
        }
        if (seen1 ^ seen2) && r3.contains(x) {
            return true;
        }
        seen1 |= r1.contains(x);
        seen2 |= r2.contains(x);
    }
    false
}

/// Mode of the alternating-simulation sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform state in a uniform cell, uniform disturbance, uniform perturbation.
    Uniform,
    /// Cell and disturbance corners that realize the closest face of the
    /// reach box, pushed outward through that face (exact operators only).
    FaceTargeted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cell: usize,
    pub input: usize,
    pub state: Vec<f64>,
    pub disturbance: Vec<f64>,
    pub perturbation: Vec<f64>,
    pub landed: CellId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltSimReport {
    pub samples: u64,
    pub violations: u64,
    pub witnesses: Vec<Violation>,
}

impl AltSimReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const CHUNK: u64 = 4096;
const KEPT_WITNESSES: usize = 8;

/// Samples transitions of the system perturbed by `ρ·ε(x, u)` and checks that
/// every successor state quantizes into the abstract successor set.
pub fn check_alt_simulation(
    model: &SymbolicModel,
    table: &MarginTable,
    rho: f64,
    samples: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<AltSimReport> {
    if !(rho >= 0.0) {
        return Err(Error::Perturbation(format!("scale must be >= 0, got {rho}")));
    }
    if mode == SamplingMode::FaceTargeted {
        exact_affine(model)?;
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(u64, Vec<Violation>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = run_rng(seed, c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut bad = 0;
            let mut kept = Vec::new();
            for _ in 0..count {
                let v = match mode {
                    SamplingMode::Uniform => uniform_sample(model, table, rho, &mut rng)?,
                    SamplingMode::FaceTargeted => targeted_sample(model, table, rho, &mut rng)?,
                };
                if let Some(v) = v {
                    bad += 1;
                    if kept.len() < KEPT_WITNESSES {
                        kept.push(v);
                    }
                }
            }
            Ok((bad, kept))
        })
        .collect::<Result<_>>()?;
    let mut report = AltSimReport {
        samples,
        violations: 0,
        witnesses: Vec::new(),
    };
    for (bad, kept) in parts {
        report.violations += bad;
        for v in kept {
            if report.witnesses.len() < KEPT_WITNESSES {
                report.witnesses.push(v);
            }
        }
    }
    Ok(report)
}

fn uniform_sample(
    model: &SymbolicModel,
    table: &MarginTable,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Violation>> {
    let grid = model.grid();
    let sys = model.system();
    let q = rng.gen_range(0..model.num_cells());
    let v = rng.gen_range(0..model.num_inputs());
    let cell = grid.cell_bounds(CellId::Cell(q))?;
    let x: Vec<f64> = (0..cell.dim())
        .map(|i| rng.gen_range(cell.lo()[i]..cell.hi()[i]))
        .collect();
    // faces are shared, so the sampled point decides its own cell
    let qx = grid.quantize(&x).cell().ok_or(Error::CellOutOfRange(q))?;
    let d = draw_disturbance(sys.disturbance_set(), DisturbanceMode::UniformRandom, rng);
    let budget = budget_cap(model, rho * table.get(qx, v));
    let p = uniform_ball(x.len(), budget, rng);
    let y = sys.perturbed_step(&x, model.inputs().value(v), &d, &p, budget)?;
    let landed = grid.quantize(&y);
    Ok((!model.is_successor(CellId::Cell(qx), v, landed)).then(|| Violation {
        cell: qx,
        input: v,
        state: x,
        disturbance: d,
        perturbation: p,
        landed,
    }))
}

fn targeted_sample(
    model: &SymbolicModel,
    table: &MarginTable,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Violation>> {
    let q = rng.gen_range(0..model.num_cells());
    let v = rng.gen_range(0..model.num_inputs());
    let eps = table.get(q, v);
    if !eps.is_finite() {
        return Ok(None);
    }
    let faces = candidate_faces(model, q, v);
    let Some(&(d, upper, _)) = faces.first() else {
        return Ok(None);
    };
    let (z, dist, image) = face_preimage(model, q, v, d, upper)?;
    let mut p = vec![0.0; z.len()];
    p[d] = if upper { rho * eps } else { -rho * eps };
    let mut y = image;
    y[d] += p[d];
    model.system().wrap(&mut y);
    let landed = model.grid().quantize(&y);
    Ok((!model.is_successor(CellId::Cell(q), v, landed)).then_some(Violation {
        cell: q,
        input: v,
        state: z,
        disturbance: dist,
        perturbation: p,
        landed,
    }))
}

fn exact_affine(model: &SymbolicModel) -> Result<crate::systems::AffineDynamics> {
    if model.reach_operator().declared_delta() != Some(0.0) {
        return Err(Error::InexactReach);
    }
    model
        .system()
        .dynamics()
        .as_affine()
        .ok_or(Error::NotAffine(model.system().dynamics().name()))
}

/// Finite faces `(dim, upper, gap)` of the reach box, closest first.
fn candidate_faces(model: &SymbolicModel, q: usize, v: usize) -> Vec<(usize, bool, f64)> {
    let (lo, hi) = model.reach_bounds(q, v);
    let gaps = model
        .grid()
        .side_gaps_raw(lo, hi, model.block_ranges(q, v), model.can_overflow(q, v));
    let mut faces: Vec<(usize, bool, f64)> = gaps
        .iter()
        .enumerate()
        .flat_map(|(d, &[l, u])| [(d, false, l), (d, true, u)])
        .filter(|f| f.2.is_finite())
        .collect();
    faces.sort_by(|a, b| a.2.total_cmp(&b.2));
    faces
}

/// A state of cell `q` and a disturbance whose image attains the chosen face
/// of the (exact) reach box, together with that image.
fn face_preimage(
    model: &SymbolicModel,
    q: usize,
    v: usize,
    dim: usize,
    upper: bool,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let aff = exact_affine(model)?;
    let grid = model.grid();
    let cell = grid.cell_bounds(CellId::Cell(q))?;
    let multi = grid.multi_index(q);
    let z: Vec<f64> = (0..cell.dim())
        .map(|j| {
            let a = aff.a[dim][j];
            let take_hi = if upper { a > 0.0 } else { a < 0.0 };
            if !take_hi {
                return cell.lo()[j];
            }
            let top_cell = multi[j] + 1 == grid.counts()[j] && !grid.periodic()[j];
            if top_cell {
                cell.hi()[j]
            } else {
                // the upper face belongs to the next cell
                cell.hi()[j] - 1e-8 * grid.width(j)
            }
        })
        .collect();
    let set = model.system().disturbance_set();
    let d: Vec<f64> = (0..set.dim())
        .map(|j| {
            let e = aff.e[dim][j];
            let take_hi = if upper { e > 0.0 } else { e < 0.0 };
            if take_hi {
                set.hi()[j]
            } else {
                set.lo()[j]
            }
        })
        .collect();
    let image = model.system().step(&z, model.inputs().value(v), &d)?;
    Ok((z, d, image))
}

/// A constructed violation of the relation just beyond the margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeWitness {
    pub cell: usize,
    pub input: usize,
    pub margin: f64,
    pub state: Vec<f64>,
    pub disturbance: Vec<f64>,
    pub perturbation: Vec<f64>,
    pub image: Vec<f64>,
    pub landing: Vec<f64>,
    pub landed: CellId,
}

/// Relative excess of the witness perturbation over the margin.
pub const ESCAPE_EXCESS: f64 = 1e-6;

/// Builds a state of `q`, a disturbance and a perturbation of norm
/// `ε(q, v)·(1 + 1e-6)` whose perturbed successor leaves `Δ_d(q, v)`.
/// Requires an exact reach operator on affine dynamics.
pub fn adversarial_escape_witness(
    model: &SymbolicModel,
    table: &MarginTable,
    q: usize,
    v: usize,
) -> Result<EscapeWitness> {
    exact_affine(model)?;
    if q >= model.num_cells() {
        return Err(Error::CellOutOfRange(q));
    }
    if v >= model.num_inputs() {
        return Err(Error::InputOutOfRange(v));
    }
    let eps = table.get(q, v);
    let faces = candidate_faces(model, q, v);
    if !eps.is_finite() || faces.is_empty() {
        return Err(Error::NoFiniteEscape { cell: q, input: v });
    }
    let size = eps * (1.0 + ESCAPE_EXCESS);
    for (dim, upper, _) in faces {
        let (z, d, image) = face_preimage(model, q, v, dim, upper)?;
        if model.grid().quantize(&z) != CellId::Cell(q) {
            continue;
        }
        let mut p = vec![0.0; z.len()];
        p[dim] = if upper { size } else { -size };
        let landing = model
            .system()
            .perturbed_step(&z, model.inputs().value(v), &d, &p, size)?;
        let landed = model.grid().quantize(&landing);
        if !model.is_successor(CellId::Cell(q), v, landed) {
            debug_assert!(inf_norm(&p) <= size);
            return Ok(EscapeWitness {
                cell: q,
                input: v,
                margin: eps,
                state: z,
                disturbance: d,
                perturbation: p,
                image,
                landing,
                landed,
            });
        }
    }
    Err(Error::Witness(format!(
        "no single-face escape verified for cell {q} input {v}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::build_abstraction;
    use crate::geometry::UniformGrid;
    use crate::margins::margin_table;
    use crate::reachability::ReachOperator;
    use crate::synthesis::InputSet;
    use crate::systems::{AffineDynamics, Dynamics, InputGrid, SystemSpec};

    fn shift_model(shift: f64) -> SymbolicModel {
        let dom = HyperRect::new(vec![0.0], vec![1.0]).unwrap();
        let sys = SystemSpec::new(
            Dynamics::Affine(AffineDynamics {
                a: vec![vec![1.0]],
                b: vec![vec![1.0]],
                e: vec![vec![0.0]],
                c: vec![0.0],
            }),
            dom.clone(),
            HyperRect::new(vec![-0.5], vec![0.5]).unwrap(),
            HyperRect::new(vec![0.0], vec![0.0]).unwrap(),
            vec![false],
        )
        .unwrap();
        let grid = UniformGrid::new(dom, vec![10], vec![false]).unwrap();
        let inputs = InputGrid::new(&HyperRect::new(vec![shift], vec![shift]).unwrap(), vec![1]).unwrap();
        build_abstraction(&sys, &grid, &inputs, &ReachOperator::ExactLinear).unwrap()
    }

    #[test]
    fn witness_crosses_nearest_face() {
        let m = shift_model(0.01);
        let t = margin_table(&m).unwrap();
        let w = adversarial_escape_witness(&m, &t, 1, 0).unwrap();
        assert!((w.margin - 0.01).abs() < 1e-12);
        assert!((w.image[0] - 0.11).abs() < 1e-12);
        assert!((w.perturbation[0] + 0.01 * (1.0 + ESCAPE_EXCESS)).abs() < 1e-15);
        assert_eq!(w.landed, CellId::Cell(0));
    }

    #[test]
    fn one_step_from_equilibrium() {
        let m = shift_model(0.0);
        let t = margin_table(&m).unwrap();
        let c = Controller::new(vec![InputSet::full(1); 10]);
        let policy = SimPolicy {
            disturbance: DisturbanceMode::Zero,
            perturbation: PerturbationMap::None,
            horizon: 1,
            seed: 0,
        };
        let tr = simulate_closed_loop(&m, &t, ClosedLoop::Static(&c), &[0.55], &policy, 0).unwrap();
        assert_eq!(tr.steps(), 1);
        assert_eq!(tr.states.last().unwrap(), &vec![0.55]);
        assert_eq!(tr.status, RunStatus::Completed);
    }

    #[test]
    fn start_outside_domain_of_controller() {
        let m = shift_model(0.0);
        let t = margin_table(&m).unwrap();
        let c = Controller::new(vec![InputSet::EMPTY; 10]);
        let policy = SimPolicy {
            disturbance: DisturbanceMode::Zero,
            perturbation: PerturbationMap::None,
            horizon: 5,
            seed: 0,
        };
        let tr = simulate_closed_loop(&m, &t, ClosedLoop::Static(&c), &[0.5], &policy, 0).unwrap();
        assert_eq!(tr.status, RunStatus::LeftControllerDomain { step: 0 });
    }

    #[test]
    fn exclusive_visit_checker() {
        let r = |a: f64, b: f64| HyperRect::new(vec![a], vec![b]).unwrap();
        let regions = [r(1.0, 2.0), r(3.0, 4.0), r(5.0, 6.0), r(7.0, 8.0)];
        let s = |xs: &[f64]| xs.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        assert!(satisfies_exclusive_visit(&s(&[0.0, 1.5, 5.5]), &regions));
        assert!(!satisfies_exclusive_visit(&s(&[0.0, 1.5, 3.5, 5.5]), &regions));
        assert!(!satisfies_exclusive_visit(&s(&[0.0, 5.5]), &regions));
        assert!(!satisfies_exclusive_visit(&s(&[1.5, 7.5, 5.5]), &regions));
    }
}
