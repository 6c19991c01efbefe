//! End-to-end experiment runs: abstract, margins, synthesize, simulate, report.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::abstraction::{build_abstraction, SymbolicModel};
use crate::config::{expand_initial_state, ExperimentConfig, SpecConfig};
use crate::error::{Error, Result};
use crate::margins::{margin_table, state_margin_field, summarize, write_margin_csv, write_summary_json, MarginSummary, MarginTable, UniformMargin};
use crate::simulation::{check_alt_simulation, satisfies_exclusive_visit, simulate_many, AltSimReport, ClosedLoop, RunStatus, SamplingMode, SpecVerdict};
use crate::synthesis::{cells_in_region, cosafe_controller, determinize_max_margin, maximal_safety_controller, Controller, DeterministicController, Labeling, ProductPolicy, RegionMode, SpecDFA};

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Abstract,
    Margins,
    Synthesize,
    Simulate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Abstract => "abstract",
            Stage::Margins => "margins",
            Stage::Synthesize => "synthesize",
            Stage::Simulate => "simulate",
            Stage::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub name: String,
    pub stage: Option<Stage>,
    pub cells: usize,
    pub inputs: usize,
    pub pairs: usize,
    pub transitions: u64,
    pub abstraction_seconds: f64,
    pub uniform_margin: Option<UniformMargin>,
    pub margins: Option<MarginSummary>,
    pub controller_domain: Option<usize>,
    pub winning_initial_cells: Option<usize>,
    pub simulations: Vec<SimSummary>,
    pub alt_sim: Vec<AltSimSummary>,
    pub artifacts: Vec<String>,
}

/// Outcome counts of the runs of one policy from one initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub policy: String,
    pub x0: Vec<f64>,
    pub runs: usize,
    pub completed: usize,
    pub left_controller_domain: usize,
    pub left_domain: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Runs satisfying the specification on the concrete states (co-safe only).
    pub spec_satisfied: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltSimSummary {
    pub mode: SamplingMode,
    pub rho: f64,
    pub samples: u64,
    pub violations: u64,
}

/// Everything computed by a pipeline run, kept in memory for callers.
#[derive(Debug)]
pub struct PipelineOutput {
    pub summary: PipelineSummary,
    pub model: Option<SymbolicModel>,
    pub table: Option<MarginTable>,
    pub controller: Option<Controller>,
    pub deterministic: Option<DeterministicController>,
    pub product: Option<ProductPolicy>,
}

struct Artifacts {
    dir: PathBuf,
    created: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.created.push(p.clone());
        p
    }

    fn cleanup(&self) {
        for p in self.created.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn tag(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage: stage.name(),
        source: Box::new(e),
    }
}

/// Runs every stage up to and including `until`, writing artifacts to `out`.
/// On failure, files written by this run are removed and the error names
/// the failing stage.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path, until: Stage) -> Result<PipelineOutput> {
    cfg.validate().map_err(|e| Error::Stage {
        stage: "config",
        source: Box::new(e),
    })?;
    let mut art = Artifacts {
        dir: out.to_path_buf(),
        created: Vec::new(),
    };
    if !out.exists() {
        fs::create_dir_all(out)?;
        art.created.push(out.to_path_buf());
    }
    match run_stages(cfg, &mut art, until) {
        Ok(mut o) => {
            o.summary.artifacts = art
                .created
                .iter()
                .filter(|p| p.is_file())
                .filter_map(|p| p.strip_prefix(out).ok())
                .map(|p| p.display().to_string())
                .collect();
            if until >= Stage::Report {
                let path = out.join("summary.json");
                let mut f = fs::File::create(&path)?;
                serde_json::to_writer_pretty(&mut f, &o.summary)?;
                writeln!(f)?;
            }
            Ok(o)
        }
        Err(e) => {
            art.cleanup();
            Err(e)
        }
    }
}

fn load_or_build(cfg: &ExperimentConfig, path: &Path) -> Result<(SymbolicModel, bool)> {
    let grid = cfg.grid()?;
    let inputs = cfg.input_grid()?;
    if path.exists() {
        if let Ok(m) = SymbolicModel::load(path) {
            if m.system() == &cfg.system && m.grid() == &grid && m.inputs() == &inputs && m.reach_operator() == &cfg.reach {
                info!(path = %path.display(), "reusing saved model");
                return Ok((m, true));
            }
        }
    }
    Ok((build_abstraction(&cfg.system, &grid, &inputs, &cfg.reach)?, false))
}

fn run_stages(cfg: &ExperimentConfig, art: &mut Artifacts, until: Stage) -> Result<PipelineOutput> {
    let mut summary = PipelineSummary {
        name: cfg.name.clone(),
        ..Default::default()
    };
    let mut output = PipelineOutput {
        summary: PipelineSummary::default(),
        model: None,
        table: None,
        controller: None,
        deterministic: None,
        product: None,
    };

    // abstract
    let t0 = Instant::now();
    let model_path = art.dir.join("model.bin");
    let (mut model, reused) = load_or_build(cfg, &model_path).map_err(tag(Stage::Abstract))?;
    if let Some(r) = &cfg.initial_region {
        model.set_initial_region(r).map_err(tag(Stage::Abstract))?;
    }
    summary.abstraction_seconds = t0.elapsed().as_secs_f64();
    summary.cells = model.num_cells();
    summary.inputs = model.num_inputs();
    summary.pairs = model.num_pairs();
    summary.transitions = model.transition_count();
    if !reused {
        let p = art.path("model.bin");
        model.save(&p).map_err(tag(Stage::Abstract))?;
    }
    summary.stage = Some(Stage::Abstract);
    if until == Stage::Abstract {
        output.summary = summary;
        output.model = Some(model);
        return Ok(output);
    }

    // margins
    let table = margin_table(&model).map_err(tag(Stage::Margins))?;
    let ms = summarize(&model, &table);
    summary.uniform_margin = Some(ms.uniform);
    write_margin_csv(&model, &table, &art.path("margins.csv")).map_err(tag(Stage::Margins))?;
    write_summary_json(&ms, &art.path("margin_summary.json")).map_err(tag(Stage::Margins))?;
    summary.margins = Some(ms);
    summary.stage = Some(Stage::Margins);
    if until == Stage::Margins {
        output.summary = summary;
        output.model = Some(model);
        output.table = Some(table);
        return Ok(output);
    }

    // synthesize
    let stage = tag(Stage::Synthesize);
    match &cfg.spec {
        SpecConfig::Safety { safe } => {
            let mask = cells_in_region(model.grid(), safe, RegionMode::Contained).map_err(&stage)?;
            let c = maximal_safety_controller(&model, &mask).map_err(&stage)?;
            let det = determinize_max_margin(&c, &table);
            summary.controller_domain = Some(c.domain_size());
            c.write_csv(model.grid(), &art.path("controller.csv")).map_err(&stage)?;
            det.write_csv(&model, &table, &art.path("chosen_input.csv")).map_err(&stage)?;
            write_field_csv(&model, &table, &c, &det, &art.path("margin_field.csv")).map_err(&stage)?;
            output.controller = Some(c);
            output.deterministic = Some(det);
        }
        spec => {
            let (dfa, regions) = match spec {
                SpecConfig::ExclusiveVisit { .. } => (SpecDFA::exclusive_visit_then_reach(), spec.regions()),
                _ => (SpecDFA::reach_avoid(), spec.regions()),
            };
            let labeling = Labeling::from_regions(model.grid(), regions).map_err(&stage)?;
            let policy = cosafe_controller(&model, &dfa, &labeling).map_err(&stage)?;
            summary.winning_initial_cells = Some(policy.winning_initial_cells().count());
            policy.write_csv(&model, &art.path("product_controller.csv")).map_err(&stage)?;
            output.product = Some(policy);
        }
    }
    summary.stage = Some(Stage::Synthesize);
    if until == Stage::Synthesize {
        output.summary = summary;
        output.model = Some(model);
        output.table = Some(table);
        return Ok(output);
    }

    // simulate
    let stage = tag(Stage::Simulate);
    if let Some(sim) = &cfg.simulation {
        let traj_dir = art.dir.join("trajectories");
        if !traj_dir.exists() {
            fs::create_dir_all(&traj_dir).map_err(|e| stage(e.into()))?;
            art.created.push(traj_dir.clone());
        }
        let ctrl = match (&output.deterministic, &output.product) {
            (Some(d), _) => ClosedLoop::Deterministic(d),
            (_, Some(p)) => ClosedLoop::CoSafe(p),
            _ => return Err(stage(Error::Config("no controller to simulate".into()))),
        };
        let regions = cfg.spec.regions();
        let cosafe = matches!(cfg.spec, SpecConfig::ExclusiveVisit { .. });
        for np in &sim.policies {
            let policy = cfg.policy(np).expect("simulation block present");
            for (i, x) in sim.x0.iter().enumerate() {
                for (j, x0) in expand_initial_state(model.grid(), x).map_err(&stage)?.into_iter().enumerate() {
                    let runs = simulate_many(&model, &table, ctrl, &x0, &policy, sim.runs).map_err(&stage)?;
                    let name = format!("trajectories/{}_{i}_{j}.csv", sanitize(&np.name));
                    let dfa = output.product.as_ref().map(|p| p.dfa());
                    runs[0].write_csv(&model, dfa, &art.path(&name)).map_err(&stage)?;
                    let count = |f: &dyn Fn(&crate::simulation::Trajectory) -> bool| runs.iter().filter(|t| f(t)).count();
                    summary.simulations.push(SimSummary {
                        policy: np.name.clone(),
                        x0: x0.clone(),
                        runs: runs.len(),
                        completed: count(&|t| t.status == RunStatus::Completed),
                        left_controller_domain: count(&|t| matches!(t.status, RunStatus::LeftControllerDomain { .. })),
                        left_domain: count(&|t| matches!(t.status, RunStatus::LeftDomain { .. })),
                        accepted: count(&|t| matches!(t.verdict, Some(SpecVerdict::Accepted { .. }))),
                        rejected: count(&|t| matches!(t.verdict, Some(SpecVerdict::Rejected { .. }))),
                        spec_satisfied: cosafe.then(|| count(&|t| satisfies_exclusive_visit(&t.states, &regions))),
                    });
                }
            }
        }
    }
    if let Some(a) = &cfg.alt_sim {
        let r = check_alt_simulation(&model, &table, a.rho, a.samples, a.seed, SamplingMode::Uniform).map_err(&stage)?;
        summary.alt_sim.push(alt_summary(SamplingMode::Uniform, a.rho, &r));
        if let (Some(rb), Some(0.0)) = (a.rho_beyond, table.declared_delta()) {
            let r = check_alt_simulation(&model, &table, rb, a.samples, a.seed, SamplingMode::FaceTargeted)
                .map_err(&stage)?;
            summary.alt_sim.push(alt_summary(SamplingMode::FaceTargeted, rb, &r));
        }
    }
    summary.stage = Some(until.min(Stage::Report));
    output.summary = summary;
    output.model = Some(model);
    output.table = Some(table);
    Ok(output)
}

fn alt_summary(mode: SamplingMode, rho: f64, r: &AltSimReport) -> AltSimSummary {
    AltSimSummary {
        mode,
        rho,
        samples: r.samples,
        violations: r.violations,
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Per controlled cell: the largest margin over enabled inputs and the
/// margin of the input kept by the deterministic controller.
fn write_field_csv(
    model: &SymbolicModel,
    table: &MarginTable,
    c: &Controller,
    det: &DeterministicController,
    path: &Path,
) -> Result<()> {
    let field = state_margin_field(table, c);
    let mut w = csv::Writer::from_path(path)?;
    let n = model.grid().dim();
    let mut header: Vec<String> = (0..n).map(|d| format!("i{d}")).collect();
    header.extend((0..n).map(|d| format!("c{d}")));
    header.extend(["max_margin".into(), "chosen_margin".into()]);
    w.write_record(&header)?;
    for (&q, &best) in &field {
        let cell = model.grid().cell_bounds(crate::geometry::CellId::Cell(q))?;
        let mut row: Vec<String> = model.grid().multi_index(q).iter().map(|i| i.to_string()).collect();
        row.extend(cell.center().iter().map(|v| v.to_string()));
        row.push(best.to_string());
        let chosen = det
            .input(crate::geometry::CellId::Cell(q))
            .map(|v| table.get(q, v).to_string())
            .unwrap_or_default();
        row.push(chosen);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One cell of the grid-size sweep, with the published value for comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub inputs: usize,
    pub counts: [usize; 2],
    pub reference: f64,
}

/// Grid-size sweep for the double integrator. The published table lists
/// only total cell counts; the per-axis shapes used here are
/// 1600 = 40×40, 3200 = 80×40, 6400 = 80×80 and 12800 = 80×160.
pub const TABLE1: [Table1Cell; 12] = {
    const fn c(inputs: usize, a: usize, b: usize, reference: f64) -> Table1Cell {
        Table1Cell {
            inputs,
            counts: [a, b],
            reference,
        }
    }
    [
        c(3, 40, 40, 0.0237),
        c(3, 80, 40, 0.0237),
        c(3, 80, 80, 0.0237),
        c(3, 80, 160, 0.0112),
        c(5, 40, 40, 0.0237),
        c(5, 80, 40, 0.01125),
        c(5, 80, 80, 0.01125),
        c(5, 80, 160, 0.01125),
        c(10, 40, 40, 0.012638),
        c(10, 80, 40, 0.0043),
        c(10, 80, 80, 0.0043),
        c(10, 80, 160, 0.00291),
    ]
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub inputs: usize,
    pub counts: [usize; 2],
    pub cells: usize,
    pub margin: f64,
    pub reference: f64,
    pub relative_difference: f64,
}

/// Uniform margin for each sweep cell, reusing the template's system and
/// reach operator.
pub fn table1_sweep(template: &ExperimentConfig, cells: &[Table1Cell]) -> Result<Vec<Table1Row>> {
    cells
        .iter()
        .map(|c| {
            let mut cfg = template.clone();
            cfg.grid.counts = c.counts.to_vec();
            cfg.inputs.counts = vec![c.inputs];
            cfg.validate()?;
            let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
            let table = margin_table(&model)?;
            let margin = crate::margins::uniform_margin(&table).value;
            info!(inputs = c.inputs, cells = model.num_cells(), margin, "sweep cell");
            Ok(Table1Row {
                inputs: c.inputs,
                counts: c.counts,
                cells: model.num_cells(),
                margin,
                reference: c.reference,
                relative_difference: (margin - c.reference).abs() / c.reference,
            })
        })
        .collect()
}

pub fn write_table1_csv(rows: &[Table1Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["inputs", "cells", "shape", "margin", "reference", "relative_difference"])?;
    for r in rows {
        w.write_record([
            r.inputs.to_string(),
            r.cells.to_string(),
            format!("{}x{}", r.counts[0], r.counts[1]),
            r.margin.to_string(),
            r.reference.to_string(),
            r.relative_difference.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The 3×4 matrix layout of the sweep, keyed by input count.
pub fn table1_matrix(rows: &[Table1Row]) -> BTreeMap<usize, Vec<(usize, f64, f64)>> {
    let mut m: BTreeMap<usize, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for r in rows {
        m.entry(r.inputs).or_default().push((r.cells, r.margin, r.reference));
    }
    for v in m.values_mut() {
        v.sort_by_key(|e| e.0);
    }
    m
}
