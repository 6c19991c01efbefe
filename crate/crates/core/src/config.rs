//! Experiment configuration: one JSON document, validated before any work.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HyperRect, UniformGrid};
use crate::reachability::ReachOperator;
use crate::simulation::{DisturbanceMode, SimPolicy};
use crate::systems::{InputGrid, PerturbationMap, SystemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemSpec,
    pub grid: CountsConfig,
    pub inputs: CountsConfig,
    pub reach: ReachOperator,
    /// Initial states: cells contained in this box. All cells when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_region: Option<HyperRect>,
    pub spec: SpecConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_sim: Option<AltSimConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecConfig {
    /// Stay in `safe` forever.
    Safety { safe: HyperRect },
    /// Visit exactly one of `r1`, `r2`, then reach `r3`, avoiding `r4`.
    ExclusiveVisit {
        r1: HyperRect,
        r2: HyperRect,
        r3: HyperRect,
        r4: HyperRect,
    },
    /// Reach `target` while avoiding `avoid`.
    ReachAvoid { target: HyperRect, avoid: HyperRect },
}

impl SpecConfig {
    pub fn regions(&self) -> Vec<HyperRect> {
        match self {
            SpecConfig::Safety { safe } => vec![safe.clone()],
            SpecConfig::ExclusiveVisit { r1, r2, r3, r4 } => {
                vec![r1.clone(), r2.clone(), r3.clone(), r4.clone()]
            }
            SpecConfig::ReachAvoid { target, avoid } => vec![target.clone(), avoid.clone()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Initial states. A point may omit trailing periodic coordinates; the
    /// run is then repeated from every cell centre along those axes.
    pub x0: Vec<Vec<f64>>,
    pub horizon: usize,
    #[serde(default = "one")]
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    pub policies: Vec<NamedPolicy>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPolicy {
    pub name: String,
    pub disturbance: DisturbanceMode,
    pub perturbation: PerturbationMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltSimConfig {
    pub samples: u64,
    /// Scale below the margin, checked with uniform sampling.
    pub rho: f64,
    /// Scale above the margin, checked with face-targeted sampling when the
    /// reach operator is exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_beyond: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(
            self.system.domain().clone(),
            self.grid.counts.clone(),
            self.system.periodic().to_vec(),
        )
    }

    pub fn input_grid(&self) -> Result<InputGrid> {
        InputGrid::new(self.system.input_set(), self.inputs.counts.clone())
    }

    /// Checks every cross-field constraint; all failures are config errors.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let n = self.system.state_dim();
        if self.grid.counts.is_empty() {
            return Err(Error::Config("grid counts must not be empty".into()));
        }
        let grid = self.grid().map_err(cfg_err)?;
        let inputs = self.input_grid().map_err(cfg_err)?;
        if inputs.len() > 64 {
            return Err(Error::Config(format!(
                "at most 64 symbolic inputs are supported, got {}",
                inputs.len()
            )));
        }
        self.reach.validate(&self.system).map_err(cfg_err)?;
        if let Some(r) = &self.initial_region {
            if r.dim() != n {
                return Err(Error::Config("initial region has the wrong dimension".into()));
            }
        }
        for r in self.spec.regions() {
            if r.dim() != n {
                return Err(Error::Config("spec region has the wrong dimension".into()));
            }
        }
        if let Some(sim) = &self.simulation {
            if sim.horizon == 0 {
                return Err(Error::Config("simulation horizon must be at least 1".into()));
            }
            if sim.runs == 0 {
                return Err(Error::Config("simulation runs must be at least 1".into()));
            }
            for x in &sim.x0 {
                expand_initial_state(&grid, x).map_err(cfg_err)?;
            }
            for p in &sim.policies {
                p.perturbation.validate().map_err(cfg_err)?;
            }
        }
        if let Some(a) = &self.alt_sim {
            if !(a.rho >= 0.0) || a.rho_beyond.is_some_and(|r| !(r >= 0.0)) {
                return Err(Error::Config("alt_sim scales must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn policy(&self, p: &NamedPolicy) -> Option<SimPolicy> {
        self.simulation.as_ref().map(|s| SimPolicy {
            disturbance: p.disturbance,
            perturbation: p.perturbation,
            horizon: s.horizon,
            seed: s.seed,
        })
    }
}

/// Completes a partial initial state with every cell centre of the missing
/// trailing periodic axes.
pub fn expand_initial_state(grid: &UniformGrid, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = grid.dim();
    if x.len() > n || x.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n,
            got: x.len(),
        });
    }
    if let Some(d) = (x.len()..n).find(|&d| !grid.periodic()[d]) {
        return Err(Error::Config(format!(
            "initial state omits non-periodic coordinate {d}"
        )));
    }
    let mut out = vec![x.to_vec()];
    for d in x.len()..n {
        let lo = grid.domain().lo()[d];
        let h = grid.width(d);
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..grid.counts()[d]).map(move |i| {
                    let mut p = p.clone();
                    p.push(lo + (i as f64 + 0.5) * h);
                    p
                })
            })
            .collect();
    }
    Ok(out)
}
