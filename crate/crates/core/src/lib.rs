//! Finite abstractions of discrete-time control systems and the robustness
//! margins they carry.
//!
//! A [`SymbolicModel`] partitions the state domain into a uniform grid plus an
//! overflow state, and links every (cell, input) pair to the cells met by an
//! over-approximation of its reach set. Each transition then tolerates some
//! additive perturbation of the concrete dynamics: the margin `ε(q, v)`.
//! Controllers synthesized on the model keep working on the perturbed system
//! as long as the perturbation stays strictly below that margin.
//!
//! ```no_run
//! use symmargin::prelude::*;
//!
//! let cfg = ExperimentConfig::load("configs/double_integrator_table1_5x12800.json".as_ref())?;
//! let model = build_abstraction(&cfg.system, &cfg.grid()?, &cfg.input_grid()?, &cfg.reach)?;
//! let table = margin_table(&model)?;
//! println!("uniform margin {}", uniform_margin(&table).value);
//! # Ok::<(), symmargin::Error>(())
//! ```

pub mod abstraction;
pub mod config;
pub mod error;
pub mod geometry;
pub mod margins;
pub mod pipeline;
pub mod reachability;
pub mod simulation;
pub mod synthesis;
pub mod systems;

pub use abstraction::{build_abstraction, SymbolicModel};
pub use error::{Error, Result};
pub use geometry::{CellBlock, CellId, HyperRect, UniformGrid};
pub use margins::{margin_table, uniform_margin, MarginTable};

pub mod prelude {
    pub use crate::abstraction::{build_abstraction, SymbolicModel};
    pub use crate::config::ExperimentConfig;
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{CellBlock, CellId, HyperRect, UniformGrid};
    pub use crate::margins::{eta, margin_table, state_margin_field, summarize, uniform_margin, MarginTable};
    pub use crate::reachability::ReachOperator;
    pub use crate::simulation::{
        adversarial_escape_witness, check_alt_simulation, simulate_closed_loop, ClosedLoop, DisturbanceMode,
        SamplingMode, SimPolicy,
    };
    pub use crate::synthesis::{
        cells_in_region, cosafe_controller, determinize_max_margin, maximal_safety_controller, Controller,
        InputSet, Labeling, RegionMode, SpecDFA,
    };
    pub use crate::systems::{Dynamics, InputGrid, PerturbationMap, SystemSpec};
}
