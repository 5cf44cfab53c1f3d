//! Probabilistic analysis of scalar delay differential equations.
//!
//! Time is measured in units of the delay. Initial functions live on `[0, 1]`
//! and the equation is integrated from `t = 1` with explicit Euler on the mesh
//! `h = 1/N`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod density;
pub mod ergostats;
pub mod error;
pub mod exec;
pub mod history;
pub mod integrate;
pub mod system;
pub mod transient;

pub use error::{Error, Result};
pub use history::{
    initial_history, FamilyKind, HistoryVector, InitialFamily, OdeGenerator, DEFAULT_MESH,
};
pub use integrate::{
    continue_from, euler_step, integrate, scalar_solution_map, time_one_map, SolutionPath,
};
pub use system::{make_system, DelaySystem, Feedback, ModelId};
