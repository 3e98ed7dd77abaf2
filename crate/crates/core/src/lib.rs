//! Random lifts of regular graphs and their chromatic number: lift sampling and
//! enumeration, exact colouring counts, threshold formulas, exact moment sums,
//! asymptotic constants, stochastic-matrix inequalities, and lattice-sum tools.

pub mod asymptotics;
pub mod base_graph;
pub mod coloring;
pub mod error;
pub mod experiments;
pub mod lattice_tools;
pub mod lift;
pub mod moments_exact;
pub mod stochastic_opt;
pub mod thresholds;

pub use asymptotics::LogValue;
pub use base_graph::BaseGraph;
pub use error::{Error, Result};
pub use lift::{Lift, LiftedGraph};
