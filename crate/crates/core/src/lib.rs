//! Boltzmann-distribution analysis of QAOA output on random MaxCut instances.
//!
//! The pipeline: generate Erdős–Rényi instances ([`graph`]), enumerate their
//! density of states ([`spectrum`]), simulate optimized QAOA states
//! ([`simulator`], [`angles`]), fit exponential cost distributions
//! ([`boltzmann`]), compare entropies ([`thermo`]) and aggregate ensembles into
//! scaling laws and large-`n` predictions ([`ensemble`]).

pub mod angles;
pub mod boltzmann;
pub mod distribution;
pub mod ensemble;
pub mod error;
pub mod figures;
pub mod graph;
pub mod io;
pub mod optim;
pub mod projection;
pub mod simulator;
pub mod spectrum;
pub mod stats;
pub mod thermo;

pub use distribution::{cumulative, tvd, CostDistribution};
pub use error::{Error, Result};
pub use graph::{generate_er, Assignment, GraphInstance};
pub use simulator::{AngleSet, Simulator, StateVector};
pub use spectrum::{enumerate_spectrum, CostSpectrum, CostTable};
