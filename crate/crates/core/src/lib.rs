//! Inverse parametric PDE solver on local randomized neural network bases.
//!
//! The unknown field is expanded in fixed random-feature networks, one per
//! subdomain, and the coefficients are recovered jointly with the output
//! weights by nonlinear least squares or by one of two variable-projection
//! reductions.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod solvers;
pub mod trsolver;

pub use assembly::{AssemblyOptions, Linearization, SystemTables};
pub use basis::{Activation, Architecture, BasisConfig, EnsembleBasis, Jet2, JetComponent};
pub use error::{Error, Result};
pub use experiment::{run_single, run_sweep, write_csv, RunConfig, SweepRow};
pub use geometry::{build_discretization, Discretization, DomainSpec};
pub use linalg::DenseMatrix;
pub use metrics::{compute_errors, ErrorReport};
pub use problem::{make_benchmark, Benchmark, InverseProblem, NoiseSpec};
pub use solvers::{InverseSolution, SolverChoice, SolverKind};
pub use trsolver::{PerturbConfig, SolveOutcome, TrustRegionConfig};
