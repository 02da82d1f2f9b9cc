//! Small dense semidefinite programs.

pub mod dump;
mod problem;
mod solver;

pub use problem::{embed_hermitian, unembed_hermitian, Field, LinearForm, LmiBlock, Sense, SdpProblem};
pub use solver::{solve, SdpSolution, SolverOptions, Status};
