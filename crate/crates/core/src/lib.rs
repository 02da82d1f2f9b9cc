//! Projective simulability of generalized quantum measurements.
//!
//! The crate decides whether a POVM can be realized by classical mixtures of
//! projective measurements followed by classical post-processing, computes
//! the critical depolarizing visibility with a small interior-point SDP
//! solver, extracts explicit simulation strategies, builds Naimark dilations
//! with a system-sized ancilla, and lower-bounds the worst-case qubit
//! visibility through outer polytopes of quasi-POVMs.

pub mod decompose;
pub mod error;
pub mod hermlin;
pub mod io;
pub mod naimark;
pub mod polytope;
pub mod povm;
pub mod random;
pub mod sdp;
pub mod simulability;
pub mod tol;

pub use error::{Error, Result};
pub use hermlin::{ComplexMatrix, EigenDecomposition, HermitianOperator};
pub use povm::{Povm, PostProcessing, SimulationStrategy};
pub use tol::Tolerances;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
