//! Numerical tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Centralized tolerance record. Every check in the crate reads its
/// threshold from here unless an explicit tolerance is passed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Max-abs deviation of `A - A^dagger` accepted as Hermitian.
    pub hermiticity: f64,
    /// Smallest eigenvalue accepted as PSD is `-psd`.
    pub psd: f64,
    /// Max-abs deviation of `V^dagger V - I` accepted as orthonormal.
    pub orthonormality: f64,
    /// Max-abs deviation of `sum_i M_i - I` accepted for a POVM.
    pub normalization: f64,
    /// Relative eigenvalue cutoff for numerical rank and supports.
    pub rank_cutoff: f64,
    /// Max-abs deviation of `E^2 - E` accepted as a projector.
    pub projector: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            psd: 1e-9,
            orthonormality: 1e-10,
            normalization: 1e-9,
            rank_cutoff: 1e-8,
            projector: 1e-8,
        }
    }
}
