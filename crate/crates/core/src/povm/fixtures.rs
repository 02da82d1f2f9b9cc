//! Built-in measurements.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, ComplexVector, HermitianOperator};
use crate::random::{random_pure_state, rng};
use crate::C64;

use super::Povm;

pub const FIXTURE_NAMES: &[&str] = &["tetra", "trine", "modified-trine", "double-tetra", "covariant:<seed>"];

/// Unit Bloch vectors of the tetrahedral POVM (vertices of a regular
/// tetrahedron inscribed in the Bloch sphere).
pub fn tetra_bloch_vectors() -> [[f64; 3]; 4] {
    let s = 1.0 / 3f64.sqrt();
    [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]]
}

/// `M_i = (I + n_i . sigma) / 4`.
pub fn tetrahedral() -> Povm {
    let effects = tetra_bloch_vectors()
        .iter()
        .map(|n| HermitianOperator::from_bloch(0.25, 0.25 * n[0], 0.25 * n[1], 0.25 * n[2]))
        .collect();
    Povm::new_unchecked(2, effects)
}

fn trine_vector(j: usize, dim: usize) -> ComplexVector {
    let a = PI * j as f64 / 3.0;
    let mut v = ComplexVector::zeros(dim);
    v[0] = C64::new(a.cos(), 0.0);
    v[1] = C64::new(a.sin(), 0.0);
    v
}

/// Qubit trine: `(2/3)|psi_j><psi_j|` with `psi_j = cos(pi j/3)|0> + sin(pi j/3)|1>`.
pub fn trine() -> Povm {
    let effects = (1..=3).map(|j| HermitianOperator::outer(&trine_vector(j, 2)).scale(2.0 / 3.0)).collect();
    Povm::new_unchecked(2, effects)
}

/// Trine embedded in `C^3` with `|2><2|` added to the third effect.
pub fn modified_trine() -> Povm {
    let mut effects: Vec<HermitianOperator> =
        (1..=3).map(|j| HermitianOperator::outer(&trine_vector(j, 3)).scale(2.0 / 3.0)).collect();
    let mut e2 = ComplexVector::zeros(3);
    e2[2] = C64::new(1.0, 0.0);
    effects[2] = effects[2].add(&HermitianOperator::outer(&e2));
    Povm::new_unchecked(3, effects)
}

/// Two copies of the tetrahedral POVM on orthogonal planes of `C^4`:
/// `M_i = T_i (+) T_i`, every effect has unit trace.
pub fn double_tetrahedron() -> Povm {
    let effects = tetrahedral()
        .effects()
        .iter()
        .map(|t| {
            let mut m = ComplexMatrix::zeros(4, 4);
            m.view_mut((0, 0), (2, 2)).copy_from(t.matrix());
            m.view_mut((2, 2), (2, 2)).copy_from(t.matrix());
            HermitianOperator::symmetrized(m)
        })
        .collect();
    Povm::new_unchecked(4, effects)
}

/// Qutrit displacement operator
/// `D_jk = w^{jk/2} sum_m w^{jm} |k + m mod 3><m|` with `w = exp(2 pi i / 3)`.
pub fn displacement(j: usize, k: usize) -> ComplexMatrix {
    let d = 3;
    let omega = |x: f64| C64::from_polar(1.0, 2.0 * PI * x / d as f64);
    let mut m = ComplexMatrix::zeros(d, d);
    for col in 0..d {
        m[((k + col) % d, col)] = omega((j * col) as f64);
    }
    m * omega((j * k) as f64 / 2.0)
}

/// Weyl-Heisenberg covariant qutrit POVM: the nine effects `D_jk S D_jk^dagger`
/// ordered by `(j, k)`. The seed must be PSD with trace `1/3`.
pub fn covariant(seed: &HermitianOperator) -> Result<Povm> {
    if seed.dim() != 3 {
        return Err(Error::InvalidSeed(format!("seed must be 3x3, got dimension {}", seed.dim())));
    }
    if (seed.trace() - 1.0 / 3.0).abs() > 1e-9 {
        return Err(Error::InvalidSeed(format!("trace {} differs from 1/3", seed.trace())));
    }
    if seed.min_eigenvalue() < -1e-9 {
        return Err(Error::InvalidSeed("seed is not PSD".into()));
    }
    let effects = (0..3)
        .flat_map(|j| (0..3).map(move |k| (j, k)))
        .map(|(j, k)| seed.conjugate_by(&displacement(j, k)))
        .collect();
    Povm::new(3, effects)
}

/// Named fixture lookup. Covariant seeds: `covariant:identity` (`I/9`),
/// `covariant:basis` (`|0><0|/3`), `covariant:sic` (Hesse fiducial
/// `(|1> - |2>)/sqrt 2`), `covariant:random:<seed>` (random pure fiducial).
pub fn fixture(name: &str) -> Result<Povm> {
    match name {
        "tetra" => Ok(tetrahedral()),
        "trine" => Ok(trine()),
        "modified-trine" => Ok(modified_trine()),
        "double-tetra" => Ok(double_tetrahedron()),
        _ => {
            let spec = name
                .strip_prefix("covariant:")
                .ok_or_else(|| Error::Parse(format!("unknown fixture '{name}'")))?;
            covariant(&covariant_seed(spec)?)
        }
    }
}

fn covariant_seed(spec: &str) -> Result<HermitianOperator> {
    let pure = |v: ComplexVector| HermitianOperator::outer(&v).scale(1.0 / 3.0);
    match spec {
        "identity" => Ok(HermitianOperator::identity(3).scale(1.0 / 9.0)),
        "basis" => {
            let mut v = ComplexVector::zeros(3);
            v[0] = C64::new(1.0, 0.0);
            Ok(pure(v))
        }
        "sic" => {
            let s = 1.0 / 2f64.sqrt();
            Ok(pure(ComplexVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])))
        }
        _ => {
            let seed: u64 = spec
                .strip_prefix("random:")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("unknown covariant seed '{spec}'")))?;
            Ok(pure(random_pure_state(&mut rng(seed), 3)))
        }
    }
}
