//! Naimark dilation with a `d`-dimensional ancilla.
//!
//! Every POVM on `C^d` is realized on `C^d (x) C^d` by a mixture of rank-one
//! projective measurements followed by a relabelling of outcomes: refine to
//! rank one, split into extremal POVMs (each has at most `d^2` nonzero
//! effects), and lift each extremal POVM to an orthonormal basis.
//!
//! Basis vectors of the dilated space are indexed `k * d + l` for
//! `|e_k> (x) |f_l>`.

use crate::decompose::decompose_extremal;
use crate::error::{Error, Result};
use crate::hermlin::{
    complete_to_unitary, eig_hermitian, kron, orthonormality_defect, ComplexMatrix, ComplexVector, HermitianOperator,
};
use crate::povm::{Povm, PostProcessing, SimulationStrategy};
use crate::tol::Tolerances;
use crate::random::{random_density_matrix, rng};
use crate::C64;

#[derive(Debug, Clone)]
pub struct Dilation {
    pub ancilla_state: ComplexVector,
    /// Rank-one projective measurements on the dilated space, followed by
    /// `outcome_map`.
    pub strategy: SimulationStrategy,
    pub outcome_map: PostProcessing,
    /// Completed unitary of each member; row `i` holds the coordinates of the
    /// `i`-th measurement vector in the reference basis.
    pub unitaries: Vec<ComplexMatrix>,
}

impl Dilation {
    pub fn system_dim(&self) -> usize {
        self.ancilla_state.len()
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_state.len()
    }

    /// The realized POVM on the dilated space, in the original outcomes.
    pub fn realized(&self) -> Povm {
        self.strategy.apply()
    }

    /// Largest deviation of any member's unitary from unitarity.
    pub fn unitarity_defect(&self) -> f64 {
        self.unitaries
            .iter()
            .map(|u| {
                let g = u * u.adjoint() - ComplexMatrix::identity(u.nrows(), u.nrows());
                g.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Unitary `Q` with `Q e_0 = phi` (Householder reflection with a phase).
fn householder(phi: &ComplexVector) -> ComplexMatrix {
    let d = phi.len();
    let theta = phi[0].arg();
    let phase = C64::from_polar(1.0, theta);
    let mut u = -phi * phase.conj();
    u[0] += C64::from(1.0);
    let nu = u.norm_squared();
    let id = ComplexMatrix::identity(d, d);
    if nu < 1e-24 {
        return id * phase;
    }
    (id - &u * u.adjoint() * C64::from(2.0 / nu)) * phase
}

/// Reference basis of `C^d (x) C^d` as columns: `|e_k>|phi>` for `k < d`
/// first, then `|e_k>|f_l>` for `l >= 1` in index order.
fn reference_basis(phi: &ComplexVector) -> ComplexMatrix {
    let d = phi.len();
    let q = householder(phi);
    let mut cols = Vec::with_capacity(d * d);
    for l in 0..d {
        for k in 0..d {
            let mut v = ComplexVector::zeros(d * d);
            for m in 0..d {
                v[k * d + m] = q[(m, l)];
            }
            cols.push(v);
        }
    }
    ComplexMatrix::from_columns(&cols)
}

/// Polar factor `A (A^dag A)^{-1/2}` when `A` is already within 1e-6 of an
/// isometry; extremal parts only sum to the identity up to solver accuracy.
fn nearest_isometry(a: ComplexMatrix) -> ComplexMatrix {
    let defect = orthonormality_defect(&a);
    if defect <= Tolerances::default().orthonormality || defect > 1e-6 {
        return a;
    }
    let gram = HermitianOperator::symmetrized(a.adjoint() * &a);
    let inv_sqrt = gram.eig().map(|x| 1.0 / x.sqrt());
    a * inv_sqrt.matrix()
}

/// Builds the dilation of `m` with ancilla state `phi` (default `|0>`).
pub fn dilate(m: &Povm, phi: Option<&ComplexVector>) -> Result<Dilation> {
    let d = m.dim();
    let phi = match phi {
        Some(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch(format!("ancilla state has dimension {}, expected {d}", v.len())));
            }
            let n = v.norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized { deviation: (n - 1.0).abs() });
            }
            v.clone()
        }
        None => {
            let mut v = ComplexVector::zeros(d);
            v[0] = C64::from(1.0);
            v
        }
    };
    let dd = d * d;
    let (fine, _) = m.refine_rank_one();
    let slots = fine.num_outcomes().max(dd);
    let basis = reference_basis(&phi);

    let mut weights = Vec::new();
    let mut members = Vec::new();
    let mut unitaries = Vec::new();
    for (w, part) in decompose_extremal(&fine)? {
        let nonzero: Vec<usize> = (0..part.num_outcomes()).filter(|&i| part.effect(i).rank(1e-8) > 0).collect();
        if nonzero.len() > dd {
            return Err(Error::DimensionMismatch(format!("extremal member with {} > {dd} effects", nonzero.len())));
        }
        // rows i: measurement vectors; first d columns: <w_j | v_i phi>
        let mut a = ComplexMatrix::zeros(dd, d);
        for (row, &i) in nonzero.iter().enumerate() {
            let eig = eig_hermitian(part.effect(i));
            let v = eig.vector(0) * C64::from(eig.eigenvalues[0].max(0.0).sqrt());
            for j in 0..d {
                a[(row, j)] = v[j];
            }
        }
        let u = complete_to_unitary(&nearest_isometry(a))?;
        let psi: Vec<ComplexVector> = (0..dd).map(|i| &basis * u.row(i).transpose()).collect();
        let free: Vec<usize> = (0..slots).filter(|s| !nonzero.contains(s)).collect();
        let mut effects = vec![HermitianOperator::zeros(dd); slots];
        for (row, &i) in nonzero.iter().enumerate() {
            effects[i] = HermitianOperator::outer(&psi[row]);
        }
        for (k, row) in (nonzero.len()..dd).enumerate() {
            effects[free[k]] = HermitianOperator::outer(&psi[row]);
        }
        weights.push(w);
        members.push(Povm::new_unchecked(dd, effects));
        unitaries.push(u);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    // refined outcome `i * d + j` comes from outcome `i`; spare slots carry
    // no weight on the ancilla state and go to outcome 0
    let map: Vec<usize> = (0..slots).map(|s| if s < fine.num_outcomes() { s / d } else { 0 }).collect();
    let outcome_map = PostProcessing::relabelling(&map, m.num_outcomes());
    let strategy = SimulationStrategy::new(weights, members, Some(outcome_map.clone()))?;
    Ok(Dilation { ancilla_state: phi, strategy, outcome_map, unitaries })
}

/// Largest `|tr(rho M_i) - tr((rho (x) |phi><phi|) N_i)|` over `trials`
/// random density matrices drawn with `seed`.
pub fn verify_dilation(m: &Povm, dil: &Dilation, trials: usize, seed: u64) -> f64 {
    let d = m.dim();
    let realized = dil.realized();
    let anc = HermitianOperator::outer(&dil.ancilla_state);
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let rho = random_density_matrix(&mut r, d);
        let big = HermitianOperator::symmetrized(kron(rho.matrix(), anc.matrix()));
        for (p, q) in m.probabilities(&rho).iter().zip(realized.probabilities(&big)) {
            worst = worst.max((p - q).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{tetrahedral, trine};
    use crate::random::{random_povm, random_pure_state};

    #[test]
    fn householder_maps_e0() {
        let phi = random_pure_state(&mut rng(1), 3);
        let q = householder(&phi);
        assert!((q.column(0) - &phi).norm() < 1e-14);
        assert!((q.adjoint() * &q - ComplexMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn trine_and_tetra() {
        for m in [trine(), tetrahedral()] {
            let dil = dilate(&m, None).unwrap();
            assert_eq!(dil.ancilla_dim(), 2);
            assert!(verify_dilation(&m, &dil, 100, 7) < 1e-9);
            assert!(dil.unitarity_defect() < 1e-10);
            for member in dil.strategy.members() {
                assert!(member.is_projective(1e-10));
                assert!(member.effects().iter().all(|e| e.rank(1e-8) <= 1));
            }
        }
        assert_eq!(dilate(&tetrahedral(), None).unwrap().strategy.len(), 1);
    }

    #[test]
    fn random_with_custom_ancilla() {
        let mut r = rng(2);
        let m = random_povm(&mut r, 3, 4);
        let phi = random_pure_state(&mut r, 3);
        let dil = dilate(&m, Some(&phi)).unwrap();
        assert!(verify_dilation(&m, &dil, 50, 1) < 1e-9);
    }

    #[test]
    fn trivial_and_corrupted() {
        let triv = Povm::new(2, vec![HermitianOperator::identity(2)]).unwrap();
        let dil = dilate(&triv, None).unwrap();
        assert!(verify_dilation(&triv, &dil, 10, 0) < 1e-12);

        let m = trine();
        let good = dilate(&m, None).unwrap();
        let other = dilate(&m.conjugate_by(&crate::random::random_unitary(&mut rng(8), 2)), None).unwrap();
        let bad = Dilation { strategy: other.strategy, ..good };
        assert!(verify_dilation(&m, &bad, 50, 3) > 1e-3);
    }
}
