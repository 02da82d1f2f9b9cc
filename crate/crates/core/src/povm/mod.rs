//! POVM data model and classical manipulations: validation, depolarizing
//! noise, post-processing, convex mixing and rank-one refinement.

mod fixtures;
mod protocols;
mod strategy;

pub use fixtures::{
    covariant, displacement, double_tetrahedron, fixture, modified_trine, tetra_bloch_vectors, tetrahedral,
    trine, FIXTURE_NAMES,
};
pub use protocols::{protocol_inverse_d, protocol_inverse_d_uniform, protocol_tetra_optimal};
pub use strategy::SimulationStrategy;

use crate::error::{Error, Result};
use crate::hermlin::{eig_hermitian, max_abs, ComplexMatrix, HermitianOperator};
use crate::tol::Tolerances;

/// Ordered list of PSD effects summing to the identity. Zero effects are kept
/// so outcome labels stay stable under every manipulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<HermitianOperator>,
}

impl Povm {
    /// Validates with the default tolerances.
    pub fn new(dim: usize, effects: Vec<HermitianOperator>) -> Result<Self> {
        Self::validate(dim, effects, &Tolerances::default())
    }

    /// Checks shapes, positivity of every effect and normalization.
    pub fn validate(dim: usize, effects: Vec<HermitianOperator>, tol: &Tolerances) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::DimensionMismatch("a POVM needs at least one effect".into()));
        }
        if let Some((i, e)) = effects.iter().enumerate().find(|(_, e)| e.dim() != dim) {
            return Err(Error::DimensionMismatch(format!("effect {i} has dimension {}, expected {dim}", e.dim())));
        }
        // worst eigenvalue first so the error names the most negative effect
        let worst = effects
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.min_eigenvalue()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if worst.1 < -tol.psd {
            return Err(Error::EffectNotPsd { index: worst.0, eigenvalue: worst.1 });
        }
        let povm = Self { dim, effects };
        let deviation = povm.normalization_defect();
        if deviation > tol.normalization {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(povm)
    }

    pub(crate) fn new_unchecked(dim: usize, effects: Vec<HermitianOperator>) -> Self {
        debug_assert!(effects.iter().all(|e| e.dim() == dim));
        Self { dim, effects }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, i: usize) -> &HermitianOperator {
        &self.effects[i]
    }

    pub fn into_effects(self) -> Vec<HermitianOperator> {
        self.effects
    }

    /// Max-abs entry of `sum_i M_i - I`.
    pub fn normalization_defect(&self) -> f64 {
        let sum = self.effects.iter().fold(HermitianOperator::zeros(self.dim), |acc, e| acc.add(e));
        sum.distance(&HermitianOperator::identity(self.dim))
    }

    /// Largest effectwise max-abs distance; infinite on shape mismatch.
    pub fn distance(&self, other: &Povm) -> f64 {
        if self.dim != other.dim || self.num_outcomes() != other.num_outcomes() {
            return f64::INFINITY;
        }
        self.effects.iter().zip(&other.effects).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }

    /// Outcome probabilities `tr(rho M_i)`.
    pub fn probabilities(&self, rho: &HermitianOperator) -> Vec<f64> {
        self.effects.iter().map(|e| e.inner(rho)).collect()
    }

    pub fn traces(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.trace()).collect()
    }

    /// White-noise image `t M_i + (1 - t) tr(M_i) I / d`.
    pub fn depolarize(&self, t: f64) -> Result<Povm> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("visibility {t} outside [0, 1]")));
        }
        Ok(self.depolarize_unchecked(t))
    }

    /// Same map without the range check; used for quasi-POVMs and exact
    /// identities where `t` is known to be valid.
    pub fn depolarize_unchecked(&self, t: f64) -> Povm {
        let d = self.dim as f64;
        let id = HermitianOperator::identity(self.dim);
        let effects = self.effects.iter().map(|e| e.scale(t).axpy((1.0 - t) * e.trace() / d, &id)).collect();
        Povm::new_unchecked(self.dim, effects)
    }

    /// `[Q(M)]_i = sum_j q(i|j) M_j`.
    pub fn post_process(&self, q: &PostProcessing) -> Result<Povm> {
        if q.inputs() != self.num_outcomes() {
            return Err(Error::DimensionMismatch(format!(
                "post-processing expects {} outcomes, POVM has {}",
                q.inputs(),
                self.num_outcomes()
            )));
        }
        let mut effects = vec![HermitianOperator::zeros(self.dim); q.outputs()];
        for (j, m) in self.effects.iter().enumerate() {
            for (i, out) in effects.iter_mut().enumerate() {
                let w = q.prob(i, j);
                if w != 0.0 {
                    *out = out.axpy(w, m);
                }
            }
        }
        Ok(Povm::new_unchecked(self.dim, effects))
    }

    /// Effectwise convex combination.
    pub fn mix(members: &[(f64, Povm)]) -> Result<Povm> {
        let first = &members.first().ok_or_else(|| Error::InvalidWeights { sum: 0.0 })?.1;
        let sum: f64 = members.iter().map(|(w, _)| w).sum();
        if (sum - 1.0).abs() > 1e-12 || members.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::InvalidWeights { sum });
        }
        let (dim, n) = (first.dim, first.num_outcomes());
        if members.iter().any(|(_, m)| m.dim != dim || m.num_outcomes() != n) {
            return Err(Error::DimensionMismatch("mixed POVMs must share dimension and outcome count".into()));
        }
        let mut effects = vec![HermitianOperator::zeros(dim); n];
        for (w, m) in members {
            for (acc, e) in effects.iter_mut().zip(&m.effects) {
                *acc = acc.axpy(*w, e);
            }
        }
        Ok(Povm::new_unchecked(dim, effects))
    }

    /// Splits every effect along its eigenvectors. Outcome `i * d + j` of the
    /// refinement is `lambda_j |psi_j><psi_j|` of effect `i` (zero when the
    /// eigenvalue is below the rank cutoff); the returned coarse-graining maps
    /// it back to `i`.
    pub fn refine_rank_one(&self) -> (Povm, PostProcessing) {
        let d = self.dim;
        let cutoff = Tolerances::default().rank_cutoff;
        let mut effects = Vec::with_capacity(self.num_outcomes() * d);
        for e in &self.effects {
            let eig = eig_hermitian(e);
            for j in 0..d {
                let l = eig.eigenvalues[j];
                if l > cutoff {
                    effects.push(HermitianOperator::outer(&eig.vector(j)).scale(l));
                } else {
                    effects.push(HermitianOperator::zeros(d));
                }
            }
        }
        let map: Vec<usize> = (0..effects.len()).map(|k| k / d).collect();
        let coarse = PostProcessing::relabelling(&map, self.num_outcomes());
        (Povm::new_unchecked(d, effects), coarse)
    }

    /// Every effect satisfies `||E^2 - E||_max <= tol`.
    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects.iter().all(|e| max_abs(&(e.matrix() * e.matrix() - e.matrix())) <= tol)
    }

    /// Numerical ranks of all effects.
    pub fn ranks(&self, cutoff: f64) -> Vec<usize> {
        self.effects.iter().map(|e| e.rank(cutoff)).collect()
    }

    /// Sufficient condition for projective simulability: for some outcome `k`
    /// the largest eigenvalues of all other effects sum to at most one.
    pub fn sufficient_simulable(&self) -> bool {
        let lmax: Vec<f64> = self.effects.iter().map(|e| e.max_eigenvalue()).collect();
        let total: f64 = lmax.iter().sum();
        lmax.iter().any(|l| total - l <= 1.0 + 1e-12)
    }

    /// `U M_i U^dagger` for every effect.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Povm {
        Povm::new_unchecked(self.dim, self.effects.iter().map(|e| e.conjugate_by(u)).collect())
    }

    /// Removes effects with max-abs entry at most `tol`; returns the reduced
    /// POVM and the original indices of the kept effects.
    pub fn drop_zero_effects(&self, tol: f64) -> (Povm, Vec<usize>) {
        let keep: Vec<usize> = (0..self.num_outcomes()).filter(|&i| max_abs(self.effects[i].matrix()) > tol).collect();
        let effects = keep.iter().map(|&i| self.effects[i].clone()).collect();
        (Povm::new_unchecked(self.dim, effects), keep)
    }

    /// Places the effects at `positions` of an `n`-outcome POVM, zeros
    /// elsewhere.
    pub fn embed(&self, positions: &[usize], n: usize) -> Povm {
        let mut effects = vec![HermitianOperator::zeros(self.dim); n];
        for (e, &p) in self.effects.iter().zip(positions) {
            effects[p] = e.clone();
        }
        Povm::new_unchecked(self.dim, effects)
    }
}

/// Classical post-processing `q(i|j)`: row `j` is the distribution of the
/// output `i` given the input outcome `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessing {
    rows: Vec<Vec<f64>>,
    outputs: usize,
}

impl PostProcessing {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = rows.first().map_or(0, |r| r.len());
        if outputs == 0 || rows.iter().any(|r| r.len() != outputs) {
            return Err(Error::DimensionMismatch("post-processing rows must be non-empty and equal length".into()));
        }
        for (j, r) in rows.iter().enumerate() {
            let sum: f64 = r.iter().sum();
            if r.iter().any(|p| !(-1e-12..=1.0 + 1e-12).contains(p)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::OutOfRange(format!("row {j} of the post-processing is not a distribution")));
            }
        }
        Ok(Self { rows, outputs })
    }

    pub fn identity(n: usize) -> Self {
        Self::relabelling(&(0..n).collect::<Vec<_>>(), n)
    }

    /// Deterministic post-processing sending input `j` to `map[j]`.
    pub fn relabelling(map: &[usize], outputs: usize) -> Self {
        let rows = map
            .iter()
            .map(|&i| {
                let mut r = vec![0.0; outputs];
                r[i] = 1.0;
                r
            })
            .collect();
        Self { rows, outputs }
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// `q(i|j)`.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.rows[j][i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Applies `self` first, then `next`.
    pub fn then(&self, next: &PostProcessing) -> Result<PostProcessing> {
        if self.outputs != next.inputs() {
            return Err(Error::DimensionMismatch("cannot compose post-processings".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                (0..next.outputs)
                    .map(|i| r.iter().enumerate().map(|(k, p)| p * next.rows[k][i]).sum())
                    .collect()
            })
            .collect();
        Ok(Self { rows, outputs: next.outputs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::paulis;
    use crate::random::{random_density_matrix, random_povm, rng};
    use approx::assert_abs_diff_eq;

    fn basis_povm() -> Povm {
        let p0 = HermitianOperator::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let p1 = HermitianOperator::from_real(&[&[0.0, 0.0], &[0.0, 1.0]]).unwrap();
        Povm::new(2, vec![p0, p1]).unwrap()
    }

    #[test]
    fn validate_examples() {
        Povm::new(2, vec![HermitianOperator::identity(2), HermitianOperator::zeros(2)]).unwrap();
        let sz = HermitianOperator::new(paulis()[2].clone()).unwrap();
        let err = Povm::new(2, vec![sz.clone(), HermitianOperator::identity(2).sub(&sz)]).unwrap_err();
        assert!(matches!(err, Error::EffectNotPsd { index: 0, eigenvalue } if (eigenvalue + 1.0).abs() < 1e-12));
        let half = HermitianOperator::identity(2).scale(0.5);
        let err = Povm::new(2, vec![half.clone(), half.scale(0.5)]).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
        Povm::new(2, tetrahedral().into_effects()).unwrap();
    }

    #[test]
    fn depolarize_examples() {
        let tetra = tetrahedral();
        assert!(tetra.depolarize(1.0).unwrap().distance(&tetra) < 1e-15);
        let triv = tetra.depolarize(0.0).unwrap();
        for e in triv.effects() {
            assert!(e.distance(&HermitianOperator::identity(2).scale(0.25)) < 1e-15);
        }
        let half = tetra.depolarize(0.5).unwrap();
        for e in half.effects() {
            let ev = e.eig().eigenvalues;
            assert_abs_diff_eq!(ev[0], 1.5 / 4.0, epsilon = 1e-14);
            assert_abs_diff_eq!(ev[1], 0.5 / 4.0, epsilon = 1e-14);
        }
        assert!(tetra.depolarize(1.5).is_err());
    }

    #[test]
    fn depolarize_semigroup_and_duality() {
        let mut r = rng(11);
        for _ in 0..20 {
            let m = random_povm(&mut r, 3, 4);
            let (s, t) = (0.7, 0.4);
            let lhs = m.depolarize(s).unwrap().depolarize(t).unwrap();
            assert!(lhs.distance(&m.depolarize(s * t).unwrap()) < 1e-12);
            let rho = random_density_matrix(&mut r, 3);
            let noisy_rho = HermitianOperator::identity(3).scale((1.0 - t) / 3.0).axpy(t, &rho);
            let a = m.depolarize(t).unwrap().probabilities(&rho);
            let b = m.probabilities(&noisy_rho);
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn post_processing_examples() {
        let tetra = tetrahedral();
        assert!(tetra.post_process(&PostProcessing::identity(4)).unwrap().distance(&tetra) < 1e-15);
        let all = tetra.post_process(&PostProcessing::relabelling(&[0, 0, 0, 0], 1)).unwrap();
        assert!(all.effect(0).distance(&HermitianOperator::identity(2)) < 1e-14);
        let (refined, coarse) = tetra.refine_rank_one();
        assert!(refined.post_process(&coarse).unwrap().distance(&tetra) < 1e-12);
        assert!(tetra.post_process(&PostProcessing::identity(3)).is_err());
    }

    #[test]
    fn post_processing_composition() {
        let mut r = rng(5);
        let m = random_povm(&mut r, 2, 3);
        let q1 = PostProcessing::new(vec![vec![0.5, 0.5], vec![0.2, 0.8], vec![1.0, 0.0]]).unwrap();
        let q2 = PostProcessing::new(vec![vec![0.1, 0.6, 0.3], vec![0.0, 0.0, 1.0]]).unwrap();
        let lhs = m.post_process(&q1).unwrap().post_process(&q2).unwrap();
        let rhs = m.post_process(&q1.then(&q2).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-12);
    }

    #[test]
    fn mix_examples() {
        let tetra = tetrahedral();
        assert!(Povm::mix(&[(1.0, tetra.clone())]).unwrap().distance(&tetra) < 1e-15);
        let a = Povm::new(2, vec![HermitianOperator::identity(2), HermitianOperator::zeros(2)]).unwrap();
        let b = Povm::new(2, vec![HermitianOperator::zeros(2), HermitianOperator::identity(2)]).unwrap();
        let m = Povm::mix(&[(0.5, a.clone()), (0.5, b)]).unwrap();
        for e in m.effects() {
            assert!(e.distance(&HermitianOperator::identity(2).scale(0.5)) < 1e-15);
        }
        assert!(matches!(Povm::mix(&[(0.7, a)]), Err(Error::InvalidWeights { .. })));
    }

    #[test]
    fn refine_examples() {
        let half = HermitianOperator::identity(2).scale(0.5);
        let m = Povm::new(2, vec![half.clone(), half]).unwrap();
        let (refined, coarse) = m.refine_rank_one();
        assert_eq!(refined.num_outcomes(), 4);
        for e in refined.effects() {
            assert_abs_diff_eq!(e.trace(), 0.5, epsilon = 1e-14);
            assert_eq!(e.rank(1e-8), 1);
        }
        assert!(refined.post_process(&coarse).unwrap().distance(&m) < 1e-12);

        let tetra = tetrahedral();
        let (refined, _) = tetra.refine_rank_one();
        for i in 0..4 {
            assert!(refined.effect(2 * i).distance(tetra.effect(i)) < 1e-12);
            assert_eq!(max_abs(refined.effect(2 * i + 1).matrix()), 0.0);
        }

        let mt = modified_trine();
        let (refined, _) = mt.refine_rank_one();
        let third: Vec<_> = refined.effects()[6..9].iter().filter(|e| e.rank(1e-8) == 1).collect();
        assert_eq!(third.len(), 2);
        assert_abs_diff_eq!(third.iter().map(|e| e.trace()).sum::<f64>(), 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn projective_examples() {
        assert!(basis_povm().is_projective(1e-10));
        assert!(!tetrahedral().is_projective(1e-10));
        let det = Povm::new(2, vec![HermitianOperator::identity(2), HermitianOperator::zeros(2), HermitianOperator::zeros(2)])
            .unwrap();
        assert!(det.is_projective(1e-10));
    }

    #[test]
    fn sufficient_condition_examples() {
        let det = Povm::new(2, vec![HermitianOperator::identity(2), HermitianOperator::zeros(2)]).unwrap();
        assert!(det.sufficient_simulable());
        assert!(!tetrahedral().sufficient_simulable());
        assert!(tetrahedral().depolarize(1.0 / 3.0).unwrap().sufficient_simulable());
        assert!(!tetrahedral().depolarize(0.34).unwrap().sufficient_simulable());
    }
}
