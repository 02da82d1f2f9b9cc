use crate::error::{Error, Result};
use crate::hermlin::HermitianOperator;
use crate::tol::Tolerances;

use super::{Povm, PostProcessing};

/// Executable simulation certificate: pick member `k` with probability
/// `weights[k]`, perform that projective measurement, then apply `post`.
#[derive(Debug, Clone)]
pub struct SimulationStrategy {
    weights: Vec<f64>,
    members: Vec<Povm>,
    post: Option<PostProcessing>,
}

impl SimulationStrategy {
    pub fn new(weights: Vec<f64>, members: Vec<Povm>, post: Option<PostProcessing>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.len() != members.len() || weights.is_empty() || weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidWeights { sum });
        }
        let (dim, n) = (members[0].dim(), members[0].num_outcomes());
        if members.iter().any(|m| m.dim() != dim || m.num_outcomes() != n) {
            return Err(Error::DimensionMismatch("strategy members must share dimension and outcome count".into()));
        }
        let tol = Tolerances::default().projector;
        if let Some(index) = members.iter().position(|m| !m.is_projective(tol)) {
            return Err(Error::NotProjective { index });
        }
        if let Some(q) = &post {
            if q.inputs() != n {
                return Err(Error::DimensionMismatch("post-processing does not match member outcomes".into()));
            }
        }
        Ok(Self { weights, members, post })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn members(&self) -> &[Povm] {
        &self.members
    }

    pub fn post(&self) -> Option<&PostProcessing> {
        self.post.as_ref()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    /// The realized POVM `Q(sum_k p_k P_k)`.
    pub fn apply(&self) -> Povm {
        let pairs: Vec<(f64, Povm)> = self.weights.iter().copied().zip(self.members.iter().cloned()).collect();
        let mixed = mix_unnormalized(&pairs);
        match &self.post {
            Some(q) => mixed.post_process(q).expect("shape checked at construction"),
            None => mixed,
        }
    }

    /// Strategy realizing `Phi_s` of the realized POVM: each member `P` is
    /// kept with weight `s` and replaced with weight `1 - s` by the trivial
    /// measurement answering `i` with probability `tr(P_i)/d`.
    pub fn depolarize(&self, s: f64) -> Result<SimulationStrategy> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfRange(format!("visibility {s} outside [0, 1]")));
        }
        let dim = self.dim();
        let n = self.members[0].num_outcomes();
        let mut weights = Vec::new();
        let mut members = Vec::new();
        let mut trivial = vec![0.0; n];
        for (w, m) in self.weights.iter().zip(&self.members) {
            weights.push(w * s);
            members.push(m.clone());
            for (acc, e) in trivial.iter_mut().zip(m.effects()) {
                *acc += w * (1.0 - s) * e.trace() / dim as f64;
            }
        }
        for (i, w) in trivial.into_iter().enumerate() {
            if w > 0.0 {
                weights.push(w);
                members.push(deterministic(dim, n, i));
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { weights, members, post: self.post.clone() }.simplified(0.0))
    }

    /// Merges members that agree within `1e-9` and drops members whose weight
    /// is at most `prune`, then renormalizes.
    pub fn simplified(self, prune: f64) -> SimulationStrategy {
        let mut weights: Vec<f64> = Vec::new();
        let mut members: Vec<Povm> = Vec::new();
        for (w, m) in self.weights.into_iter().zip(self.members) {
            if let Some(k) = members.iter().position(|x| x.distance(&m) <= 1e-9) {
                weights[k] += w;
            } else {
                weights.push(w);
                members.push(m);
            }
        }
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > prune).collect();
        let total: f64 = keep.iter().map(|&k| weights[k]).sum();
        let weights = keep.iter().map(|&k| weights[k] / total).collect();
        let members = keep.iter().map(|&k| members[k].clone()).collect();
        SimulationStrategy { weights, members, post: self.post }
    }
}

/// The measurement that always answers `i`.
pub(crate) fn deterministic(dim: usize, n: usize, i: usize) -> Povm {
    let mut effects = vec![HermitianOperator::zeros(dim); n];
    effects[i] = HermitianOperator::identity(dim);
    Povm::new_unchecked(dim, effects)
}

fn mix_unnormalized(members: &[(f64, Povm)]) -> Povm {
    let first = &members[0].1;
    let mut effects = vec![HermitianOperator::zeros(first.dim()); first.num_outcomes()];
    for (w, m) in members {
        for (acc, e) in effects.iter_mut().zip(m.effects()) {
            *acc = acc.axpy(*w, e);
        }
    }
    Povm::new_unchecked(first.dim(), effects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::tetrahedral;

    #[test]
    fn rejects_non_projective_member() {
        let err = SimulationStrategy::new(vec![1.0], vec![tetrahedral()], None).unwrap_err();
        assert!(matches!(err, Error::NotProjective { index: 0 }));
    }

    #[test]
    fn depolarized_strategy_realizes_depolarized_povm() {
        let s = crate::povm::protocol_tetra_optimal();
        let target = s.apply().depolarize(0.6).unwrap();
        let d = s.depolarize(0.6).unwrap();
        assert!(d.apply().distance(&target) < 1e-12);
        assert!(d.members().iter().all(|m| m.is_projective(1e-10)));
    }
}
