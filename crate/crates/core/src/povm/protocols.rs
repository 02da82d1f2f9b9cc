//! Closed-form projective simulation protocols.

use crate::error::{Error, Result};
use crate::hermlin::{eig_hermitian, HermitianOperator};
use crate::tol::Tolerances;

use super::{tetra_bloch_vectors, Povm, PostProcessing, SimulationStrategy};

/// Splits rank-one effects as `M_i = alpha_i Pi_i`.
fn rank_one_parts(m: &Povm) -> Result<Vec<(f64, HermitianOperator)>> {
    let cutoff = Tolerances::default().rank_cutoff;
    m.effects()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let eig = eig_hermitian(e);
            let rank = eig.rank(cutoff);
            if rank > 1 {
                return Err(Error::EffectNotRankOne { index: i, rank });
            }
            let alpha = e.trace();
            if rank == 0 || alpha <= cutoff {
                Ok((0.0, HermitianOperator::zeros(m.dim())))
            } else {
                Ok((alpha, HermitianOperator::outer(&eig.vector(0))))
            }
        })
        .collect()
}

/// Dichotomic members `(Pi_i, I - Pi_i)` placed on outcomes `2i, 2i+1` of a
/// `2n`-outcome space.
fn dichotomic_members(parts: &[(f64, HermitianOperator)], dim: usize) -> (Vec<f64>, Vec<Povm>, Vec<usize>) {
    let n = parts.len();
    let id = HermitianOperator::identity(dim);
    let mut weights = Vec::new();
    let mut members = Vec::new();
    let mut used = Vec::new();
    for (i, (alpha, pi)) in parts.iter().enumerate() {
        if *alpha == 0.0 {
            continue;
        }
        let pm = Povm::new_unchecked(dim, vec![pi.clone(), id.sub(pi)]);
        weights.push(alpha / dim as f64);
        members.push(pm.embed(&[2 * i, 2 * i + 1], 2 * n));
        used.push(i);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (weights, members, used)
}

/// Realizes `Phi_{1/d}(M)` for a POVM with rank-one effects: pick `i` with
/// probability `alpha_i / d`, measure `(Pi_i, I - Pi_i)`, answer `i` on the
/// first outcome and otherwise answer `j` with probability `alpha_j / d`.
pub fn protocol_inverse_d(m: &Povm) -> Result<SimulationStrategy> {
    let parts = rank_one_parts(m)?;
    let d = m.dim() as f64;
    let n = parts.len();
    let (weights, members, _) = dichotomic_members(&parts, m.dim());
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut hit = vec![0.0; n];
        hit[i] = 1.0;
        rows.push(hit);
        rows.push(parts.iter().map(|(a, _)| a / d).collect());
    }
    let post = PostProcessing::new(normalize_rows(rows))?;
    SimulationStrategy::new(weights, members, Some(post))
}

/// Variant for `d^2` rank-one effects of trace `1/d` (SIC-type): on the
/// second outcome answer a uniformly random `j != i`. Realizes
/// `Phi_{d/(d^2-1)}(M)`.
pub fn protocol_inverse_d_uniform(m: &Povm) -> Result<SimulationStrategy> {
    let d = m.dim();
    let n = m.num_outcomes();
    if n != d * d {
        return Err(Error::DimensionMismatch(format!("expected {} outcomes, got {n}", d * d)));
    }
    for (index, e) in m.effects().iter().enumerate() {
        let trace = e.trace();
        if (trace - 1.0 / d as f64).abs() > 1e-9 {
            return Err(Error::OutOfRange(format!("effect {index} has trace {trace}, expected 1/{d}")));
        }
    }
    let parts = rank_one_parts(m)?;
    let (weights, members, _) = dichotomic_members(&parts, d);
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut hit = vec![0.0; n];
        hit[i] = 1.0;
        rows.push(hit);
        let mut miss = vec![1.0 / (n - 1) as f64; n];
        miss[i] = 0.0;
        rows.push(miss);
    }
    let post = PostProcessing::new(normalize_rows(rows))?;
    SimulationStrategy::new(weights, members, Some(post))
}

fn normalize_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|p| p / s).collect()
        })
        .collect()
}

/// Six dichotomic projective measurements along the bisectrices of the
/// tetrahedron, uniform weights. Realizes `Phi_{sqrt(2/3)}` of the
/// tetrahedral POVM.
pub fn protocol_tetra_optimal() -> SimulationStrategy {
    let n = tetra_bloch_vectors();
    let mut members = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            let diff: Vec<f64> = (0..3).map(|k| n[i][k] - n[j][k]).collect();
            let len = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: Vec<f64> = diff.iter().map(|x| x / len).collect();
            let plus = HermitianOperator::from_bloch(0.5, 0.5 * u[0], 0.5 * u[1], 0.5 * u[2]);
            let minus = HermitianOperator::from_bloch(0.5, -0.5 * u[0], -0.5 * u[1], -0.5 * u[2]);
            members.push(Povm::new_unchecked(2, vec![plus, minus]).embed(&[i, j], 4));
        }
    }
    SimulationStrategy::new(vec![1.0 / 6.0; 6], members, None).expect("bisectrix projectors are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{covariant, tetrahedral};
    use crate::random::{random_pure_state, random_rank_one_povm, rng};

    #[test]
    fn tetra_optimal_realizes_critical_depolarization() {
        let s = protocol_tetra_optimal();
        assert_eq!(s.len(), 6);
        assert!(s.members().iter().all(|m| m.is_projective(1e-12)));
        let target = tetrahedral().depolarize((2.0f64 / 3.0).sqrt()).unwrap();
        assert!(s.apply().distance(&target) < 1e-12);
    }

    #[test]
    fn bisectrix_bloch_vectors() {
        // With the tetrahedron inscribed in the sphere of radius 1/2 the
        // bisectrix Bloch vector is sqrt(3/2) (n_i - n_j).
        let s = protocol_tetra_optimal();
        let n = tetra_bloch_vectors();
        let mut k = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                let [a, x, y, z] = s.members()[k].effect(i).bloch();
                let want: Vec<f64> = (0..3).map(|c| 1.5f64.sqrt() * 0.5 * (n[i][c] - n[j][c])).collect();
                assert!((a - 0.5).abs() < 1e-14);
                for (g, w) in [x, y, z].iter().zip(&want) {
                    assert!((2.0 * g - w).abs() < 1e-14);
                }
                k += 1;
            }
        }
    }

    #[test]
    fn inverse_d_on_tetra_and_qutrit() {
        let tetra = tetrahedral();
        let s = protocol_inverse_d(&tetra).unwrap();
        assert!(s.apply().distance(&tetra.depolarize(0.5).unwrap()) < 1e-12);

        let seed = HermitianOperator::outer(&random_pure_state(&mut rng(2), 3)).scale(1.0 / 3.0);
        let cov = covariant(&seed).unwrap();
        let s = protocol_inverse_d(&cov).unwrap();
        assert!(s.apply().distance(&cov.depolarize(1.0 / 3.0).unwrap()) < 1e-12);

        let s = protocol_inverse_d_uniform(&tetra).unwrap();
        assert!(s.apply().distance(&tetra.depolarize(2.0 / 3.0).unwrap()) < 1e-12);
    }

    #[test]
    fn inverse_d_random() {
        let mut r = rng(9);
        for d in 2..=4 {
            let m = random_rank_one_povm(&mut r, d, d + 2);
            let s = protocol_inverse_d(&m).unwrap();
            assert!(s.apply().distance(&m.depolarize(1.0 / d as f64).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn inverse_d_rejects_higher_rank() {
        let m = crate::povm::modified_trine();
        assert!(matches!(protocol_inverse_d(&m), Err(Error::EffectNotRankOne { index: 2, rank: 2 })));
    }
}
