//! Seeded random generators for operators, states and POVMs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hermlin::{eig_hermitian, ComplexMatrix, ComplexVector, HermitianOperator};
use crate::povm::Povm;
use crate::C64;

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut impl Rng) -> C64 {
    let re: f64 = r.sample(StandardNormal);
    let im: f64 = r.sample(StandardNormal);
    C64::new(re, im) / std::f64::consts::SQRT_2
}

/// `rows x cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(r: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(r))
}

pub fn random_hermitian(r: &mut impl Rng, d: usize) -> HermitianOperator {
    HermitianOperator::symmetrized(ginibre(r, d, d))
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase of `R`'s
/// diagonal absorbed).
pub fn random_unitary(r: &mut impl Rng, d: usize) -> ComplexMatrix {
    let g = ginibre(r, d, d);
    let qr = g.qr();
    let (mut q, rr) = qr.unpack();
    for k in 0..d {
        let z = rr[(k, k)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        let scaled = q.column(k) * phase;
        q.set_column(k, &scaled);
    }
    q
}

pub fn random_pure_state(r: &mut impl Rng, d: usize) -> ComplexVector {
    let v = ginibre(r, d, 1).column(0).into_owned();
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Hilbert-Schmidt random density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density_matrix(r: &mut impl Rng, d: usize) -> HermitianOperator {
    let g = ginibre(r, d, d);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    HermitianOperator::symmetrized(m / C64::new(tr, 0.0))
}

/// `S^{-1/2}` for a positive definite operator.
pub(crate) fn inverse_sqrt(s: &HermitianOperator) -> HermitianOperator {
    eig_hermitian(s).map(|l| 1.0 / l.sqrt())
}

/// Normalizes positive operators `A_i` into a POVM `S^{-1/2} A_i S^{-1/2}`
/// with `S = sum_i A_i`.
pub(crate) fn normalize_positive(dim: usize, parts: Vec<HermitianOperator>) -> Povm {
    let s = parts.iter().fold(HermitianOperator::zeros(dim), |acc, a| acc.add(a));
    let w = inverse_sqrt(&s);
    let effects = parts.iter().map(|a| a.conjugate_by(w.matrix())).collect();
    Povm::new_unchecked(dim, effects)
}

/// Random POVM with `n` effects: `M_i = S^{-1/2} G_i G_i^dagger S^{-1/2}`
/// where each `G_i` is a `d x d` Ginibre matrix.
pub fn random_povm(r: &mut impl Rng, d: usize, n: usize) -> Povm {
    random_povm_with_rank(r, d, n, d)
}

/// Same construction with `d x k` Ginibre factors, so every effect has rank
/// at most `k`.
pub fn random_povm_with_rank(r: &mut impl Rng, d: usize, n: usize, k: usize) -> Povm {
    let parts = (0..n)
        .map(|_| {
            let g = ginibre(r, d, k);
            HermitianOperator::symmetrized(&g * g.adjoint())
        })
        .collect();
    normalize_positive(d, parts)
}

pub fn random_rank_one_povm(r: &mut impl Rng, d: usize, n: usize) -> Povm {
    random_povm_with_rank(r, d, n, 1)
}

/// Rank-one projective measurement in a Haar-random basis.
pub fn random_basis_measurement(r: &mut impl Rng, d: usize) -> Povm {
    let u = random_unitary(r, d);
    let effects = (0..d).map(|k| HermitianOperator::outer(&u.column(k).into_owned())).collect();
    Povm::new_unchecked(d, effects)
}

/// Random element of the trace-one qutrit set: a random convex mixture of
/// `members` random rank-one projective measurements.
pub fn random_trace_one_qutrit(r: &mut impl Rng, members: usize) -> Povm {
    let mut weights: Vec<f64> = (0..members).map(|_| r.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut effects = vec![HermitianOperator::zeros(3); 3];
    for w in weights {
        let pm = random_basis_measurement(r, 3);
        for (e, p) in effects.iter_mut().zip(pm.effects()) {
            *e = e.axpy(w, p);
        }
    }
    Povm::new_unchecked(3, effects)
}
