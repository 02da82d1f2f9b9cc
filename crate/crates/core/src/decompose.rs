//! Extremal decompositions.
//!
//! A POVM is extremal exactly when it admits no perturbation `X` with
//! `sum_i X_i = 0` and `supp X_i` inside `supp M_i`. When one exists, moving
//! along `+X` and `-X` until an effect hits the PSD boundary splits `M` into
//! two POVMs of strictly smaller total rank.

use crate::error::{Error, Result};
use crate::hermlin::{
    complete_to_unitary, eig_hermitian, hermitian_basis, hermitian_coords, traceless_basis, ComplexMatrix,
    ComplexVector, HermitianOperator,
};
use crate::povm::Povm;
use crate::tol::Tolerances;
use crate::C64;

/// Direction `X` with `sum_i X_i = 0` and each `X_i` supported on `supp M_i`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub operators: Vec<HermitianOperator>,
}

impl Perturbation {
    /// Largest violation of the defining constraints for `m`.
    pub fn defect(&self, m: &Povm) -> f64 {
        let d = m.dim();
        let sum = self.operators.iter().fold(HermitianOperator::zeros(d), |a, x| a.add(x));
        let mut worst = sum.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, e) in self.operators.iter().zip(m.effects()) {
            let p = eig_hermitian(e).support(cutoff());
            let outside = x.matrix() - &p * p.adjoint() * x.matrix();
            worst = worst.max(outside.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }
}

/// Numerical ranks of the effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector(pub Vec<usize>);

impl RankVector {
    pub fn of(m: &Povm) -> Self {
        RankVector(m.ranks(cutoff()))
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

fn cutoff() -> f64 {
    Tolerances::default().rank_cutoff
}

/// Null-space search for a perturbation. With `trace_preserving` every `X_i`
/// is also traceless. Returns `None` when the constraint space is trivial.
pub fn find_perturbation(m: &Povm, trace_preserving: bool) -> Option<Perturbation> {
    let d = m.dim();
    let supports: Vec<ComplexMatrix> = m.effects().iter().map(|e| eig_hermitian(e).support(cutoff())).collect();
    // columns: per effect, coordinates of K_i in the (traceless) basis of its support
    let mut columns: Vec<(usize, ComplexMatrix)> = Vec::new();
    for (i, v) in supports.iter().enumerate() {
        let r = v.ncols();
        if r == 0 {
            continue;
        }
        let basis = if trace_preserving { traceless_basis(r) } else { hermitian_basis(r) };
        for b in basis {
            columns.push((i, v * b * v.adjoint()));
        }
    }
    let cols = columns.len();
    if cols == 0 {
        return None;
    }
    let rows = d * d;
    let mut c = nalgebra::DMatrix::<f64>::zeros(rows.max(cols), cols);
    for (k, (_, x)) in columns.iter().enumerate() {
        for (r, v) in hermitian_coords(x).into_iter().enumerate() {
            c[(r, k)] = v;
        }
    }
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max().max(1.0);
    let k = (0..cols).filter(|&k| svd.singular_values[k] <= 1e-9 * smax).min_by(|&a, &b| {
        svd.singular_values[a].total_cmp(&svd.singular_values[b])
    })?;
    let coef = vt.row(k);
    let mut ops = vec![ComplexMatrix::zeros(d, d); m.num_outcomes()];
    for (j, (i, x)) in columns.iter().enumerate() {
        ops[*i] += x * C64::from(coef[j]);
    }
    Some(Perturbation { operators: ops.into_iter().map(HermitianOperator::symmetrized).collect() })
}

/// Largest `t >= 0` with `E + t X >= 0`, restricted to the support of `E`
/// (`X` is assumed supported there). Infinite when `X >= 0` on the support.
fn boundary_step(e: &HermitianOperator, x: &HermitianOperator) -> f64 {
    let eig = eig_hermitian(e);
    let r = eig.rank(cutoff());
    if r == 0 {
        return f64::INFINITY;
    }
    let v = eig.eigenvectors.columns(0, r).into_owned();
    let mut k = v.adjoint() * x.matrix() * &v;
    for a in 0..r {
        for b in 0..r {
            k[(a, b)] /= (eig.eigenvalues[a] * eig.eigenvalues[b]).sqrt();
        }
    }
    let worst = -HermitianOperator::symmetrized(k).min_eigenvalue();
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Zeroes eigenvalues below the rank cutoff (and clips tiny negative ones).
fn snap(e: &HermitianOperator) -> HermitianOperator {
    let c = cutoff();
    eig_hermitian(e).map(|l| if l < c { 0.0 } else { l })
}

fn snapped(dim: usize, effects: Vec<HermitianOperator>) -> Povm {
    Povm::new_unchecked(dim, effects.iter().map(snap).collect())
}

fn split(m: &Povm, x: &Perturbation) -> Option<[(f64, Povm); 2]> {
    let step = |sign: f64| {
        m.effects()
            .iter()
            .zip(&x.operators)
            .map(|(e, xi)| boundary_step(e, &xi.scale(sign)))
            .fold(f64::INFINITY, f64::min)
    };
    let (tp, tm) = (step(1.0), step(-1.0));
    if !(tp.is_finite() && tm.is_finite()) {
        return None;
    }
    let shift = |t: f64| {
        let eff = m.effects().iter().zip(&x.operators).map(|(e, xi)| e.axpy(t, xi)).collect();
        snapped(m.dim(), eff)
    };
    Some([(tm / (tp + tm), shift(tp)), (tp / (tp + tm), shift(-tm))])
}

/// Splits `M` into a convex combination of extremal POVMs.
pub fn decompose_extremal(m: &Povm) -> Result<Vec<(f64, Povm)>> {
    let bound = m.num_outcomes() * m.dim() + 1;
    let mut out = Vec::new();
    let mut stack = vec![(1.0, m.clone(), 0usize)];
    while let Some((w, cur, depth)) = stack.pop() {
        if depth > bound {
            return Err(Error::DepthExceeded(bound));
        }
        let Some(x) = find_perturbation(&cur, false) else {
            out.push((w, cur));
            continue;
        };
        let Some(halves) = split(&cur, &x) else {
            out.push((w, cur));
            continue;
        };
        let before = RankVector::of(&cur).total();
        for (wk, next) in halves {
            debug_assert!(RankVector::of(&next).total() < before);
            if w * wk > 1e-15 {
                stack.push((w * wk, next, depth + 1));
            }
        }
    }
    out.reverse();
    check_reconstruction(m, &out, 1e-8)?;
    Ok(out)
}

fn check_reconstruction(m: &Povm, parts: &[(f64, Povm)], tol: f64) -> Result<()> {
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let mut effects = vec![HermitianOperator::zeros(m.dim()); m.num_outcomes()];
    for (w, p) in parts {
        for (acc, e) in effects.iter_mut().zip(p.effects()) {
            *acc = acc.axpy(*w, e);
        }
    }
    let err = effects.iter().zip(m.effects()).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
    if err > tol || (total - 1.0).abs() > tol {
        return Err(Error::CertificateInconsistent(format!(
            "decomposition reconstructs the input only to {err:.3e} (weights sum to {total})"
        )));
    }
    Ok(())
}

fn projective(vectors: &[ComplexVector]) -> Povm {
    let d = vectors[0].len();
    Povm::new_unchecked(d, vectors.iter().map(HermitianOperator::outer).collect())
}

/// Third column completing two orthonormal vectors of `C^3`.
fn orthogonal_complement(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let cols = ComplexMatrix::from_columns(&[a.clone(), b.clone()]);
    complete_to_unitary(&cols).expect("orthonormal pair").column(2).into_owned()
}

fn normalize(v: ComplexVector) -> ComplexVector {
    let n = v.norm();
    v / C64::from(n)
}

/// Gram-Schmidt of `b` against the unit vector `a`.
fn orthogonalize(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    normalize(b - a * a.dotc(b))
}

/// `max { t : M_i - t |psi_i><psi_i| >= 0 }` for `psi_i` in `supp M_i`:
/// `1 / <psi_i| M_i^+ |psi_i>`.
fn subtraction_step(e: &HermitianOperator, psi: &ComplexVector) -> f64 {
    let c = cutoff();
    let pinv = eig_hermitian(e).map(|l| if l > c { 1.0 / l } else { 0.0 });
    let q = psi.dotc(&(pinv.matrix() * psi)).re;
    1.0 / q
}

/// Decomposes a trace-one three-outcome qutrit POVM into rank-one projective
/// measurements by repeated rank reduction.
pub fn decompose_trace_one_qutrit(m: &Povm) -> Result<Vec<(f64, Povm)>> {
    if m.dim() != 3 || m.num_outcomes() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "expected 3 outcomes in dimension 3, got {} in dimension {}",
            m.num_outcomes(),
            m.dim()
        )));
    }
    for (index, e) in m.effects().iter().enumerate() {
        let trace = e.trace();
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::NotTraceOne { index, trace });
        }
    }
    let mut out: Vec<(f64, Povm)> = Vec::new();
    let mut stack = vec![(1.0, snapped(3, m.effects().to_vec()), 0usize)];
    while let Some((w, cur, depth)) = stack.pop() {
        if depth > 10 {
            return Err(Error::DepthExceeded(10));
        }
        let ranks = RankVector::of(&cur);
        for (wk, next) in reduce_trace_one(&cur, &ranks)? {
            if w * wk <= 1e-15 {
                continue;
            }
            match next {
                Step::Done(p) => out.push((w * wk, p)),
                Step::Continue(p) => {
                    debug_assert!(RankVector::of(&p).total() < ranks.total());
                    stack.push((w * wk, p, depth + 1));
                }
            }
        }
    }
    out.reverse();
    check_reconstruction(m, &out, 1e-7)?;
    Ok(out)
}

enum Step {
    Done(Povm),
    Continue(Povm),
}

/// Remainder `(M - t P) / (1 - t)` with trace exactly one per effect.
fn remainder(m: &Povm, p: &Povm, t: f64) -> Povm {
    let effects = m
        .effects()
        .iter()
        .zip(p.effects())
        .map(|(e, q)| {
            let r = snap(&e.axpy(-t, q).scale(1.0 / (1.0 - t)));
            r.axpy((1.0 - r.trace()) / 3.0, &HermitianOperator::identity(3))
        })
        .collect();
    snapped(3, effects)
}

fn reduce_trace_one(m: &Povm, ranks: &RankVector) -> Result<Vec<(f64, Step)>> {
    let r = &ranks.0;
    let eigs: Vec<_> = m.effects().iter().map(eig_hermitian).collect();
    if let Some(a) = r.iter().position(|&k| k == 1) {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        return match (r[b], r[c]) {
            (1, 1) => {
                let vs = [eigs[0].vector(0), eigs[1].vector(0), eigs[2].vector(0)];
                Ok(vec![(1.0, Step::Done(orthonormal_projective(&vs, a)))])
            }
            (2, 2) => {
                // the other two effects are a qubit measurement on the complement
                let psi = eigs[a].vector(0);
                let e1 = orthogonalize(&psi, &eigs[b].vector(0));
                let e2 = orthogonal_complement(&psi, &e1);
                let l1 = eigs[b].eigenvalues[0].clamp(0.0, 1.0);
                let mut first = vec![psi.clone(); 3];
                first[b] = e1.clone();
                first[c] = e2.clone();
                let mut second = vec![psi; 3];
                second[b] = e2;
                second[c] = e1;
                Ok(vec![(l1, Step::Done(projective(&first))), (1.0 - l1, Step::Done(projective(&second)))])
            }
            _ => Err(Error::ImpossibleRankClass(r.clone())),
        };
    }
    if r.contains(&0) {
        return Err(Error::ImpossibleRankClass(r.clone()));
    }
    let twos: Vec<usize> = (0..3).filter(|&i| r[i] == 2).collect();
    let psi: Vec<ComplexVector> = match twos.len() {
        0 => (0..3).map(|k| eigs[0].vector(k)).collect(),
        1 => {
            let j = twos[0];
            let top = eigs[j].vector(0);
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let other = orthogonalize(&top, &eigs[j].vector(2));
            let third = orthogonal_complement(&top, &other);
            let mut v = vec![top.clone(); 3];
            v[a] = other;
            v[b] = third;
            v
        }
        2 => {
            let (j, k) = (twos[0], twos[1]);
            let i = 3 - j - k;
            let kj = eigs[j].vector(2);
            let kk = eigs[k].vector(2);
            let overlap = kj.dotc(&kk).norm();
            let phi_k = if overlap > 1.0 - 1e-10 {
                eigs[j].vector(0)
            } else {
                orthogonal_complement(&kj, &orthogonalize(&kj, &kk))
            };
            let phi_j = orthogonal_complement(&orthogonalize(&phi_k, &kj), &phi_k);
            let phi_i = orthogonal_complement(&phi_k, &phi_j);
            let mut v = vec![phi_i.clone(); 3];
            v[j] = phi_j;
            v[k] = phi_k;
            v[i] = phi_i;
            v
        }
        _ => {
            let x = find_perturbation(m, true).ok_or_else(|| Error::ImpossibleRankClass(r.clone()))?;
            let halves = split(m, &x).ok_or_else(|| Error::ImpossibleRankClass(r.clone()))?;
            return Ok(halves
                .into_iter()
                .map(|(w, p)| {
                    let p = retrace(p);
                    (w, classify(p))
                })
                .collect());
        }
    };
    let p = projective(&psi);
    let t = (0..3).map(|i| subtraction_step(m.effect(i), &psi[i])).fold(f64::INFINITY, f64::min).min(1.0);
    if 1.0 - t < 1e-9 {
        return Ok(vec![(1.0, Step::Done(p))]);
    }
    Ok(vec![(t, Step::Done(p)), (1.0 - t, classify(remainder(m, &projective(&psi), t)))])
}

fn retrace(p: Povm) -> Povm {
    let effects = p
        .effects()
        .iter()
        .map(|e| e.axpy((1.0 - e.trace()) / 3.0, &HermitianOperator::identity(3)))
        .collect();
    snapped(3, effects)
}

fn classify(p: Povm) -> Step {
    if p.ranks(cutoff()).iter().all(|&k| k == 1) && p.is_projective(1e-8) {
        let vs: Vec<ComplexVector> = p.effects().iter().map(|e| eig_hermitian(e).vector(0)).collect();
        Step::Done(orthonormal_projective(&vs, 0))
    } else {
        Step::Continue(p)
    }
}

/// Exactly orthonormal projective measurement from nearly orthonormal unit
/// vectors, keeping `vs[anchor]` fixed.
fn orthonormal_projective(vs: &[ComplexVector], anchor: usize) -> Povm {
    let a = normalize(vs[anchor].clone());
    let (b, c) = ((anchor + 1) % 3, (anchor + 2) % 3);
    let vb = orthogonalize(&a, &vs[b]);
    let vc = orthogonal_complement(&a, &vb);
    let mut out = vec![a.clone(); 3];
    out[b] = vb;
    out[c] = vc;
    projective(&out)
}
