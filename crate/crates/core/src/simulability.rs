//! Critical visibility programs and simulation certificates.
//!
//! `Phi_t(M)` is decomposed as a sum of sub-normalized parts `N_X`, each a
//! measurement on a subset `X` of the outcomes scaled by its weight `p_X`.
//! Two families of parts are used:
//!
//! * general parts on `m`-subsets (`sum_i [N_X]_i = p_X I`), giving the
//!   `m`-outcome visibility `t^(m)(M)`;
//! * for qutrits, three-outcome parts with `tr [N_Y]_i = p_Y`, which together
//!   with the two-outcome parts characterize projective simulability.
//!
//! The last effect of every part is eliminated through its normalization, so
//! the weights and the reconstruction constraints stay exact.

use serde::Serialize;

use crate::decompose::decompose_trace_one_qutrit;
use crate::error::{Error, Result};
use crate::hermlin::{eig_hermitian, hermitian_basis, hermitian_coords, traceless_basis, ComplexMatrix, HermitianOperator};
use crate::povm::{Povm, SimulationStrategy};
use crate::sdp::{self, SdpProblem, Sense, SolverOptions, Status};

/// Effects with every entry below this are treated as absent.
const ZERO_EFFECT: f64 = 1e-9;
/// Members of an extracted strategy lighter than this are discarded.
const PRUNE_WEIGHT: f64 = 1e-7;
/// Guard on the number of parts in one program.
const MAX_PARTS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartKind {
    /// `sum_i [N_X]_i = p_X I`, effects otherwise free.
    General,
    /// Additionally `tr [N_Y]_i = p_Y` for every outcome.
    TraceOne,
}

/// One term `N_X` of a certificate. `effects[k]` belongs to the original
/// outcome `outcomes[k]`.
#[derive(Debug, Clone)]
pub struct CertificatePart {
    pub outcomes: Vec<usize>,
    pub weight: f64,
    pub effects: Vec<HermitianOperator>,
    pub kind: PartKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub num_vars: usize,
    pub num_parts: usize,
}

#[derive(Debug, Clone)]
pub struct VisibilityResult {
    pub t_star: f64,
    pub dim: usize,
    pub num_outcomes: usize,
    /// Largest part size used.
    pub m: usize,
    pub parts: Vec<CertificatePart>,
    pub diagnostics: SolveDiagnostics,
    /// True when `t_star` only bounds `t(M)` from above (the `m`-outcome
    /// program in dimension three or more).
    pub relaxation: bool,
}

impl VisibilityResult {
    /// `sum_X N_X`, outcome by outcome.
    pub fn reconstruction(&self) -> Vec<HermitianOperator> {
        let mut out = vec![HermitianOperator::zeros(self.dim); self.num_outcomes];
        for part in &self.parts {
            for (&i, e) in part.outcomes.iter().zip(&part.effects) {
                out[i] = out[i].add(e);
            }
        }
        out
    }

    /// Largest entrywise deviation of the reconstruction from `Phi_{t*}(M)`.
    pub fn reconstruction_error(&self, m: &Povm) -> f64 {
        let target = m.depolarize_unchecked(self.t_star);
        self.reconstruction()
            .iter()
            .zip(target.effects())
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    pub fn weight_sum(&self) -> f64 {
        self.parts.iter().map(|p| p.weight).sum()
    }
}

type Term = (usize, ComplexMatrix);

struct PartVars {
    outcomes: Vec<usize>,
    kind: PartKind,
    weight: usize,
    effects: Vec<Vec<Term>>,
}

struct Builder {
    prob: SdpProblem,
    dim: usize,
    t: usize,
    parts: Vec<PartVars>,
}

impl Builder {
    fn new(dim: usize) -> Self {
        let mut prob = SdpProblem::new(0);
        let t = prob.add_var();
        prob.add_bounds(t, 0.0, 1.0);
        prob.set_objective(Sense::Maximize, &[(t, 1.0)]);
        Self { prob, dim, t, parts: Vec::new() }
    }

    fn add_part(&mut self, outcomes: Vec<usize>, kind: PartKind) {
        let d = self.dim;
        let k = outcomes.len();
        let identity = ComplexMatrix::identity(d, d);
        let basis = match kind {
            PartKind::General => hermitian_basis(d),
            PartKind::TraceOne => traceless_basis(d),
        };
        let p = self.prob.add_var();
        let mut effects: Vec<Vec<Term>> = Vec::with_capacity(k);
        let mut last: Vec<Term> = Vec::new();
        let share = match kind {
            PartKind::General => 0.0,
            PartKind::TraceOne => 1.0 / d as f64,
        };
        for _ in 0..k - 1 {
            let vars = self.prob.add_vars(basis.len());
            let mut terms: Vec<Term> = Vec::with_capacity(basis.len() + 1);
            if share > 0.0 {
                terms.push((p, &identity * crate::C64::from(share)));
            }
            for (v, b) in vars.zip(&basis) {
                terms.push((v, b.clone()));
                last.push((v, -b));
            }
            effects.push(terms);
        }
        let rest = 1.0 - share * (k - 1) as f64;
        last.insert(0, (p, &identity * crate::C64::from(rest)));
        effects.push(last);
        let zero = ComplexMatrix::zeros(d, d);
        for terms in &effects {
            self.prob.add_hermitian_lmi(&zero, terms);
        }
        self.parts.push(PartVars { outcomes, kind, weight: p, effects });
    }

    /// `sum_X [N_X]_i = t M_i + (1 - t) tr(M_i) I / d` for all but the last
    /// outcome, and `sum_X p_X = 1`.
    fn add_reconstruction(&mut self, effects: &[HermitianOperator]) {
        let d = self.dim;
        let n = effects.len();
        let dd = d * d;
        let mut forms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); (n - 1) * dd];
        for part in &self.parts {
            for (&i, terms) in part.outcomes.iter().zip(&part.effects) {
                if i + 1 == n {
                    continue;
                }
                for (v, mat) in terms {
                    for (c, a) in hermitian_coords(mat).into_iter().enumerate() {
                        if a != 0.0 {
                            forms[i * dd + c].push((*v, a));
                        }
                    }
                }
            }
        }
        for (i, e) in effects.iter().enumerate().take(n - 1) {
            let noise = HermitianOperator::identity(d).scale(e.trace() / d as f64);
            let signal = hermitian_coords(e.sub(&noise).matrix());
            let rhs = hermitian_coords(noise.matrix());
            for c in 0..dd {
                let mut form = std::mem::take(&mut forms[i * dd + c]);
                if signal[c] != 0.0 {
                    form.push((self.t, -signal[c]));
                }
                self.prob.add_equality(form, rhs[c]);
            }
        }
        let weights = self.parts.iter().map(|p| (p.weight, 1.0)).collect();
        self.prob.add_equality(weights, 1.0);
    }

    fn solve(self, effects: &[HermitianOperator], kept: &[usize], n_orig: usize, opts: &SolverOptions) -> Result<VisibilityResult> {
        let num_vars = self.prob.num_vars();
        let sol = sdp::solve(&self.prob, opts)?;
        let acceptable = sol.status == Status::Optimal
            || (sol.status == Status::NumericalTrouble && sol.primal_residual <= 1e-6 && sol.gap <= 1e-5);
        if !acceptable {
            return Err(Error::Solver(format!(
                "visibility program ended with status {:?} (primal residual {:.3e}, gap {:.3e})",
                sol.status, sol.primal_residual, sol.gap
            )));
        }
        let x = &sol.x;
        let eval = |terms: &[Term]| {
            let mut m = ComplexMatrix::zeros(self.dim, self.dim);
            for (v, mat) in terms {
                m += mat * crate::C64::from(x[*v]);
            }
            HermitianOperator::symmetrized(m)
        };
        let parts = self
            .parts
            .iter()
            .map(|p| CertificatePart {
                outcomes: p.outcomes.iter().map(|&i| kept[i]).collect(),
                weight: x[p.weight],
                effects: p.effects.iter().map(|t| eval(t)).collect(),
                kind: p.kind,
            })
            .collect::<Vec<_>>();
        let m = parts.iter().map(|p| p.outcomes.len()).max().unwrap_or(1);
        let _ = effects;
        Ok(VisibilityResult {
            t_star: x[self.t].clamp(0.0, 1.0),
            dim: self.dim,
            num_outcomes: n_orig,
            m,
            diagnostics: SolveDiagnostics {
                status: sol.status,
                iterations: sol.iterations,
                objective: sol.objective,
                dual_objective: sol.dual_objective,
                gap: sol.gap,
                primal_residual: sol.primal_residual,
                dual_residual: sol.dual_residual,
                num_vars,
                num_parts: parts.len(),
            },
            parts,
            relaxation: false,
        })
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// `t^(m)(M)`: the largest `t` such that `Phi_t(M)` is a mixture of
/// measurements with at most `m` outcomes. For qubits and `m = 2` this is the
/// critical visibility `t(M)`.
pub fn visibility_m_outcome(m: &Povm, parts: usize) -> Result<VisibilityResult> {
    visibility_m_outcome_with(m, parts, &SolverOptions::default())
}

pub fn visibility_m_outcome_with(m: &Povm, size: usize, opts: &SolverOptions) -> Result<VisibilityResult> {
    m_outcome_program(m.dim(), m.effects(), size, opts)
}

/// Same program on an arbitrary Hermitian tuple summing to the identity (the
/// effects need not be PSD; only the decomposition is constrained).
pub(crate) fn m_outcome_program(
    dim: usize,
    effects: &[HermitianOperator],
    size: usize,
    opts: &SolverOptions,
) -> Result<VisibilityResult> {
    let n = effects.len();
    if size == 0 || size > n {
        return Err(Error::OutOfRange(format!("m = {size} must lie in 1..={n}")));
    }
    let (reduced, kept) = Povm::new_unchecked(dim, effects.to_vec()).drop_zero_effects(ZERO_EFFECT);
    let nk = kept.len();
    let k = size.min(nk);
    if binomial(nk, k) > MAX_PARTS {
        return Err(Error::Unsupported(format!("C({nk}, {k}) subsets exceed the limit of {MAX_PARTS}")));
    }
    let mut b = Builder::new(dim);
    for s in subsets(nk, k) {
        b.add_part(s, PartKind::General);
    }
    b.add_reconstruction(reduced.effects());
    let mut res = b.solve(reduced.effects(), &kept, n, opts)?;
    res.relaxation = dim >= 3 && k < nk;
    Ok(res)
}

/// Decides `m`-outcome simulability (visibility at least `1 - 1e-6`) and
/// returns the certificate when it holds.
pub fn check_m_simulable(m: &Povm, size: usize) -> Result<(bool, Option<VisibilityResult>)> {
    let res = visibility_m_outcome(m, size)?;
    if res.t_star >= 1.0 - 1e-6 {
        Ok((true, Some(res)))
    } else {
        Ok((false, None))
    }
}

/// Critical visibility `t(M)` of a qutrit POVM: mixtures of two-outcome
/// measurements and trace-one three-outcome measurements.
pub fn visibility_qutrit_projective(m: &Povm) -> Result<VisibilityResult> {
    visibility_qutrit_projective_with(m, &SolverOptions::default())
}

pub fn visibility_qutrit_projective_with(m: &Povm, opts: &SolverOptions) -> Result<VisibilityResult> {
    if m.dim() != 3 {
        return Err(Error::DimensionMismatch(format!("qutrit program needs dimension 3, got {}", m.dim())));
    }
    qutrit_program(m.effects(), opts)
}

/// Qutrit program on a Hermitian tuple summing to the identity.
pub(crate) fn qutrit_program(effects: &[HermitianOperator], opts: &SolverOptions) -> Result<VisibilityResult> {
    let n = effects.len();
    let (reduced, kept) = Povm::new_unchecked(3, effects.to_vec()).drop_zero_effects(ZERO_EFFECT);
    let nk = kept.len();
    if binomial(nk, 2) + binomial(nk, 3) > MAX_PARTS {
        return Err(Error::Unsupported(format!("{nk} outcomes exceed the qutrit program limit")));
    }
    let mut b = Builder::new(3);
    if nk == 1 {
        b.add_part(vec![0], PartKind::General);
    }
    for s in subsets(nk, 2) {
        b.add_part(s, PartKind::General);
    }
    for s in subsets(nk, 3) {
        b.add_part(s, PartKind::TraceOne);
    }
    b.add_reconstruction(reduced.effects());
    b.solve(reduced.effects(), &kept, n, opts)
}

/// Turns a visibility certificate into projective measurements: dichotomic
/// parts by spectral thresholding, trace-one qutrit parts through
/// [`decompose_trace_one_qutrit`], projective parts as they are.
pub fn strategy_from_certificate(m: &Povm, cert: &VisibilityResult) -> Result<SimulationStrategy> {
    if cert.num_outcomes != m.num_outcomes() || cert.dim != m.dim() {
        return Err(Error::CertificateInconsistent("certificate shape differs from the POVM".into()));
    }
    let err = cert.reconstruction_error(m);
    if err > 1e-6 {
        return Err(Error::CertificateInconsistent(format!("reconstruction deviates by {err:.3e}")));
    }
    let (dim, n) = (m.dim(), m.num_outcomes());
    if cert.t_star >= 1.0 - 1e-9 && m.is_projective(1e-8) {
        return SimulationStrategy::new(vec![1.0], vec![m.clone()], None);
    }
    let mut weights = Vec::new();
    let mut members = Vec::new();
    for part in &cert.parts {
        if part.weight <= PRUNE_WEIGHT {
            continue;
        }
        let normalized: Vec<HermitianOperator> = part.effects.iter().map(|e| e.scale(1.0 / part.weight)).collect();
        let local = Povm::new_unchecked(dim, normalized);
        let pieces: Vec<(f64, Povm)> = if local.is_projective(1e-8) {
            vec![(1.0, local)]
        } else if part.outcomes.len() == 2 {
            threshold_dichotomic(&local)
        } else if part.kind == PartKind::TraceOne {
            let traced = trace_normalized(&local)?;
            decompose_trace_one_qutrit(&traced)?
        } else {
            return Err(Error::Unsupported(format!(
                "no projective expansion for a general {}-outcome part",
                part.outcomes.len()
            )));
        };
        for (w, piece) in pieces {
            if part.weight * w > PRUNE_WEIGHT {
                weights.push(part.weight * w);
                members.push(piece.embed(&part.outcomes, n));
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::CertificateInconsistent("certificate has no weight".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(SimulationStrategy::new(weights, members, None)?.simplified(0.0))
}

/// Re-symmetrizes a trace-one part so each effect has trace exactly one.
fn trace_normalized(p: &Povm) -> Result<Povm> {
    let d = p.dim() as f64;
    let mut effects: Vec<HermitianOperator> = p
        .effects()
        .iter()
        .map(|e| e.axpy((1.0 - e.trace()) / d, &HermitianOperator::identity(p.dim())))
        .collect();
    let last = effects.len() - 1;
    let others = effects[..last].iter().fold(HermitianOperator::zeros(p.dim()), |a, e| a.add(e));
    effects[last] = HermitianOperator::identity(p.dim()).sub(&others);
    Ok(Povm::new_unchecked(p.dim(), effects))
}

/// `(E, I - E) = sum_k (l_k - l_{k+1}) (Q_k, I - Q_k) + (1 - l_1) (0, I)` with
/// `Q_k` the projector on the top `k` eigenvectors of `E`.
pub fn threshold_dichotomic(p: &Povm) -> Vec<(f64, Povm)> {
    let d = p.dim();
    let eig = eig_hermitian(p.effect(0));
    let l: Vec<f64> = eig.eigenvalues.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let id = HermitianOperator::identity(d);
    let mut out = Vec::new();
    let mut q = HermitianOperator::zeros(d);
    if 1.0 - l[0] > 0.0 {
        out.push((1.0 - l[0], Povm::new_unchecked(d, vec![q.clone(), id.clone()])));
    }
    for k in 0..d {
        q = q.add(&HermitianOperator::outer(&eig.vector(k)));
        let next = if k + 1 < d { l[k + 1] } else { 0.0 };
        let w = l[k] - next;
        if w > 0.0 {
            out.push((w, Povm::new_unchecked(d, vec![q.clone(), id.sub(&q)])));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{modified_trine, tetrahedral, trine};
    use crate::random::{random_basis_measurement, rng};

    fn pauli_z_measurement() -> Povm {
        let p0 = HermitianOperator::from_bloch(0.5, 0.0, 0.0, 0.5);
        let p1 = HermitianOperator::from_bloch(0.5, 0.0, 0.0, -0.5);
        Povm::new(2, vec![p0, p1]).unwrap()
    }

    #[test]
    fn tetra_visibility() {
        let r = visibility_m_outcome(&tetrahedral(), 2).unwrap();
        assert!((r.t_star - (2.0f64 / 3.0).sqrt()).abs() < 1e-5, "{}", r.t_star);
        assert!(r.reconstruction_error(&tetrahedral()) < 1e-7);
        assert!((r.weight_sum() - 1.0).abs() < 1e-7);
        let s = strategy_from_certificate(&tetrahedral(), &r).unwrap();
        assert!(s.len() <= 6, "{} members", s.len());
        assert!(s.apply().distance(&tetrahedral().depolarize_unchecked(r.t_star)) < 1e-6);
    }

    #[test]
    fn projective_inputs_have_unit_visibility() {
        let r = visibility_m_outcome(&pauli_z_measurement(), 2).unwrap();
        assert!(r.t_star > 1.0 - 1e-6);
        let s = strategy_from_certificate(&pauli_z_measurement(), &r).unwrap();
        assert_eq!(s.len(), 1);
        let b = random_basis_measurement(&mut rng(4), 3);
        let r = visibility_qutrit_projective(&b).unwrap();
        assert!(r.t_star > 1.0 - 1e-6);
    }

    #[test]
    fn m_simulability_checks() {
        let half = HermitianOperator::identity(2).scale(0.5);
        let triv = Povm::new(2, vec![half.clone(), half]).unwrap();
        assert!(check_m_simulable(&triv, 2).unwrap().0);
        assert!(!check_m_simulable(&tetrahedral(), 2).unwrap().0);
        let noisy = tetrahedral().depolarize(0.8).unwrap();
        assert!(check_m_simulable(&noisy, 2).unwrap().0);
    }

    #[test]
    fn trine_is_below_one() {
        let r = visibility_m_outcome(&trine(), 2).unwrap();
        assert!(r.t_star < 1.0 - 1e-3 && r.t_star > 0.5);
        let s = strategy_from_certificate(&trine(), &r).unwrap();
        assert!(s.apply().distance(&trine().depolarize_unchecked(r.t_star)) < 1e-6);
    }

    #[test]
    fn modified_trine_is_not_simulable() {
        let r = visibility_qutrit_projective(&modified_trine()).unwrap();
        assert!(r.t_star < 1.0 - 1e-3, "{}", r.t_star);
        assert!(!r.relaxation);
        let s = strategy_from_certificate(&modified_trine(), &r).unwrap();
        assert!(s.apply().distance(&modified_trine().depolarize_unchecked(r.t_star)) < 1e-6);
    }

    #[test]
    fn thresholding_example() {
        let e = HermitianOperator::from_real(&[&[0.7, 0.0], &[0.0, 0.3]]).unwrap();
        let p = Povm::new(2, vec![e.clone(), HermitianOperator::identity(2).sub(&e)]).unwrap();
        let pieces = threshold_dichotomic(&p);
        let w: Vec<f64> = pieces.iter().map(|(w, _)| *w).collect();
        assert_eq!(pieces.len(), 3);
        for (got, want) in w.iter().zip([0.3, 0.4, 0.3]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(Povm::mix(&pieces).unwrap().distance(&p) < 1e-12);
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(9, 3).len(), 84);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(2, 3).is_empty());
    }
}
