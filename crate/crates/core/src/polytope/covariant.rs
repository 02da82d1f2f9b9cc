use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::qubit::{scan_with, ScanResult};
use super::{enumerate_vertices, HRep};
use crate::error::{Error, Result};
use crate::hermlin::{traceless_basis, ComplexVector, HermitianOperator};
use crate::povm::{covariant, displacement, Povm};
use crate::random::{random_pure_state, rng};
use crate::sdp::SolverOptions;
use crate::simulability::{m_outcome_program, qutrit_program};
use crate::C64;

/// Seed `I/9 + sum_k c_k T_k` over the traceless qutrit basis.
pub fn covariant_seed_from_point(c: &[f64]) -> HermitianOperator {
    let basis = traceless_basis(3);
    let mut m = HermitianOperator::identity(3).scale(1.0 / 9.0).into_matrix();
    for (ck, t) in c.iter().zip(&basis) {
        m += t * C64::from(*ck);
    }
    HermitianOperator::symmetrized(m)
}

/// The twelve vectors of the four mutually unbiased qutrit bases.
fn mub_states() -> Vec<ComplexVector> {
    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let s = 1.0 / 3f64.sqrt();
    let mut out = Vec::new();
    for k in 0..3 {
        let mut v = ComplexVector::zeros(3);
        v[k] = C64::from(1.0);
        out.push(v);
    }
    for b in 0..3 {
        for k in 0..3 {
            // |m> -> w^{k m + b m^2} / sqrt 3
            out.push(ComplexVector::from_fn(3, |m, _| w.powu((k * m + b * m * m) as u32 % 3) * s));
        }
    }
    out
}

/// Outer polytope of covariant seeds: `<psi|S|psi> >= 0` for the mutually
/// unbiased basis vectors (which keep it bounded) and `random_states` random
/// pure states drawn with `seed`.
pub fn build_covariant_polytope(random_states: usize, seed: u64) -> Result<HRep> {
    let mut states = mub_states();
    let mut r = rng(seed);
    states.extend((0..random_states).map(|_| random_pure_state(&mut r, 3)));
    let basis = traceless_basis(3);
    let mut h = HRep::new(basis.len());
    for psi in &states {
        let a: Vec<f64> = basis.iter().map(|t| -(psi.adjoint() * t * psi)[(0, 0)].re).collect();
        h.add_inequality(a, 1.0 / 9.0);
    }
    Ok(h)
}

fn covariant_effects(seed: &HermitianOperator) -> Vec<HermitianOperator> {
    (0..3)
        .flat_map(|j| (0..3).map(move |k| (j, k)))
        .map(|(j, k)| seed.conjugate_by(&displacement(j, k)))
        .collect()
}

/// Smallest qutrit visibility over the vertices of a covariant polytope.
pub fn covariant_scan(h: &HRep, jobs: usize) -> Result<ScanResult> {
    let vrep = enumerate_vertices(h)?;
    let opts = SolverOptions::default();
    scan_with(vrep.vertices, jobs, |c| {
        Ok(qutrit_program(&covariant_effects(&covariant_seed_from_point(c)), &opts)?.t_star)
    })
}

#[derive(Debug, Clone)]
pub struct CovariantSample {
    pub fiducial: ComplexVector,
    pub povm: Povm,
    /// Projective-simulability visibility.
    pub t: f64,
    /// Three-outcome visibility, when requested.
    pub t3: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CovariantSearch {
    pub samples: Vec<CovariantSample>,
    /// Index of the best random sample.
    pub best_sample: usize,
    /// Result of the local search started at the best sample.
    pub refined: Option<CovariantSample>,
}

impl CovariantSearch {
    pub fn best(&self) -> &CovariantSample {
        match &self.refined {
            Some(r) if r.t < self.samples[self.best_sample].t => r,
            _ => &self.samples[self.best_sample],
        }
    }
}

fn evaluate(f: ComplexVector, with_t3: bool, opts: &SolverOptions) -> Result<CovariantSample> {
    let f = f.normalize();
    let povm = covariant(&HermitianOperator::outer(&f).scale(1.0 / 3.0))?;
    let t = qutrit_program(povm.effects(), opts)?.t_star;
    let t3 = if with_t3 { Some(m_outcome_program(3, povm.effects(), 3, opts)?.t_star) } else { None };
    Ok(CovariantSample { fiducial: f, povm, t, t3 })
}

/// Evaluates `samples` covariant POVMs with random pure fiducials (seed
/// `|f><f| / 3`), then runs `refine_steps` steps of a random local search from
/// the least simulable one.
pub fn covariant_search(
    samples: usize,
    seed: u64,
    jobs: usize,
    with_t3: bool,
    refine_steps: usize,
) -> Result<CovariantSearch> {
    if samples == 0 {
        return Err(Error::OutOfRange("need at least one sample".into()));
    }
    let mut r = rng(seed);
    let fiducials: Vec<ComplexVector> = (0..samples).map(|_| random_pure_state(&mut r, 3)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let opts = SolverOptions::default();
    let samples: Vec<CovariantSample> =
        pool.install(|| fiducials.into_par_iter().map(|f| evaluate(f, with_t3, &opts)).collect::<Result<Vec<_>>>())?;
    let mut best_sample = 0;
    for (k, s) in samples.iter().enumerate() {
        if s.t < samples[best_sample].t {
            best_sample = k;
        }
    }

    let mut refined = None;
    if refine_steps > 0 {
        let mut cur = samples[best_sample].clone();
        let mut sigma = 0.2;
        let mut misses = 0;
        for _ in 0..refine_steps {
            let step = ComplexVector::from_fn(3, |_, _| {
                C64::new(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)) * sigma
            });
            let cand = evaluate(&cur.fiducial + step, with_t3, &opts)?;
            if cand.t < cur.t {
                cur = cand;
                misses = 0;
            } else {
                misses += 1;
                if misses >= 4 {
                    sigma *= 0.5;
                    misses = 0;
                }
            }
        }
        refined = Some(cur);
    }
    Ok(CovariantSearch { samples, best_sample, refined })
}

/// Werner-state locality bound `t^2 p*` from a qutrit visibility `t` and the
/// projective-measurement threshold `p*`.
pub fn werner_bound(t: f64, p_star: f64) -> Result<f64> {
    for (name, x) in [("t", t), ("p_star", p_star)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange(format!("{name} = {x} must lie in [0, 1]")));
        }
    }
    Ok(t * t * p_star)
}
