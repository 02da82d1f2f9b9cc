//! Primal-dual interior-point method on the homogeneous self-dual embedding,
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//!
//! Internally the problem is the conic program
//!
//! ```text
//! minimize c'x  s.t.  G x + s = h,  A x = b,  s in K
//! ```
//!
//! where `K` is a product of real PSD cones (one per LMI block; a scalar
//! inequality is a 1x1 block), `h_b = F0_b` and column `i` of `G_b` is
//! `-F_{b,i}`. The Newton systems are reduced to `[H A'; A 0]` with
//! `H = G' (W'W)^{-1} G`. Variables that never share a cone block decouple, so
//! `H` is factored per connected component and the equalities are handled by
//! a dense Schur complement.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::problem::{LmiBlock, Sense, SdpProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Absolute duality gap `s'z` at termination.
    pub gap_tol: f64,
    /// Relative primal and dual residuals at termination.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, feas_tol: 1e-8, max_iter: 200, step: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Solver output. Objectives are reported in the problem's own sense.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Multiplier per original equality (zero for rows dropped as redundant).
    pub equality_duals: Vec<f64>,
    /// Block values `F0 + sum_i x_i F_i` at the returned point.
    pub block_values: Vec<DMatrix<f64>>,
    pub block_duals: Vec<DMatrix<f64>>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Farkas-type ray `(y, z)` with `A'y + G'z = 0`, `z >= 0`, `b'y + h'z < 0`
    /// when the status is `Infeasible`.
    pub certificate: Option<(Vec<f64>, Vec<DMatrix<f64>>)>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

struct Cone {
    n: usize,
    h: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

struct Prepared {
    n: usize,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    kept_rows: Vec<usize>,
    cones: Vec<Cone>,
    /// `comps[k]` lists the variables of component `k`.
    comps: Vec<Vec<usize>>,
    /// Columns of `A` restricted to each component.
    a_comp: Vec<DMatrix<f64>>,
    nu: usize,
}

struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl Scaling {
    fn identity(n: usize) -> Self {
        Self { r: DMatrix::identity(n, n), rinv: DMatrix::identity(n, n), lambda: DVector::from_element(n, 1.0) }
    }

    /// `W' u = R u R'`.
    fn wt(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.r * u * self.r.transpose()
    }

    /// `W u = R' u R`.
    fn w(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.r.transpose() * u * &self.r
    }

    /// `(W'W)^{-1} u`.
    fn wtw_inv(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let inner = &self.rinv * u * self.rinv.transpose();
        self.rinv.transpose() * inner * &self.rinv
    }

    /// `W'W u`.
    fn wtw(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let rrt = &self.r * self.r.transpose();
        &rrt * u * &rrt
    }
}

fn sym_eig(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    sym_eig(m).eigenvalues.min()
}

/// Symmetric square root and inverse square root of a PD matrix.
fn sqrt_pair(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let e = sym_eig(m);
    if e.eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return None;
    }
    let v = &e.eigenvectors;
    let f = |g: &dyn Fn(f64) -> f64| {
        let mut vs = v.clone();
        for (k, l) in e.eigenvalues.iter().enumerate() {
            vs.column_mut(k).scale_mut(g(*l));
        }
        vs * v.transpose()
    };
    Some((f(&|l| l.sqrt()), f(&|l| 1.0 / l.sqrt())))
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let n = s.nrows();
    if n == 1 {
        let (sv, zv) = (s[(0, 0)], z[(0, 0)]);
        if !(sv > 0.0 && zv > 0.0) {
            return None;
        }
        let r = (sv / zv).sqrt().sqrt();
        return Some(Scaling {
            r: DMatrix::from_element(1, 1, r),
            rinv: DMatrix::from_element(1, 1, 1.0 / r),
            lambda: DVector::from_element(1, (sv * zv).sqrt()),
        });
    }
    let (ls, ls_inv) = sqrt_pair(s)?;
    let (lz, _) = sqrt_pair(z)?;
    let svd = (&lz * &ls).svd(true, true);
    let v = svd.v_t.as_ref()?.transpose();
    let lambda = svd.singular_values.clone();
    if lambda.iter().any(|l| !(*l > 0.0)) {
        return None;
    }
    let mut r = &ls * &v;
    let mut rinv_rows = v.transpose() * ls_inv;
    for k in 0..n {
        let sq = lambda[k].sqrt();
        r.column_mut(k).scale_mut(1.0 / sq);
        rinv_rows.row_mut(k).scale_mut(sq);
    }
    Some(Scaling { r, rinv: rinv_rows, lambda })
}

/// `lambda o X = (Lambda X + X Lambda)/2`.
fn lambda_prod(l: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| 0.5 * (l[i] + l[j]) * x[(i, j)])
}

/// Solves `lambda o X = D`.
fn lambda_div(l: &DVector<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| 2.0 * d[(i, j)] / (l[i] + l[j]))
}

fn sym_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ab = a * b;
    (&ab + ab.transpose()) * 0.5
}

/// Largest `alpha` with `lambda + alpha * d >= 0` (infinite when `d >= 0`).
fn max_step_scaled(l: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let m = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] / (l[i] * l[j]).sqrt());
    let e = min_eig(&m);
    if e < 0.0 {
        -1.0 / e
    } else {
        f64::INFINITY
    }
}

type Blocks = Vec<DMatrix<f64>>;

fn stays_interior(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], alpha: f64) -> bool {
    x.iter().zip(dx).all(|(a, d)| {
        let m = a + d * alpha;
        Cholesky::new((&m + m.transpose()) * 0.5).is_some()
    })
}

fn blocks_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &[DMatrix<f64>]) -> f64 {
    blocks_dot(a, a).sqrt()
}

fn blocks_axpy(y: &mut [DMatrix<f64>], alpha: f64, x: &[DMatrix<f64>]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += b * alpha;
    }
}

impl Prepared {
    fn new(p: &SdpProblem) -> Result<Self> {
        p.check()?;
        let n = p.num_vars();
        let sign = if p.sense() == Sense::Maximize { -1.0 } else { 1.0 };
        let c = DVector::from_iterator(n, p.objective().iter().map(|v| sign * v));

        let cones: Vec<Cone> = p.blocks().iter().map(merge_terms).collect();
        let nu = cones.iter().map(|c| c.n).sum();

        let (a, b, kept_rows) = independent_rows(p)?;

        // union-find over variables sharing a block
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for cone in &cones {
            if let Some((first, _)) = cone.terms.first() {
                for (k, _) in &cone.terms[1..] {
                    let (ra, rb) = (find(&mut parent, *first), find(&mut parent, *k));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut comp_of_root = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if comp_of_root[r] == usize::MAX {
                comp_of_root[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[comp_of_root[r]].push(i);
        }
        let a_comp = comps.iter().map(|vars| a.select_columns(vars.iter())).collect();
        Ok(Self { n, c, a, b, kept_rows, cones, comps, a_comp, nu })
    }

    fn apply_g(&self, x: &DVector<f64>) -> Blocks {
        self.cones
            .iter()
            .map(|cone| {
                let mut out = DMatrix::zeros(cone.n, cone.n);
                for (k, f) in &cone.terms {
                    out -= f * x[*k];
                }
                out
            })
            .collect()
    }

    fn apply_gt(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (cone, zb) in self.cones.iter().zip(z) {
            for (k, f) in &cone.terms {
                out[*k] -= f.dot(zb);
            }
        }
        out
    }

    fn h_blocks(&self) -> Blocks {
        self.cones.iter().map(|c| c.h.clone()).collect()
    }

    fn identity_blocks(&self) -> Blocks {
        self.cones.iter().map(|c| DMatrix::identity(c.n, c.n)).collect()
    }
}

fn merge_terms(block: &LmiBlock) -> Cone {
    let mut terms: Vec<(usize, DMatrix<f64>)> = Vec::new();
    for (k, f) in &block.terms {
        let sym = (f + f.transpose()) * 0.5;
        match terms.iter_mut().find(|(j, _)| j == k) {
            Some((_, acc)) => *acc += sym,
            None => terms.push((*k, sym)),
        }
    }
    let h = (&block.constant + block.constant.transpose()) * 0.5;
    Cone { n: h.nrows(), h, terms }
}

/// Dense equality matrix with linearly dependent rows removed (modified
/// Gram-Schmidt with consistency check on the right-hand side).
fn independent_rows(p: &SdpProblem) -> Result<(DMatrix<f64>, DVector<f64>, Vec<usize>)> {
    let n = p.num_vars();
    let mut q: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    for (idx, (form, rhs)) in p.equalities().iter().enumerate() {
        let mut row = DVector::zeros(n);
        for &(k, v) in form {
            row[k] += v;
        }
        let norm0 = row.norm();
        if norm0 == 0.0 {
            if rhs.abs() > 1e-9 {
                return Err(Error::IllFormedProblem(format!("equality {idx} reads 0 = {rhs}")));
            }
            continue;
        }
        let mut r = row.clone();
        let mut beta = *rhs;
        for _ in 0..2 {
            for (qv, qb) in &q {
                let proj = qv.dot(&r);
                r -= qv * proj;
                beta -= qb * proj;
            }
        }
        let rn = r.norm();
        if rn <= 1e-9 * norm0 {
            if beta.abs() > 1e-7 * (1.0 + rhs.abs()) {
                return Err(Error::IllFormedProblem(format!("equality {idx} is inconsistent with the others")));
            }
            continue;
        }
        q.push((r / rn, beta / rn));
        kept.push(idx);
    }
    let m = kept.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (row, &idx) in kept.iter().enumerate() {
        let (form, rhs) = &p.equalities()[idx];
        for &(k, v) in form {
            a[(row, k)] += v;
        }
        b[row] = *rhs;
    }
    Ok((a, b, kept))
}

struct CompFactor {
    chol: Cholesky<f64, Dyn>,
    hinv_at: DMatrix<f64>,
}

/// Factorization of the reduced KKT system for one scaling.
struct Kkt<'a> {
    prep: &'a Prepared,
    scal: &'a [Scaling],
    comps: Vec<CompFactor>,
    schur: Option<Cholesky<f64, Dyn>>,
}

fn chol_regularized(mut h: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = h.diagonal().iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(c) = Cholesky::new(h.clone()) {
            return Some(c);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

impl<'a> Kkt<'a> {
    fn factor(prep: &'a Prepared, scal: &'a [Scaling]) -> Option<Self> {
        let mut local = vec![0usize; prep.n];
        let mut comp_of = vec![0usize; prep.n];
        for (ci, vars) in prep.comps.iter().enumerate() {
            for (li, &v) in vars.iter().enumerate() {
                local[v] = li;
                comp_of[v] = ci;
            }
        }
        let mut hs: Vec<DMatrix<f64>> = prep.comps.iter().map(|v| DMatrix::zeros(v.len(), v.len())).collect();
        for (cone, sc) in prep.cones.iter().zip(scal) {
            let ts: Vec<DMatrix<f64>> =
                cone.terms.iter().map(|(_, f)| &sc.rinv * f * sc.rinv.transpose()).collect();
            for (p, (kp, _)) in cone.terms.iter().enumerate() {
                let h = &mut hs[comp_of[*kp]];
                for (q, (kq, _)) in cone.terms.iter().enumerate().skip(p) {
                    let v = ts[p].dot(&ts[q]);
                    h[(local[*kp], local[*kq])] += v;
                    if p != q {
                        h[(local[*kq], local[*kp])] += v;
                    }
                }
            }
        }
        let m = prep.a.nrows();
        let mut schur = DMatrix::zeros(m, m);
        let mut comps = Vec::with_capacity(hs.len());
        for (h, a_c) in hs.into_iter().zip(&prep.a_comp) {
            let chol = chol_regularized(h)?;
            let hinv_at = if m > 0 { chol.solve(&a_c.transpose()) } else { DMatrix::zeros(a_c.ncols(), 0) };
            if m > 0 {
                schur += a_c * &hinv_at;
            }
            comps.push(CompFactor { chol, hinv_at });
        }
        let schur = if m > 0 { Some(chol_regularized(schur)?) } else { None };
        Some(Self { prep, scal, comps, schur })
    }

    fn solve_once(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &[DMatrix<f64>]) -> (DVector<f64>, DVector<f64>, Blocks) {
        let prep = self.prep;
        let u: Blocks = bz.iter().zip(self.scal).map(|(b, sc)| sc.wtw_inv(b)).collect();
        let r1 = bx + prep.apply_gt(&u);
        let mut hr: Vec<DVector<f64>> = Vec::with_capacity(self.comps.len());
        for (vars, cf) in prep.comps.iter().zip(&self.comps) {
            let rc = DVector::from_iterator(vars.len(), vars.iter().map(|&v| r1[v]));
            hr.push(cf.chol.solve(&rc));
        }
        let m = prep.a.nrows();
        let y = match &self.schur {
            Some(s) => {
                let mut rhs = -by.clone();
                for (a_c, h) in prep.a_comp.iter().zip(&hr) {
                    rhs += a_c * h;
                }
                s.solve(&rhs)
            }
            None => DVector::zeros(m),
        };
        let mut x = DVector::zeros(prep.n);
        for ((vars, cf), h) in prep.comps.iter().zip(&self.comps).zip(&hr) {
            let xc = if m > 0 { h - &cf.hinv_at * &y } else { h.clone() };
            for (li, &v) in vars.iter().enumerate() {
                x[v] = xc[li];
            }
        }
        let gx = prep.apply_g(&x);
        let z = gx.iter().zip(bz).zip(self.scal).map(|((g, b), sc)| sc.wtw_inv(&(g - b))).collect();
        (x, y, z)
    }

    /// Solves `A'y + G'z = bx, A x = by, G x - W'W z = bz`, refining the
    /// solution while the residual keeps shrinking.
    fn solve(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &[DMatrix<f64>]) -> (DVector<f64>, DVector<f64>, Blocks) {
        let prep = self.prep;
        let residual = |x: &DVector<f64>, y: &DVector<f64>, z: &Blocks| {
            let ex = bx - prep.a.transpose() * y - prep.apply_gt(z);
            let ey = by - &prep.a * x;
            let gx = prep.apply_g(x);
            let ez: Blocks = bz
                .iter()
                .zip(&gx)
                .zip(z)
                .zip(self.scal)
                .map(|(((b, g), zb), sc)| b - g + sc.wtw(zb))
                .collect();
            let norm = (ex.norm_squared() + ey.norm_squared() + blocks_dot(&ez, &ez)).sqrt();
            (ex, ey, ez, norm)
        };
        let (mut x, mut y, mut z) = self.solve_once(bx, by, bz);
        let (mut ex, mut ey, mut ez, mut err) = residual(&x, &y, &z);
        for _ in 0..4 {
            let (dx, dy, dz) = self.solve_once(&ex, &ey, &ez);
            let x1 = &x + dx;
            let y1 = &y + dy;
            let mut z1 = z.clone();
            blocks_axpy(&mut z1, 1.0, &dz);
            let (ex1, ey1, ez1, err1) = residual(&x1, &y1, &z1);
            if !(err1 < err) {
                break;
            }
            (x, y, z) = (x1, y1, z1);
            (ex, ey, ez) = (ex1, ey1, ez1);
            let done = err1 < 0.5 * err;
            err = err1;
            if !done {
                break;
            }
        }
        (x, y, z)
    }
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: Blocks,
    z: Blocks,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: DVector<f64>,
    y: DVector<f64>,
    z: Blocks,
    s: Blocks,
    zs: Blocks,
    ss: Blocks,
    tau: f64,
    kappa: f64,
}

fn shift_interior(blocks: &mut [DMatrix<f64>]) {
    let ts = blocks.iter().map(|b| -min_eig(b)).fold(f64::NEG_INFINITY, f64::max);
    let nrm = blocks_norm(blocks);
    if ts >= -1e-8 * nrm.max(1.0) {
        for b in blocks.iter_mut() {
            for i in 0..b.nrows() {
                b[(i, i)] += 1.0 + ts;
            }
        }
    }
}

/// Solves the problem. Never panics on numerical failure; inspect `status`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let prep = Prepared::new(problem)?;
    let m = prep.a.nrows();
    let h = prep.h_blocks();
    let bnorm = prep.b.norm().max(1.0);
    let hnorm = blocks_norm(&h).max(1.0);
    let cnorm = prep.c.norm().max(1.0);

    // cold start from two least-squares problems with identity scaling
    let ident: Vec<Scaling> = prep.cones.iter().map(|c| Scaling::identity(c.n)).collect();
    let kkt0 = Kkt::factor(&prep, &ident)
        .ok_or_else(|| Error::IllFormedProblem("initial KKT system is singular".into()))?;
    let zero_blocks: Blocks = prep.cones.iter().map(|c| DMatrix::zeros(c.n, c.n)).collect();
    let (x0, _, zp) = kkt0.solve(&DVector::zeros(prep.n), &prep.b, &h);
    let mut s0: Blocks = zp.iter().map(|z| -z).collect();
    shift_interior(&mut s0);
    let (_, y0, mut z0) = kkt0.solve(&(-&prep.c), &DVector::zeros(m), &zero_blocks);
    shift_interior(&mut z0);
    let mut it = Iterate { x: x0, y: y0, s: s0, z: z0, tau: 1.0, kappa: 1.0 };

    let identity = prep.identity_blocks();
    let mut status = Status::NumericalTrouble;
    let mut iterations = 0;
    let mut certificate = None;
    let (mut pres, mut dres, mut gap);
    let mut best: Option<(f64, Iterate, [f64; 3])> = None;
    let mut best_at = 0;

    loop {
        // residuals of the embedding
        let gx = prep.apply_g(&it.x);
        let gtz = prep.apply_gt(&it.z);
        let aty = prep.a.transpose() * &it.y;
        let ax = &prep.a * &it.x;
        let rx = &aty + &gtz + &prep.c * it.tau;
        let ry = &prep.b * it.tau - &ax;
        let rz: Blocks = it.s.iter().zip(&gx).zip(&h).map(|((s, g), hb)| s + g - hb * it.tau).collect();
        let cx = prep.c.dot(&it.x);
        let by = prep.b.dot(&it.y);
        let hz = blocks_dot(&h, &it.z);
        let rt = it.kappa + cx + by + hz;
        let sz = blocks_dot(&it.s, &it.z);

        pres = (ry.norm() / it.tau / bnorm).max(blocks_norm(&rz) / it.tau / hnorm);
        dres = rx.norm() / it.tau / cnorm;
        gap = sz / (it.tau * it.tau);

        log::trace!(
            "{iterations:3} pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} tau {:.2e} kappa {:.2e} pcost {:.10}",
            it.tau,
            it.kappa,
            cx / it.tau
        );
        let merit = pres.max(dres).max(gap);
        if best.as_ref().is_none_or(|b: &(f64, Iterate, [f64; 3])| merit < b.0) {
            best = Some((merit, it.clone(), [pres, dres, gap]));
            best_at = iterations;
        } else if iterations >= best_at + 5 && best.as_ref().is_some_and(|b| b.0 < 1e-4) {
            // stalled near an optimum; infeasible runs never get here
            break;
        }
        if pres <= opts.feas_tol && dres <= opts.feas_tol && gap <= opts.gap_tol {
            status = Status::Optimal;
            break;
        }
        let pinf = if hz + by < 0.0 { (&aty + &gtz).norm() / (-(hz + by)) / cnorm } else { f64::INFINITY };
        let dinf = if cx < 0.0 {
            let sgx: Blocks = it.s.iter().zip(&gx).map(|(s, g)| s + g).collect();
            (ax.norm() / bnorm).max(blocks_norm(&sgx) / hnorm) / (-cx)
        } else {
            f64::INFINITY
        };
        let collapsed = it.tau / it.kappa < 1e-9;
        if pinf <= opts.feas_tol || (collapsed && hz + by < 0.0) {
            status = Status::Infeasible;
            let scale = -(hz + by);
            certificate = Some((
                it.y.iter().map(|v| v / scale).collect(),
                it.z.iter().map(|z| z / scale).collect(),
            ));
            break;
        }
        if dinf <= opts.feas_tol || (collapsed && cx < 0.0) {
            status = Status::Unbounded;
            break;
        }
        if iterations >= opts.max_iter || collapsed {
            break;
        }
        iterations += 1;

        let Some(scal) = it.s.iter().zip(&it.z).map(|(s, z)| nt_scaling(s, z)).collect::<Option<Vec<_>>>() else {
            break;
        };
        let Some(kkt) = Kkt::factor(&prep, &scal) else {
            break;
        };
        let (x1, y1, z1) = kkt.solve(&(-&prep.c), &prep.b, &h);
        let denom1 = prep.c.dot(&x1) + prep.b.dot(&y1) + blocks_dot(&h, &z1) - it.kappa / it.tau;
        let mu = (sz + it.tau * it.kappa) / (prep.nu as f64 + 1.0);

        let step_dir = |eta: f64, ds: &Blocks, dk: f64| -> Direction {
            let lds: Blocks = ds.iter().zip(&scal).map(|(d, sc)| lambda_div(&sc.lambda, d)).collect();
            let bz: Blocks = rz
                .iter()
                .zip(&lds)
                .zip(&scal)
                .map(|((r, l), sc)| -(r * eta) - sc.wt(l))
                .collect();
            let (x0, y0, z0) = kkt.solve(&(-(&rx * eta)), &(&ry * eta), &bz);
            let num = -eta * rt - dk / it.tau - (prep.c.dot(&x0) + prep.b.dot(&y0) + blocks_dot(&h, &z0));
            let dtau = num / denom1;
            let dx = x0 + &x1 * dtau;
            let dy = y0 + &y1 * dtau;
            let dz: Blocks = z0.iter().zip(&z1).map(|(a, b)| a + b * dtau).collect();
            let zs: Blocks = dz.iter().zip(&scal).map(|(d, sc)| sc.w(d)).collect();
            let ss: Blocks = lds.iter().zip(&zs).map(|(l, z)| l - z).collect();
            let dsv: Blocks = ss.iter().zip(&scal).map(|(v, sc)| sc.wt(v)).collect();
            let dkappa = (dk - it.kappa * dtau) / it.tau;
            Direction { x: dx, y: dy, z: dz, s: dsv, zs, ss, tau: dtau, kappa: dkappa }
        };

        let max_step = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for ((sc, zs), ss) in scal.iter().zip(&d.zs).zip(&d.ss) {
                a = a.min(max_step_scaled(&sc.lambda, zs)).min(max_step_scaled(&sc.lambda, ss));
            }
            if d.tau < 0.0 {
                a = a.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-it.kappa / d.kappa);
            }
            a
        };

        // predictor
        let ds_aff: Blocks = scal.iter().map(|sc| DMatrix::from_diagonal(&sc.lambda.map(|l| -l * l))).collect();
        let aff = step_dir(1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let ds: Blocks = ds_aff
            .iter()
            .zip(&aff.ss)
            .zip(&aff.zs)
            .zip(&identity)
            .map(|(((base, s), z), e)| base - sym_prod(s, z) + e * (sigma * mu))
            .collect();
        let dk = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
        let dir = step_dir(1.0 - sigma, &ds, dk);
        let mut alpha = (opts.step * max_step(&dir)).min(1.0);
        // the scaled step bound can be off when the scaling is ill-conditioned
        while alpha >= 1e-12 && !(stays_interior(&it.s, &dir.s, alpha) && stays_interior(&it.z, &dir.z, alpha)) {
            alpha *= 0.8;
        }
        if !alpha.is_finite() || alpha < 1e-12 {
            break;
        }

        it.x += &dir.x * alpha;
        it.y += &dir.y * alpha;
        blocks_axpy(&mut it.s, alpha, &dir.s);
        blocks_axpy(&mut it.z, alpha, &dir.z);
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
        // keep the symmetric parts only
        for b in it.s.iter_mut().chain(it.z.iter_mut()) {
            *b = (&*b + b.transpose()) * 0.5;
        }
        debug_assert!(lambda_prod(&scal[0].lambda, &identity[0]).nrows() == identity[0].nrows());
    }

    if status == Status::NumericalTrouble {
        // fall back to the most accurate iterate seen
        if let Some((_, b, [p, d, g])) = best {
            it = b;
            (pres, dres, gap) = (p, d, g);
            if pres <= opts.feas_tol && gap <= opts.gap_tol && dres <= 100.0 * opts.feas_tol {
                status = Status::Optimal;
            }
        }
    }

    let tau = it.tau;
    let x: Vec<f64> = it.x.iter().map(|v| v / tau).collect();
    let sign = if problem.sense() == Sense::Maximize { -1.0 } else { 1.0 };
    let pcost = prep.c.dot(&it.x) / tau;
    let dcost = -(prep.b.dot(&it.y) + blocks_dot(&h, &it.z)) / tau;
    let mut equality_duals = vec![0.0; problem.equalities().len()];
    for (row, &idx) in prep.kept_rows.iter().enumerate() {
        equality_duals[idx] = it.y[row] / tau;
    }
    let block_values = problem.blocks().iter().map(|b| b.value(&x)).collect();
    Ok(SdpSolution {
        status,
        objective: sign * pcost,
        dual_objective: sign * dcost,
        x,
        equality_duals,
        block_values,
        block_duals: it.z.iter().map(|z| z / tau).collect(),
        primal_residual: pres,
        dual_residual: dres,
        gap,
        iterations,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_box() {
        let mut p = SdpProblem::new(1);
        p.add_bounds(0, 0.0, 1.0);
        p.set_objective(Sense::Maximize, &[(0, 1.0)]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn determinant_boundary() {
        // [[1, t], [t, 1]] >= 0
        let mut p = SdpProblem::new(1);
        let off = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        p.add_real_lmi(DMatrix::identity(2, 2), vec![(0, off)]);
        p.set_objective(Sense::Maximize, &[(0, 1.0)]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-6);
        assert!(s.gap <= 1e-7 && s.primal_residual <= 1e-8);
    }

    #[test]
    fn detects_infeasibility() {
        // x >= 1 and x <= 0
        let mut p = SdpProblem::new(1);
        p.add_scalar_ge(&[(0, 1.0)], 1.0);
        p.add_scalar_ge(&[(0, -1.0)], 0.0);
        p.set_objective(Sense::Minimize, &[(0, 1.0)]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
        let (_, z) = s.certificate.unwrap();
        assert!(z.iter().all(|b| b[(0, 0)] >= -1e-12));
    }

    #[test]
    fn detects_unboundedness() {
        let mut p = SdpProblem::new(1);
        p.add_scalar_ge(&[(0, 1.0)], 0.0);
        p.set_objective(Sense::Maximize, &[(0, 1.0)]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Unbounded);
    }

    #[test]
    fn equality_with_redundant_rows() {
        // max x0 + x1 s.t. x0 + x1 = 1 (stated twice), x0, x1 in [0, 1]
        let mut p = SdpProblem::new(2);
        p.add_equality(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_equality(vec![(0, 2.0), (1, 2.0)], 2.0);
        p.add_bounds(0, 0.0, 1.0);
        p.add_bounds(1, 0.0, 1.0);
        p.set_objective(Sense::Maximize, &[(0, 1.0), (1, 2.0)]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-6);
        assert_eq!(s.equality_duals[1], 0.0);
    }

    #[test]
    fn rejects_inconsistent_equalities() {
        let mut p = SdpProblem::new(1);
        p.add_equality(vec![(0, 1.0)], 1.0);
        p.add_equality(vec![(0, 1.0)], 2.0);
        p.add_bounds(0, -5.0, 5.0);
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::IllFormedProblem(_))));
    }

    #[test]
    fn rejects_unconstrained_variable() {
        let mut p = SdpProblem::new(2);
        p.add_bounds(0, 0.0, 1.0);
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::IllFormedProblem(_))));
    }

    #[test]
    fn deterministic() {
        let mut p = SdpProblem::new(2);
        let f1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -1.0]);
        let f2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.5]);
        p.add_real_lmi(DMatrix::identity(2, 2), vec![(0, f1), (1, f2)]);
        p.set_objective(Sense::Maximize, &[(0, 0.4), (1, -0.7)]);
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.objective, b.objective);
    }
}
