//! Outer polytopes of the POVM set and their vertex scans.
//!
//! Vertex enumeration uses the double description method on the homogenized
//! cone `{(x0, x) : b x0 - a.x >= 0, x0 >= 0}`: constraints are inserted one at
//! a time, keeping the extreme rays and, for each ray, the set of inserted
//! constraints it makes tight. Two rays are adjacent when their common tight
//! constraints have rank `dim - 2` in the cone.

mod covariant;
mod qubit;

pub use covariant::{build_covariant_polytope, covariant_scan, covariant_search, CovariantSearch, covariant_seed_from_point, werner_bound, CovariantSample};
pub use qubit::{
    build_qubit_polytope, direction_set, quasi_visibility, qubit_point, rotated_tetra_directions, rotated_tetra_point, scan_lower_bound,
    vertex_to_quasipovm, Preset, QubitPolytopeConfig, QuasiPovm, ScanResult,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const ZERO_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-8;
const MAX_DIM: usize = 10;

/// `a.x <= b` for every inequality, `a.x = b` for every equality.
#[derive(Debug, Clone, Default)]
pub struct HRep {
    pub dim: usize,
    pub inequalities: Vec<(Vec<f64>, f64)>,
    pub equalities: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct VRep {
    pub vertices: Vec<Vec<f64>>,
}

impl HRep {
    pub fn new(dim: usize) -> Self {
        Self { dim, inequalities: Vec::new(), equalities: Vec::new() }
    }

    pub fn add_inequality(&mut self, a: Vec<f64>, b: f64) {
        self.inequalities.push((a, b));
    }

    pub fn add_equality(&mut self, a: Vec<f64>, b: f64) {
        self.equalities.push((a, b));
    }

    /// Largest violation of any constraint at `x` (zero or negative inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let ineq = self.inequalities.iter().map(|(a, b)| dot(a) - b);
        let eq = self.equalities.iter().map(|(a, b)| (dot(a) - b).abs());
        ineq.chain(eq).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

struct Bits(Vec<u64>);

impl Bits {
    fn new(words: usize) -> Self {
        Bits(vec![0; words])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| 64 * k + b))
    }
}

struct Ray {
    r: Vec<f64>,
    zeros: Bits,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Rank of the selected rows, stopping once `target` is reached.
fn rank_at_least(rows: &[Vec<f64>], pick: impl Iterator<Item = usize>, target: usize) -> bool {
    let mut m: Vec<Vec<f64>> = pick.map(|i| rows[i].clone()).collect();
    if m.len() < target {
        return false;
    }
    let cols = rows[0].len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[p][c].abs() <= ZERO_TOL {
            continue;
        }
        m.swap(rank, p);
        let pivot = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[c] / pivot[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot).for_each(|(x, y)| *x -= f * y);
            }
        }
        rank += 1;
        if rank >= target {
            return true;
        }
    }
    rank >= target
}

/// Affine parametrization `x = p + N u` of the equality constraints, or
/// `None` when they are inconsistent.
fn affine_hull(h: &HRep) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let d = h.dim;
    if h.equalities.is_empty() {
        return Some((vec![0.0; d], DMatrix::identity(d, d)));
    }
    let k = h.equalities.len();
    let rows = k.max(d);
    let mut e = DMatrix::zeros(rows, d);
    let mut f = nalgebra::DVector::zeros(rows);
    for (i, (a, b)) in h.equalities.iter().enumerate() {
        for j in 0..d {
            e[(i, j)] = a[j];
        }
        f[i] = *b;
    }
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.max().max(1.0);
    let p = svd.solve(&f, 1e-10 * smax).ok()?;
    if (&e * &p - &f).norm() > 1e-9 * (1.0 + f.norm()) {
        return None;
    }
    let vt = svd.v_t.as_ref()?;
    let null: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] <= 1e-10 * smax).collect();
    let mut n = DMatrix::zeros(d, null.len());
    for (c, &i) in null.iter().enumerate() {
        for j in 0..d {
            n[(j, c)] = vt[(i, j)];
        }
    }
    Some((p.iter().copied().collect(), n))
}

/// All vertices of a bounded polytope, sorted lexicographically.
pub fn enumerate_vertices(h: &HRep) -> Result<VRep> {
    if h.dim > MAX_DIM {
        return Err(Error::DimensionTooLarge(h.dim));
    }
    let Some((p, n)) = affine_hull(h) else { return Ok(VRep::default()) };
    let k = n.ncols();

    // inequalities in the reduced coordinates u
    let mut reduced: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for (a, b) in &h.inequalities {
        let ar: Vec<f64> = (0..k).map(|c| (0..h.dim).map(|j| a[j] * n[(j, c)]).sum()).collect();
        let br = b - dot(a, &p);
        let norm = ar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= ZERO_TOL {
            if br < -ZERO_TOL {
                return Ok(VRep::default());
            }
            continue;
        }
        reduced.push((ar, br, norm));
    }
    let lift = |u: &[f64]| -> Vec<f64> { (0..h.dim).map(|j| p[j] + (0..k).map(|c| n[(j, c)] * u[c]).sum::<f64>()).collect() };

    let mut vertices = if k == 0 {
        vec![p.clone()]
    } else {
        // stable sort by decreasing infinity norm of the normal
        let mut order: Vec<usize> = (0..reduced.len()).collect();
        order.sort_by(|&x, &y| reduced[y].2.total_cmp(&reduced[x].2));
        let mut rows: Vec<Vec<f64>> = vec![{
            let mut r = vec![0.0; k + 1];
            r[0] = 1.0;
            r
        }];
        for &i in &order {
            let (a, b, _) = &reduced[i];
            let mut r = Vec::with_capacity(k + 1);
            r.push(*b);
            r.extend(a.iter().map(|v| -v));
            rows.push(normalized(r));
        }
        double_description(&rows, k + 1)?.into_iter().map(|u| lift(&u)).collect()
    };

    vertices.retain(|v| h.violation(v) <= 1e-7);
    for v in &vertices {
        let viol = h.violation(v);
        if viol > ZERO_TOL * 10.0 {
            log::warn!("vertex violates a constraint by {viol:.2e}");
        }
    }
    vertices.sort_by(|a, b| lex_cmp(a, b));
    let mut unique: Vec<Vec<f64>> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if unique.iter().rev().take(64).any(|u| u.iter().zip(&v).all(|(x, y)| (x - y).abs() <= DEDUP_TOL)) {
            continue;
        }
        unique.push(v);
    }
    Ok(VRep { vertices: unique })
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Extreme rays of `{y : rows . y >= 0}` dehomogenized by the first
/// coordinate. `rows[0]` must be `y0 >= 0`.
fn double_description(rows: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    let words = rows.len().div_ceil(64);
    // initial basis: first `dim` independent rows in insertion order
    let mut basis: Vec<usize> = Vec::with_capacity(dim);
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut v = r.clone();
        for q in &ortho {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            ortho.push(v.into_iter().map(|x| x / nv).collect());
            basis.push(i);
            if basis.len() == dim {
                break;
            }
        }
    }
    if basis.len() < dim {
        return Err(Error::Unbounded);
    }
    let a = DMatrix::from_fn(dim, dim, |i, j| rows[basis[i]][j]);
    let inv = a.try_inverse().ok_or(Error::Unbounded)?;
    let mut inserted = Bits::new(words);
    basis.iter().for_each(|&i| inserted.set(i));
    let mut rays: Vec<Ray> = (0..dim)
        .map(|j| {
            let r = normalized(inv.column(j).iter().copied().collect());
            let mut zeros = Bits::new(words);
            for (k, &i) in basis.iter().enumerate() {
                if k != j {
                    zeros.set(i);
                }
            }
            Ray { r, zeros }
        })
        .collect();

    let needed = dim - 2;
    for i in 0..rows.len() {
        if basis.contains(&i) {
            continue;
        }
        let row = &rows[i];
        let vals: Vec<f64> = rays.iter().map(|ray| dot(row, &ray.r)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] > ZERO_TOL).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] < -ZERO_TOL).collect();
        inserted.set(i);
        if neg.is_empty() {
            for (ray, v) in rays.iter_mut().zip(&vals) {
                if v.abs() <= ZERO_TOL {
                    ray.zeros.set(i);
                }
            }
            continue;
        }
        let mut fresh: Vec<Ray> = Vec::new();
        for &pi in &pos {
            for &ni in &neg {
                let common = rays[pi].zeros.and(&rays[ni].zeros);
                if (common.count() as usize) < needed || !rank_at_least(rows, common.ones(), needed) {
                    continue;
                }
                let (vp, vn) = (vals[pi], vals[ni]);
                let r: Vec<f64> = rays[ni].r.iter().zip(&rays[pi].r).map(|(n, p)| vp * n - vn * p).collect();
                let r = normalized(r);
                let mut zeros = Bits::new(words);
                for j in inserted.ones() {
                    if dot(&rows[j], &r).abs() <= ZERO_TOL {
                        zeros.set(j);
                    }
                }
                zeros.set(i);
                fresh.push(Ray { r, zeros });
            }
        }
        let mut next: Vec<Ray> = Vec::with_capacity(pos.len() + fresh.len());
        for (k, mut ray) in rays.into_iter().enumerate() {
            if vals[k] >= -ZERO_TOL {
                if vals[k] <= ZERO_TOL {
                    ray.zeros.set(i);
                }
                next.push(ray);
            }
        }
        next.extend(fresh);
        rays = next;
    }

    let mut out = Vec::with_capacity(rays.len());
    for ray in rays {
        if ray.r[0] <= ZERO_TOL {
            return Err(Error::Unbounded);
        }
        out.push(ray.r[1..].iter().map(|v| v / ray.r[0]).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> HRep {
        let mut h = HRep::new(3);
        for i in 0..3 {
            let mut a = vec![0.0; 3];
            a[i] = 1.0;
            h.add_inequality(a.clone(), 1.0);
            a[i] = -1.0;
            h.add_inequality(a, 0.0);
        }
        h
    }

    #[test]
    fn unit_cube() {
        let v = enumerate_vertices(&cube()).unwrap();
        assert_eq!(v.vertices.len(), 8);
        for x in &v.vertices {
            assert!(x.iter().all(|c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn simplex() {
        let mut h = HRep::new(3);
        for i in 0..3 {
            let mut a = vec![0.0; 3];
            a[i] = -1.0;
            h.add_inequality(a, 0.0);
        }
        h.add_inequality(vec![1.0; 3], 1.0);
        assert_eq!(enumerate_vertices(&h).unwrap().vertices.len(), 4);
    }

    #[test]
    fn equalities_cut_a_face() {
        let mut h = cube();
        h.add_equality(vec![0.0, 0.0, 1.0], 0.5);
        let v = enumerate_vertices(&h).unwrap();
        assert_eq!(v.vertices.len(), 4);
        assert!(v.vertices.iter().all(|x| (x[2] - 0.5).abs() < 1e-12));
        let mut point = HRep::new(2);
        point.add_equality(vec![1.0, 0.0], 0.25);
        point.add_equality(vec![0.0, 1.0], 0.5);
        point.add_inequality(vec![1.0, 1.0], 1.0);
        assert_eq!(enumerate_vertices(&point).unwrap().vertices, vec![vec![0.25, 0.5]]);
    }

    #[test]
    fn degenerate_pyramid() {
        // square pyramid: apex lies on four facets
        let mut h = HRep::new(3);
        h.add_inequality(vec![0.0, 0.0, -1.0], 0.0);
        for (x, y) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            h.add_inequality(vec![x, y, 1.0], 1.0);
        }
        assert_eq!(enumerate_vertices(&h).unwrap().vertices.len(), 5);
    }

    #[test]
    fn rejects_unbounded_and_large() {
        let mut h = HRep::new(2);
        h.add_inequality(vec![-1.0, 0.0], 0.0);
        h.add_inequality(vec![0.0, -1.0], 0.0);
        assert!(matches!(enumerate_vertices(&h), Err(Error::Unbounded)));
        assert!(matches!(enumerate_vertices(&HRep::new(11)), Err(Error::DimensionTooLarge(11))));
    }
}
