use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{enumerate_vertices, lex_cmp, HRep};
use crate::error::{Error, Result};
use crate::hermlin::HermitianOperator;
use crate::povm::Povm;
use crate::sdp::SolverOptions;
use crate::simulability::m_outcome_program;

/// Coordinates of the qubit polytope, in order:
/// `a` (with `M1 = a (I + sigma_x)`), `alpha2, x2, y2` (`M2` in the upper
/// `xy` half-plane), `alpha3, x3, y3, z3`; `M4 = I - M1 - M2 - M3`.
pub const QUBIT_DIM: usize = 8;

/// Normalized effect tuple summing to the identity whose effects are only
/// required to satisfy finitely many positivity conditions.
#[derive(Debug, Clone)]
pub struct QuasiPovm {
    pub effects: Vec<HermitianOperator>,
}

impl QuasiPovm {
    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn normalization_defect(&self) -> f64 {
        let sum = self.effects.iter().fold(HermitianOperator::zeros(self.dim()), |a, e| a.add(e));
        sum.distance(&HermitianOperator::identity(self.dim()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.effects.iter().map(|e| e.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }

    /// The tuple as a POVM, when every effect is PSD.
    pub fn to_povm(&self) -> Result<Povm> {
        Povm::new(self.dim(), self.effects.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QubitPolytopeConfig {
    pub directions: Vec<[f64; 3]>,
    pub polygon_sides: usize,
    pub tangent_to_tetra: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Axis directions, square half-polygon. Small sanity instance.
    Octahedron,
    /// Icosahedron and dodecahedron directions, 20-gon, tangent to the tetrahedron.
    Desk,
    /// Truncated icosahedron and its dual, 100-gon, tangent. Long-running.
    Full,
}

impl Preset {
    pub const NAMES: &'static [&'static str] = &["octahedron", "desk", "full"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "octahedron" => Ok(Preset::Octahedron),
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::Parse(format!("unknown preset '{name}'"))),
        }
    }

    pub fn config(self) -> QubitPolytopeConfig {
        let (set, polygon_sides, tangent_to_tetra) = match self {
            Preset::Octahedron => ("octahedron", 4, false),
            Preset::Desk => ("icosahedron+dual", 20, true),
            Preset::Full => ("truncated-icosahedron+dual", 100, true),
        };
        QubitPolytopeConfig {
            directions: direction_set(set).expect("built-in direction set"),
            polygon_sides,
            tangent_to_tetra,
        }
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// All sign choices of the nonzero entries, then cyclic permutations.
fn signed_cyclic(base: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for signs in 0..8u32 {
        let mut v = base;
        let mut skip = false;
        for (k, x) in v.iter_mut().enumerate() {
            if signs >> k & 1 == 1 {
                if *x == 0.0 {
                    skip = true;
                }
                *x = -*x;
            }
        }
        if skip {
            continue;
        }
        for r in 0..3 {
            out.push(unit([v[r % 3], v[(r + 1) % 3], v[(r + 2) % 3]]));
        }
    }
    out
}

fn dedup_directions(mut v: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::with_capacity(v.len());
    for d in v.drain(..) {
        if !out.iter().any(|o| (0..3).all(|k| (o[k] - d[k]).abs() < 1e-12)) {
            out.push(d);
        }
    }
    out
}

/// Named unit-vector sets: `octahedron`, `cube`, `icosahedron`,
/// `dodecahedron`, `icosahedron+dual`, `truncated-icosahedron`,
/// `truncated-icosahedron+dual`.
pub fn direction_set(name: &str) -> Result<Vec<[f64; 3]>> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let octa = || signed_cyclic([1.0, 0.0, 0.0]);
    let cube = || {
        let mut v = Vec::new();
        for s in 0..8u32 {
            let sg = |k: u32| if s >> k & 1 == 1 { -1.0 } else { 1.0 };
            v.push(unit([sg(0), sg(1), sg(2)]));
        }
        v
    };
    let ico = || signed_cyclic([0.0, 1.0, phi]);
    let dodeca = || {
        let mut v = cube();
        v.extend(signed_cyclic([0.0, 1.0 / phi, phi]));
        v
    };
    let trunc = || {
        let mut v = signed_cyclic([0.0, 1.0, 3.0 * phi]);
        v.extend(signed_cyclic([1.0, 2.0 + phi, 2.0 * phi]));
        v.extend(signed_cyclic([phi, 2.0, 2.0 * phi + 1.0]));
        v
    };
    let set = match name {
        "octahedron" => octa(),
        "cube" => cube(),
        "icosahedron" => ico(),
        "dodecahedron" => dodeca(),
        "icosahedron+dual" => [ico(), dodeca()].concat(),
        "truncated-icosahedron" => trunc(),
        // the dual (pentakis dodecahedron) points along the icosahedron and
        // dodecahedron directions
        "truncated-icosahedron+dual" => [trunc(), ico(), dodeca()].concat(),
        _ => return Err(Error::Parse(format!("unknown direction set '{name}'"))),
    };
    Ok(dedup_directions(set))
}

/// Bloch directions of the tetrahedral POVM rotated so that the first points
/// along `+x` and the second lies in the upper `xy` half-plane.
pub fn rotated_tetra_directions() -> [[f64; 3]; 4] {
    let r2 = 2f64.sqrt();
    [
        [1.0, 0.0, 0.0],
        [-1.0 / 3.0, 2.0 * r2 / 3.0, 0.0],
        [-1.0 / 3.0, -r2 / 3.0, (2.0f64 / 3.0).sqrt()],
        [-1.0 / 3.0, -r2 / 3.0, -(2.0f64 / 3.0).sqrt()],
    ]
}

/// Extra facet directions making the polytope tangent to the rotated
/// tetrahedral POVM: the exact rotated Bloch directions together with the
/// commonly quoted set `(cos 2pi/3, sin 2pi/3, 0)`, `(-1/2, -sqrt3/4, +-3/4)`.
fn tangent_directions() -> (Vec<[f64; 2]>, Vec<[f64; 3]>) {
    let n = rotated_tetra_directions();
    let a = 2.0 * std::f64::consts::PI / 3.0;
    let plane = vec![[n[1][0], n[1][1]], [a.cos(), a.sin()]];
    let s3 = 3f64.sqrt();
    let space = vec![n[2], n[3], [-0.5, -s3 / 4.0, 0.75], [-0.5, -s3 / 4.0, -0.75]];
    (plane, space)
}

/// The rotated tetrahedral POVM as a point of the parameter space.
pub fn rotated_tetra_point() -> Vec<f64> {
    let n = rotated_tetra_directions();
    vec![0.25, 0.25, 0.25 * n[1][0], 0.25 * n[1][1], 0.25, 0.25 * n[2][0], 0.25 * n[2][1], 0.25 * n[2][2]]
}

/// Outer polytope of the normalized rank-one four-outcome qubit POVMs:
/// positivity of `M2` is relaxed to a half-polygon with normals at angles
/// `pi k / N`, positivity of `M3` and `M4` to `(x, y, z) . v <= alpha` over the
/// given directions.
pub fn build_qubit_polytope(directions: &[[f64; 3]], polygon_sides: usize, tangent_to_tetra: bool) -> Result<HRep> {
    if polygon_sides < 3 {
        return Err(Error::OutOfRange(format!("polygon needs at least 3 sides, got {polygon_sides}")));
    }
    let mut dirs: Vec<[f64; 3]> = Vec::with_capacity(directions.len() + 4);
    for d in directions {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::DegenerateDirections);
        }
        dirs.push(unit(*d));
    }
    let mut plane: Vec<[f64; 2]> = (0..=polygon_sides)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / polygon_sides as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    if tangent_to_tetra {
        let (p, s) = tangent_directions();
        plane.extend(p);
        dirs.extend(s);
    }
    let dirs = dedup_directions(dirs);
    if !positively_spanning(&dirs) {
        return Err(Error::DegenerateDirections);
    }

    let mut h = HRep::new(QUBIT_DIM);
    // a >= 0, alpha2 >= 0, alpha3 >= 0, y2 >= 0, alpha4 = 1 - a - alpha2 - alpha3 >= 0
    h.add_inequality(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0);
    h.add_inequality(vec![0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0);
    h.add_inequality(vec![0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0], 0.0);
    h.add_inequality(vec![0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.0);
    h.add_inequality(vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 1.0);
    for [c, s] in &plane {
        h.add_inequality(vec![0.0, -1.0, *c, *s, 0.0, 0.0, 0.0, 0.0], 0.0);
    }
    for v in &dirs {
        h.add_inequality(vec![0.0, 0.0, 0.0, 0.0, -1.0, v[0], v[1], v[2]], 0.0);
        // v . (x4, y4, z4) <= alpha4 with x4 = -a - x2 - x3, y4 = -y2 - y3, z4 = -z3
        h.add_inequality(vec![1.0 - v[0], 1.0, -v[0], -v[1], 1.0, -v[0], -v[1], -v[2]], 1.0);
    }
    Ok(h)
}

/// The origin lies strictly inside the convex hull of `dirs`: every unit
/// vector has a positive inner product with some direction. Checked on the
/// directions themselves and on the normals of all direction pairs.
fn positively_spanning(dirs: &[[f64; 3]]) -> bool {
    let d = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut probes: Vec<[f64; 3]> = Vec::new();
    for (i, a) in dirs.iter().enumerate() {
        probes.push([-a[0], -a[1], -a[2]]);
        for b in &dirs[i + 1..] {
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            if d(&c, &c) > 1e-20 {
                probes.push(c);
                probes.push([-c[0], -c[1], -c[2]]);
            }
        }
    }
    // a closed half-space free of directions has a boundary plane that can be
    // rotated onto two directions (or is orthogonal to one)
    let spans = dirs.len() >= 4 && probes.iter().all(|p| dirs.iter().any(|v| d(p, v) > 1e-12));
    let rank3 = dirs.iter().any(|a| dirs.iter().any(|b| dirs.iter().any(|c| {
        let cr = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        d(&cr, c).abs() > 1e-9
    })));
    spans && rank3
}

pub fn vertex_to_quasipovm(v: &[f64]) -> QuasiPovm {
    let m1 = HermitianOperator::from_bloch(v[0], v[0], 0.0, 0.0);
    let m2 = HermitianOperator::from_bloch(v[1], v[2], v[3], 0.0);
    let m3 = HermitianOperator::from_bloch(v[4], v[5], v[6], v[7]);
    let m4 = HermitianOperator::identity(2).sub(&m1).sub(&m2).sub(&m3);
    QuasiPovm { effects: vec![m1, m2, m3, m4] }
}

/// Parameters of a four-outcome qubit POVM with rank-one first effect after
/// rotating the first Bloch vector to `+x` and the second effect into the
/// upper `xy` half-plane.
pub fn qubit_point(m: &Povm) -> Result<Vec<f64>> {
    if m.dim() != 2 || m.num_outcomes() != 4 {
        return Err(Error::DimensionMismatch("expected a four-outcome qubit POVM".into()));
    }
    let b: Vec<[f64; 4]> = m.effects().iter().map(|e| e.bloch()).collect();
    let r = |k: usize| [b[k][1], b[k][2], b[k][3]];
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let n1 = norm(r(0));
    if n1 <= 1e-12 || (n1 - b[0][0]).abs() > 1e-8 {
        return Err(Error::EffectNotRankOne { index: 0, rank: m.effect(0).rank(1e-8) });
    }
    let e1 = [r(0)[0] / n1, r(0)[1] / n1, r(0)[2] / n1];
    let dot = |a: [f64; 3], c: [f64; 3]| a[0] * c[0] + a[1] * c[1] + a[2] * c[2];
    let perp = |v: [f64; 3]| {
        let c = dot(v, e1);
        [v[0] - c * e1[0], v[1] - c * e1[1], v[2] - c * e1[2]]
    };
    let fallback = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e2 = [r(1), r(2), fallback].into_iter().map(perp).find(|p| norm(*p) > 1e-12).expect("fallback is transverse");
    let e2 = unit(e2);
    let e3 = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
    let coords = |k: usize| [dot(r(k), e1), dot(r(k), e2), dot(r(k), e3)];
    let (c2, c3) = (coords(1), coords(2));
    Ok(vec![b[0][0], b[1][0], c2[0], c2[1].max(0.0), b[2][0], c3[0], c3[1], c3[2]])
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub t_delta: f64,
    pub argmin: Vec<f64>,
    pub vertex_count: usize,
    #[serde(skip)]
    pub vertices: Vec<Vec<f64>>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl ScanResult {
    /// One line per vertex: coordinates then visibility.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let dim = self.vertices.first().map_or(0, |v| v.len());
        let header: Vec<String> = (0..dim).map(|k| format!("v{k}")).chain(["t".to_string()]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (v, t) in self.vertices.iter().zip(&self.values) {
            let cells: Vec<String> = v.iter().chain([t]).map(|x| format!("{x:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Evaluates `f` on every vertex with `jobs` worker threads and returns the
/// minimum (ties broken by the lexicographically smallest vertex).
pub(crate) fn scan_with<F>(vertices: Vec<Vec<f64>>, jobs: usize, f: F) -> Result<ScanResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if vertices.is_empty() {
        return Err(Error::OutOfRange("polytope has no vertices".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let values: Vec<f64> = pool.install(|| vertices.par_iter().map(|v| f(v)).collect::<Result<Vec<f64>>>())?;
    let mut best = 0;
    for k in 1..values.len() {
        let better = values[k] < values[best]
            || (values[k] == values[best] && lex_cmp(&vertices[k], &vertices[best]) == std::cmp::Ordering::Less);
        if better {
            best = k;
        }
    }
    Ok(ScanResult {
        t_delta: values[best],
        argmin: vertices[best].clone(),
        vertex_count: vertices.len(),
        vertices,
        values,
    })
}

/// Two-outcome visibility of a qubit quasi-POVM.
pub fn quasi_visibility(q: &QuasiPovm) -> Result<f64> {
    let psd = q.min_eigenvalue() >= 0.0;
    if psd && Povm::new_unchecked(q.dim(), q.effects.clone()).sufficient_simulable() {
        return Ok(1.0);
    }
    Ok(m_outcome_program(q.dim(), &q.effects, 2, &SolverOptions::default())?.t_star)
}

/// `t_Delta`: the smallest two-outcome visibility over the polytope's
/// vertices, a lower bound on the worst-case qubit visibility.
pub fn scan_lower_bound(h: &HRep, jobs: usize) -> Result<ScanResult> {
    let vrep = enumerate_vertices(h)?;
    scan_with(vrep.vertices, jobs, |v| quasi_visibility(&vertex_to_quasipovm(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::tetrahedral;
    use crate::random::{random_rank_one_povm, rng};

    #[test]
    fn direction_sets() {
        assert_eq!(direction_set("octahedron").unwrap().len(), 6);
        assert_eq!(direction_set("icosahedron").unwrap().len(), 12);
        assert_eq!(direction_set("dodecahedron").unwrap().len(), 20);
        assert_eq!(direction_set("truncated-icosahedron").unwrap().len(), 60);
        assert_eq!(direction_set("truncated-icosahedron+dual").unwrap().len(), 92);
        assert!(matches!(
            build_qubit_polytope(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 4, false),
            Err(Error::DegenerateDirections)
        ));
    }

    #[test]
    fn octahedron_instance() {
        let cfg = Preset::Octahedron.config();
        let h = build_qubit_polytope(&cfg.directions, cfg.polygon_sides, cfg.tangent_to_tetra).unwrap();
        let v1 = enumerate_vertices(&h).unwrap();
        let v2 = enumerate_vertices(&h).unwrap();
        assert_eq!(v1.vertices.len(), v2.vertices.len());
        assert!(!v1.vertices.is_empty());
        for v in &v1.vertices {
            assert!(h.violation(v) <= 1e-9);
            assert!(vertex_to_quasipovm(v).normalization_defect() < 1e-12);
        }
        let corner = vertex_to_quasipovm(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(corner.effects[0].distance(&HermitianOperator::from_bloch(0.5, 0.5, 0.0, 0.0)) < 1e-15);
    }

    #[test]
    fn rotated_tetra_is_on_the_polytope() {
        let p = rotated_tetra_point();
        let q = vertex_to_quasipovm(&p);
        let povm = q.to_povm().unwrap();
        let tetra = tetrahedral();
        // same spectrum and Gram matrix as the tetrahedral POVM
        for i in 0..4 {
            for j in 0..4 {
                assert!((povm.effect(i).inner(povm.effect(j)) - tetra.effect(i).inner(tetra.effect(j))).abs() < 1e-14);
            }
        }
        let p2 = qubit_point(&tetra).unwrap();
        assert!(vertex_to_quasipovm(&p2).to_povm().unwrap().distance(&povm) < 1e-12);
        let cfg = Preset::Desk.config();
        let h = build_qubit_polytope(&cfg.directions, cfg.polygon_sides, true).unwrap();
        assert!(h.violation(&p).abs() < 1e-12);
    }

    #[test]
    fn containment() {
        let mut r = rng(21);
        let cfg = Preset::Octahedron.config();
        let h = build_qubit_polytope(&cfg.directions, cfg.polygon_sides, true).unwrap();
        for _ in 0..200 {
            let m = random_rank_one_povm(&mut r, 2, 4);
            assert!(h.contains(&qubit_point(&m).unwrap(), 1e-9));
        }
    }

    #[test]
    fn single_point_polytope() {
        let mut h = HRep::new(QUBIT_DIM);
        for (k, x) in rotated_tetra_point().into_iter().enumerate() {
            let mut a = vec![0.0; QUBIT_DIM];
            a[k] = 1.0;
            h.add_equality(a, x);
        }
        h.add_inequality(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0);
        let s = scan_lower_bound(&h, 1).unwrap();
        assert_eq!(s.vertex_count, 1);
        assert!((s.t_delta - (2.0f64 / 3.0).sqrt()).abs() < 1e-5);
    }
}
