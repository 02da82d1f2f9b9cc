//! SDPA sparse text format.
//!
//! Files follow the standard layout: comment lines starting with `"` or `*`,
//! then the number of variables `m`, the number of blocks, the block sizes,
//! the cost vector `c`, and one line `matno blkno i j value` per upper
//! triangular entry. The program is `minimize c'x` subject to
//! `sum_i x_i F_i - F_0 >= 0`.
//!
//! Three comment lines carry what plain SDPA cannot express; other readers
//! skip them:
//!
//! * `*povmsim sense maximize` when the objective was a maximization (the cost
//!   vector is then stored negated),
//! * `*povmsim hermitian <blk>` for a block holding the real embedding of a
//!   Hermitian LMI,
//! * `*povmsim equalities <blk>` for a diagonal block whose consecutive entry
//!   pairs `a'x - b >= 0`, `b - a'x >= 0` encode the linear equalities.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::problem::{Field, LinearForm, LmiBlock, Sense, SdpProblem};
use crate::error::{Error, Result};

pub fn write_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    let maximize = p.sense() == Sense::Maximize;
    let sign = if maximize { -1.0 } else { 1.0 };
    out.push_str("\"povmsim SDP problem\n");
    if maximize {
        out.push_str("*povmsim sense maximize\n");
    }
    let mut sizes: Vec<i64> = p.blocks().iter().map(|b| b.real_size() as i64).collect();
    for (k, b) in p.blocks().iter().enumerate() {
        if b.field == Field::Hermitian {
            let _ = writeln!(out, "*povmsim hermitian {}", k + 1);
        }
    }
    let neq = p.equalities().len();
    if neq > 0 {
        sizes.push(-2 * neq as i64);
        let _ = writeln!(out, "*povmsim equalities {}", sizes.len());
    }
    let _ = writeln!(out, "{}", p.num_vars());
    let _ = writeln!(out, "{}", sizes.len());
    let _ = writeln!(out, "{}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "{}", p.objective().iter().map(|c| fmt(sign * c)).collect::<Vec<_>>().join(" "));

    let mut entry = |mat: usize, blk: usize, i: usize, j: usize, v: f64| {
        if v != 0.0 {
            let _ = writeln!(out, "{mat} {blk} {} {} {}", i + 1, j + 1, fmt(v));
        }
    };
    for (k, b) in p.blocks().iter().enumerate() {
        let n = b.real_size();
        let mut mats: Vec<(usize, DMatrix<f64>)> = vec![(0, -&b.constant)];
        for (var, f) in &b.terms {
            match mats.iter_mut().find(|(v, _)| *v == var + 1) {
                Some((_, acc)) => *acc += f,
                None => mats.push((var + 1, f.clone())),
            }
        }
        mats.sort_by_key(|(v, _)| *v);
        for (mat, m) in &mats {
            for i in 0..n {
                for j in i..n {
                    entry(*mat, k + 1, i, j, m[(i, j)]);
                }
            }
        }
    }
    if neq > 0 {
        let blk = sizes.len();
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        for (e, (form, rhs)) in p.equalities().iter().enumerate() {
            rows.push((0, 2 * e, *rhs));
            rows.push((0, 2 * e + 1, -rhs));
            let mut coef = vec![0.0; p.num_vars()];
            for &(k, a) in form {
                coef[k] += a;
            }
            for (k, a) in coef.into_iter().enumerate() {
                rows.push((k + 1, 2 * e, a));
                rows.push((k + 1, 2 * e + 1, -a));
            }
        }
        rows.sort_by_key(|(m, i, _)| (*m, *i));
        for (mat, i, v) in rows {
            entry(mat, blk, i, i, v);
        }
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

pub fn read_sdpa(text: &str) -> Result<SdpProblem> {
    let mut maximize = false;
    let mut hermitian = Vec::new();
    let mut eq_block = None;
    let mut body = String::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("*povmsim") {
            let words: Vec<&str> = rest.split_whitespace().collect();
            match words.as_slice() {
                ["sense", "maximize"] => maximize = true,
                ["hermitian", k] => hermitian.push(parse_usize(k)?),
                ["equalities", k] => eq_block = Some(parse_usize(k)?),
                _ => return Err(Error::Parse(format!("unknown directive '{t}'"))),
            }
            continue;
        }
        if t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        body.push_str(t);
        body.push('\n');
    }
    let cleaned: String = body.chars().map(|c| if "{}(),".contains(c) { ' ' } else { c }).collect();
    let mut tokens = cleaned.split_whitespace();
    let mut next = || tokens.next().ok_or_else(|| Error::Parse("unexpected end of SDPA data".into()));

    let m = parse_usize(next()?)?;
    let nblocks = parse_usize(next()?)?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let s: i64 = next()?.parse().map_err(|_| Error::Parse("bad block size".into()))?;
        if s == 0 {
            return Err(Error::Parse("block of size zero".into()));
        }
        sizes.push(s);
    }
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        c.push(parse_f64(next()?)?);
    }
    let mut mats: Vec<Vec<DMatrix<f64>>> =
        sizes.iter().map(|s| vec![DMatrix::zeros(s.unsigned_abs() as usize, s.unsigned_abs() as usize); m + 1]).collect();
    loop {
        let Some(first) = tokens_next_opt(&mut next) else { break };
        let mat = parse_usize(first)?;
        let blk = parse_usize(next()?)?;
        let i = parse_usize(next()?)?;
        let j = parse_usize(next()?)?;
        let v = parse_f64(next()?)?;
        if mat > m || blk == 0 || blk > nblocks {
            return Err(Error::Parse(format!("entry references matrix {mat} of block {blk}")));
        }
        let n = sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > n || j > n || (sizes[blk - 1] < 0 && i != j) {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside block {blk}")));
        }
        let a = &mut mats[blk - 1][mat];
        a[(i - 1, j - 1)] = v;
        a[(j - 1, i - 1)] = v;
    }

    let mut p = SdpProblem::new(m);
    let sign = if maximize { -1.0 } else { 1.0 };
    let form: Vec<(usize, f64)> = c.iter().enumerate().map(|(k, v)| (k, sign * v)).collect();
    p.set_objective(if maximize { Sense::Maximize } else { Sense::Minimize }, &form);
    for (k, ms) in mats.into_iter().enumerate() {
        if eq_block == Some(k + 1) {
            let n = ms[0].nrows();
            if n % 2 != 0 {
                return Err(Error::Parse("equality block must have even size".into()));
            }
            for e in 0..n / 2 {
                let rhs = ms[0][(2 * e, 2 * e)];
                let lf: LinearForm =
                    (0..m).map(|v| (v, ms[v + 1][(2 * e, 2 * e)])).filter(|(_, a)| *a != 0.0).collect();
                p.add_equality(lf, rhs);
            }
            continue;
        }
        let mut it = ms.into_iter();
        let constant = -it.next().expect("constant matrix");
        let terms: Vec<(usize, DMatrix<f64>)> =
            it.enumerate().filter(|(_, f)| f.iter().any(|v| *v != 0.0)).collect();
        let field = if hermitian.contains(&(k + 1)) { Field::Hermitian } else { Field::Real };
        if field == Field::Hermitian && constant.nrows() % 2 != 0 {
            return Err(Error::Parse(format!("hermitian block {} has odd size", k + 1)));
        }
        let dim = if field == Field::Hermitian { constant.nrows() / 2 } else { constant.nrows() };
        p.push_block(LmiBlock { dim, field, constant, terms });
    }
    Ok(p)
}

fn tokens_next_opt<'a>(next: &mut impl FnMut() -> Result<&'a str>) -> Option<&'a str> {
    next().ok()
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("expected a non-negative integer, got '{s}'")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("expected a number, got '{s}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, SolverOptions};

    fn sample() -> SdpProblem {
        let mut p = SdpProblem::new(2);
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        p.add_real_lmi(DMatrix::identity(2, 2), vec![(0, f)]);
        p.add_bounds(1, 0.0, 1.0);
        p.add_equality(vec![(0, 1.0), (1, -1.0)], 0.25);
        p.set_objective(Sense::Maximize, &[(0, 1.0), (1, 0.5)]);
        p
    }

    #[test]
    fn round_trip_preserves_optimum() {
        let p = sample();
        let text = write_sdpa(&p);
        let q = read_sdpa(&text).unwrap();
        assert_eq!(write_sdpa(&q), text);
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&q, &SolverOptions::default()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9);
        assert!((a.objective - 1.375).abs() < 1e-6);
    }

    #[test]
    fn rejects_truncated_input() {
        assert!(read_sdpa("2\n1\n2\n1.0").is_err());
        assert!(read_sdpa("1\n1\n1\n1.0\n0 1 2 2 1.0\n").is_err());
    }
}
