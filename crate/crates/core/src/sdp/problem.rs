use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, HermitianOperator};

/// Scalar field of an LMI block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Affine matrix inequality `F0 + sum_i x_i F_i >= 0`, stored in its real
/// symmetric form (Hermitian blocks are embedded, doubling their size).
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub dim: usize,
    pub field: Field,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBlock {
    /// Size of the real symmetric matrix the solver works with.
    pub fn real_size(&self) -> usize {
        self.constant.nrows()
    }

    /// Evaluates the block at `x` (real symmetric form).
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let mut v = self.constant.clone();
        for (k, f) in &self.terms {
            v += f * x[*k];
        }
        v
    }
}

/// Sparse linear functional `sum_k a_k x_k`.
pub type LinearForm = Vec<(usize, f64)>;

/// Small semidefinite program over free real variables:
/// optimize `c'x` subject to linear equalities and LMI blocks. Scalar
/// inequalities are 1x1 real blocks.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    num_vars: usize,
    sense: Sense,
    objective: Vec<f64>,
    equalities: Vec<(LinearForm, f64)>,
    blocks: Vec<LmiBlock>,
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`. `H >= 0` iff the
/// embedding is PSD; every eigenvalue of `H` appears twice.
pub fn embed_hermitian(h: &ComplexMatrix) -> DMatrix<f64> {
    let d = h.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`] (averaging the redundant copies).
pub fn unembed_hermitian(m: &DMatrix<f64>) -> HermitianOperator {
    let d = m.nrows() / 2;
    let h = ComplexMatrix::from_fn(d, d, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + d, j + d)]);
        let im = 0.5 * (m[(i + d, j)] - m[(i, j + d)]);
        crate::C64::new(re, im)
    });
    HermitianOperator::symmetrized(h)
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            sense: Sense::Minimize,
            objective: vec![0.0; num_vars],
            equalities: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// Appends a fresh variable and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, count: usize) -> std::ops::Range<usize> {
        let start = self.num_vars;
        for _ in 0..count {
            self.add_var();
        }
        start..self.num_vars
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn equalities(&self) -> &[(LinearForm, f64)] {
        &self.equalities
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    pub fn set_objective(&mut self, sense: Sense, form: &[(usize, f64)]) {
        self.sense = sense;
        self.objective = vec![0.0; self.num_vars];
        for &(k, a) in form {
            self.objective[k] += a;
        }
    }

    pub fn add_equality(&mut self, form: LinearForm, rhs: f64) {
        self.equalities.push((form, rhs));
    }

    /// `F0 + sum_i x_i F_i >= 0` over real symmetric matrices.
    pub fn add_real_lmi(&mut self, constant: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>) -> usize {
        let dim = constant.nrows();
        self.blocks.push(LmiBlock { dim, field: Field::Real, constant, terms });
        self.blocks.len() - 1
    }

    /// `F0 + sum_i x_i F_i >= 0` over complex Hermitian matrices.
    pub fn add_hermitian_lmi(&mut self, constant: &ComplexMatrix, terms: &[(usize, ComplexMatrix)]) -> usize {
        let dim = constant.nrows();
        let terms = terms.iter().map(|(k, f)| (*k, embed_hermitian(f))).collect();
        self.blocks.push(LmiBlock { dim, field: Field::Hermitian, constant: embed_hermitian(constant), terms });
        self.blocks.len() - 1
    }

    /// Appends an already assembled block.
    pub fn push_block(&mut self, block: LmiBlock) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// `sum_k a_k x_k >= rhs`.
    pub fn add_scalar_ge(&mut self, form: &[(usize, f64)], rhs: f64) -> usize {
        let terms = form.iter().map(|&(k, a)| (k, DMatrix::from_element(1, 1, a))).collect();
        self.add_real_lmi(DMatrix::from_element(1, 1, -rhs), terms)
    }

    /// `lo <= x_k <= hi`.
    pub fn add_bounds(&mut self, k: usize, lo: f64, hi: f64) {
        self.add_scalar_ge(&[(k, 1.0)], lo);
        self.add_scalar_ge(&[(k, -1.0)], -hi);
    }

    /// Structural checks run before solving.
    pub fn check(&self) -> Result<()> {
        let n = self.num_vars;
        if n == 0 {
            return Err(Error::IllFormedProblem("no variables".into()));
        }
        let mut seen = vec![false; n];
        for (b, block) in self.blocks.iter().enumerate() {
            let m = block.real_size();
            if block.constant.ncols() != m {
                return Err(Error::IllFormedProblem(format!("block {b} is not square")));
            }
            for (k, f) in &block.terms {
                if *k >= n {
                    return Err(Error::IllFormedProblem(format!("block {b} references variable {k}")));
                }
                if f.nrows() != m || f.ncols() != m {
                    return Err(Error::IllFormedProblem(format!("block {b} has a mis-sized coefficient")));
                }
                seen[*k] = true;
            }
        }
        for (form, _) in &self.equalities {
            if form.iter().any(|(k, _)| *k >= n) {
                return Err(Error::IllFormedProblem("equality references an unknown variable".into()));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::IllFormedProblem(format!("variable {k} appears in no cone constraint")));
        }
        Ok(())
    }
}
