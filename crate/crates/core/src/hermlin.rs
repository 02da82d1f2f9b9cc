//! Small dense complex linear algebra: Hermitian operators, spectra, PSD
//! tests and orthonormal completion.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Dense complex matrix (column-major storage, any shape).
pub type ComplexMatrix = DMatrix<C64>;
/// Dense complex column vector.
pub type ComplexVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Square Hermitian matrix. The stored matrix is exactly Hermitian: the
/// constructor checks the deviation and then symmetrizes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().hermiticity)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = max_abs(&(&matrix - matrix.adjoint()));
        if deviation > tol || matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonHermitianInput { deviation });
        }
        Ok(Self::symmetrized(matrix))
    }

    /// Wraps `(A + A^dagger) / 2` without checking. Use for matrices that are
    /// Hermitian by construction.
    pub fn symmetrized(matrix: ComplexMatrix) -> Self {
        let adj = matrix.adjoint();
        Self { matrix: (matrix + adj).scale(0.5) }
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim, dim) }
    }

    /// `|v><v|` for a (not necessarily normalized) vector.
    pub fn outer(v: &ComplexVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix - &other.matrix }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self { matrix: &self.matrix + other.matrix.scale(s) }
    }

    /// `U A U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::symmetrized(u * &self.matrix * u.adjoint())
    }

    /// Hilbert-Schmidt inner product `tr(A B)`; real for Hermitian inputs.
    pub fn inner(&self, other: &Self) -> f64 {
        hs_inner(&self.matrix, &other.matrix).re
    }

    /// Max-abs entrywise distance.
    pub fn distance(&self, other: &Self) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn eig(&self) -> EigenDecomposition {
        eig_hermitian(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let e = self.eig();
        *e.eigenvalues.last().unwrap()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig().eigenvalues[0]
    }

    /// Numerical rank: eigenvalues above `cutoff * max(1, |lambda|_max)`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.eig().rank(cutoff)
    }

    /// Coordinates in the basis `I, sigma_x, sigma_y, sigma_z` for qubits:
    /// `A = a I + x sigma_x + y sigma_y + z sigma_z`.
    pub fn bloch(&self) -> [f64; 4] {
        assert_eq!(self.dim(), 2, "Bloch coordinates only exist for qubits");
        let m = &self.matrix;
        let a = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let z = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        let x = m[(1, 0)].re;
        let y = m[(1, 0)].im;
        [a, x, y, z]
    }

    /// `a I + x sigma_x + y sigma_y + z sigma_z`.
    pub fn from_bloch(a: f64, x: f64, y: f64, z: f64) -> Self {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::new(a + z, 0.0), C64::new(x, -y), C64::new(x, y), C64::new(a - z, 0.0)],
        );
        Self { matrix: m }
    }
}

/// `tr(A B)` for arbitrary square matrices.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Spectral decomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> ComplexVector {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        let scale = self.eigenvalues.iter().fold(1.0_f64, |a, l| a.max(l.abs()));
        self.eigenvalues.iter().filter(|l| **l > cutoff * scale).count()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..n {
            let s = f(self.eigenvalues[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        HermitianOperator::symmetrized(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|l| l)
    }

    /// Orthonormal basis of the span of eigenvectors above the cutoff.
    pub fn support(&self, cutoff: f64) -> ComplexMatrix {
        let r = self.rank(cutoff);
        self.eigenvectors.columns(0, r).into_owned()
    }
}

/// Hermitian eigendecomposition, eigenvalues descending.
pub fn eig_hermitian(a: &HermitianOperator) -> EigenDecomposition {
    let n = a.dim();
    let eig = SymmetricEigen::new(a.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    EigenDecomposition { eigenvalues, eigenvectors }
}

/// Checked variant: rejects matrices that are not Hermitian within the default
/// tolerance.
pub fn eig_checked(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    Ok(eig_hermitian(&HermitianOperator::new(a.clone())?))
}

pub fn is_psd(a: &HermitianOperator, tol: f64) -> bool {
    a.min_eigenvalue() >= -tol
}

/// Largest deviation of `V^dagger V` from the identity.
pub fn orthonormality_defect(v: &ComplexMatrix) -> f64 {
    let k = v.ncols();
    max_abs(&(v.adjoint() * v - ComplexMatrix::identity(k, k)))
}

/// Extends `k` orthonormal columns in `C^n` to an `n x n` unitary. Missing
/// columns come from Gram-Schmidt on the canonical basis vectors taken in
/// index order; candidates whose residual norm falls below `1e-8` are skipped.
pub fn complete_to_unitary(columns: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = columns.nrows();
    let k = columns.ncols();
    if k > n {
        return Err(Error::DimensionMismatch(format!("{k} columns in C^{n}")));
    }
    let deviation = orthonormality_defect(columns);
    if deviation > Tolerances::default().orthonormality {
        return Err(Error::ColumnsNotOrthonormal { deviation });
    }
    let mut basis: Vec<ComplexVector> = (0..k).map(|c| columns.column(c).into_owned()).collect();
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = ComplexVector::zeros(n);
        v[e] = ONE;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm < 1e-8 {
            continue;
        }
        basis.push(v / C64::new(norm, 0.0));
    }
    debug_assert_eq!(basis.len(), n);
    Ok(ComplexMatrix::from_columns(&basis))
}

/// Tensor (Kronecker) product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Pauli matrices `sigma_x, sigma_y, sigma_z`.
pub fn paulis() -> [ComplexMatrix; 3] {
    let i = C64::new(0.0, 1.0);
    [
        ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        ComplexMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// Real basis of the `d^2`-dimensional space of `d x d` Hermitian matrices:
/// diagonal units first, then `E_kl + E_lk` and `i(E_lk - E_kl)` for `k < l`.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        out.push(m);
    }
    for k in 0..d {
        for l in k + 1..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re[(k, l)] = ONE;
            re[(l, k)] = ONE;
            out.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im[(k, l)] = C64::new(0.0, -1.0);
            im[(l, k)] = C64::new(0.0, 1.0);
            out.push(im);
        }
    }
    out
}

/// Real basis of the `d^2 - 1` traceless Hermitian matrices: the off-diagonal
/// part of [`hermitian_basis`] plus `E_kk - E_{d-1,d-1}` for `k < d - 1`.
pub fn traceless_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d - 1);
    for k in 0..d.saturating_sub(1) {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        m[(d - 1, d - 1)] = -ONE;
        out.push(m);
    }
    out.extend(hermitian_basis(d).into_iter().skip(d));
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(a: &ComplexMatrix) -> Vec<f64> {
    let d = a.nrows();
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(a[(k, k)].re);
    }
    for k in 0..d {
        for l in k + 1..d {
            out.push(a[(l, k)].re);
            out.push(a[(l, k)].im);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_unitary, rng};
    use approx::assert_abs_diff_eq;

    fn sz() -> HermitianOperator {
        HermitianOperator::new(paulis()[2].clone()).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let e = HermitianOperator::identity(3).eig();
        for l in e.eigenvalues {
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sigma_z_spectrum_and_vectors() {
        let e = sz().eig();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[(0, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[(1, 1)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_bloch_effect_spectrum() {
        // (1/4)(I + n.sigma): characteristic polynomial l^2 - l/2 + (1 - |n|^2)/16
        let n = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        let a = HermitianOperator::from_bloch(0.25, 0.25 * n[0], 0.25 * n[1], 0.25 * n[2]);
        let e = a.eig();
        assert_abs_diff_eq!(e.eigenvalues[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 0.0, epsilon = 1e-14);
        assert!(is_psd(&a, 1e-9));
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&HermitianOperator::identity(4), 1e-9));
        assert!(!is_psd(&sz(), 1e-9));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn reconstruction_random() {
        let mut r = rng(7);
        for d in 1..=8 {
            let a = random_hermitian(&mut r, d);
            let e = a.eig();
            assert!(e.reconstruct().distance(&a) <= 1e-10);
            assert!(orthonormality_defect(&e.eigenvectors) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn trace_inner_product_is_real() {
        let mut r = rng(8);
        let a = random_hermitian(&mut r, 4);
        let b = random_hermitian(&mut r, 4);
        assert!(hs_inner(a.matrix(), b.matrix()).im.abs() <= 1e-12);
        assert_abs_diff_eq!(a.inner(&b), b.inner(&a), epsilon = 1e-12);
    }

    #[test]
    fn completion_examples() {
        let mut e0 = ComplexMatrix::zeros(2, 1);
        e0[(0, 0)] = ONE;
        let u = complete_to_unitary(&e0).unwrap();
        assert!(orthonormality_defect(&u) <= 1e-10);
        assert_eq!(u.column(0), e0.column(0));

        let mut r = rng(3);
        let full = random_unitary(&mut r, 3);
        let same = complete_to_unitary(&full).unwrap();
        assert!(max_abs(&(&same - &full)) == 0.0);

        let u4 = random_unitary(&mut r, 4);
        let half = u4.columns(0, 2).into_owned();
        let done = complete_to_unitary(&half).unwrap();
        assert!(orthonormality_defect(&done) <= 1e-10);
        assert!(max_abs(&(done.columns(0, 2).into_owned() - half)) == 0.0);
    }

    #[test]
    fn completion_rejects_non_orthonormal() {
        let m = ComplexMatrix::from_element(3, 2, ONE);
        assert!(matches!(complete_to_unitary(&m), Err(Error::ColumnsNotOrthonormal { .. })));
    }

    #[test]
    fn bases_have_expected_sizes() {
        for d in 1..5 {
            assert_eq!(hermitian_basis(d).len(), d * d);
            assert_eq!(traceless_basis(d).len(), d * d - 1);
            for t in traceless_basis(d) {
                assert!(t.trace().norm() < 1e-15);
            }
        }
        let mut r = rng(1);
        let a = random_hermitian(&mut r, 3);
        let c = hermitian_coords(a.matrix());
        let back = hermitian_basis(3)
            .iter()
            .zip(&c)
            .fold(ComplexMatrix::zeros(3, 3), |acc, (b, x)| acc + b.scale(*x));
        assert!(max_abs(&(back - a.matrix())) < 1e-14);
    }

    #[test]
    fn bloch_round_trip() {
        let a = HermitianOperator::from_bloch(0.3, 0.1, -0.2, 0.05);
        let [s, x, y, z] = a.bloch();
        assert_abs_diff_eq!(s, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(x, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(y, -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(z, 0.05, epsilon = 1e-15);
        let [sx, sy, sz] = paulis();
        let direct = ComplexMatrix::identity(2, 2).scale(0.3) + sx.scale(0.1) + sy.scale(-0.2) + sz.scale(0.05);
        assert!(max_abs(&(direct - a.matrix())) < 1e-15);
    }
}
