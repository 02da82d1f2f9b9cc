//! Python bindings for `povmsim`.
//!
//! Matrices cross the boundary as nested lists of Python `complex`; results
//! that have a canonical JSON form can also be fetched as JSON text.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use povmsim::polytope::{build_qubit_polytope, scan_lower_bound, werner_bound as core_werner, Preset};
use povmsim::povm::{fixture as core_fixture, protocol_inverse_d, protocol_tetra_optimal};
use povmsim::simulability::{strategy_from_certificate, visibility_m_outcome, visibility_qutrit_projective, VisibilityResult};
use povmsim::{decompose, io, naimark, ComplexMatrix, Error, HermitianOperator, Tolerances};

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

type Matrix = Vec<Vec<Complex64>>;

fn matrix_from_rows(rows: &Matrix) -> PyResult<ComplexMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("effects must be square matrices"));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &ComplexMatrix) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "Povm", module = "povmsim_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPovm {
    inner: povmsim::Povm,
}

#[pymethods]
impl PyPovm {
    #[new]
    #[pyo3(signature = (effects, tol = None))]
    fn new(effects: Vec<Matrix>, tol: Option<f64>) -> PyResult<Self> {
        let mut t = Tolerances::default();
        if let Some(x) = tol {
            t.hermiticity = x;
            t.psd = x;
            t.normalization = x;
        }
        let dim = effects.first().map_or(0, Vec::len);
        let ops = effects
            .iter()
            .map(|e| HermitianOperator::with_tolerance(matrix_from_rows(e)?, t.hermiticity).map_err(to_py))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyPovm { inner: povmsim::Povm::validate(dim, ops, &t).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPovm { inner: io::read_povm(text, &Tolerances::default()).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        io::write_povm(&self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_outcomes(&self) -> usize {
        self.inner.num_outcomes()
    }

    fn effects(&self) -> Vec<Matrix> {
        self.inner.effects().iter().map(|e| matrix_to_rows(e.matrix())).collect()
    }

    fn depolarize(&self, t: f64) -> PyResult<Self> {
        Ok(PyPovm { inner: self.inner.depolarize(t).map_err(to_py)? })
    }

    fn distance(&self, other: &PyPovm) -> f64 {
        self.inner.distance(&other.inner)
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn is_projective(&self, tol: f64) -> bool {
        self.inner.is_projective(tol)
    }

    fn probabilities(&self, rho: Matrix) -> PyResult<Vec<f64>> {
        let rho = HermitianOperator::new(matrix_from_rows(&rho)?).map_err(to_py)?;
        if rho.dim() != self.inner.dim() {
            return Err(PyValueError::new_err("state dimension does not match"));
        }
        Ok(self.inner.probabilities(&rho))
    }

    fn __len__(&self) -> usize {
        self.inner.num_outcomes()
    }

    fn __repr__(&self) -> String {
        format!("Povm(dim={}, outcomes={})", self.inner.dim(), self.inner.num_outcomes())
    }
}

#[pyclass(name = "Visibility", module = "povmsim_py", frozen)]
struct PyVisibility {
    inner: VisibilityResult,
    povm: povmsim::Povm,
}

#[pymethods]
impl PyVisibility {
    #[getter]
    fn t_star(&self) -> f64 {
        self.inner.t_star
    }

    #[getter]
    fn relaxation(&self) -> bool {
        self.inner.relaxation
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.diagnostics.status)
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.iterations
    }

    fn reconstruction_error(&self) -> f64 {
        self.inner.reconstruction_error(&self.povm)
    }

    /// Explicit strategy realizing the depolarized POVM at `t_star`.
    fn strategy(&self) -> PyResult<PyStrategy> {
        Ok(PyStrategy { inner: strategy_from_certificate(&self.povm, &self.inner).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        io::canonical_json(&io::visibility_to_json(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Visibility(t_star={:.10}, m={})", self.inner.t_star, self.inner.m)
    }
}

#[pyclass(name = "Strategy", module = "povmsim_py", frozen)]
struct PyStrategy {
    inner: povmsim::SimulationStrategy,
}

#[pymethods]
impl PyStrategy {
    fn apply(&self) -> PyPovm {
        PyPovm { inner: self.inner.apply() }
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn members(&self) -> Vec<PyPovm> {
        self.inner.members().iter().map(|m| PyPovm { inner: m.clone() }).collect()
    }

    fn depolarize(&self, s: f64) -> PyResult<Self> {
        Ok(PyStrategy { inner: self.inner.depolarize(s).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        io::canonical_json(&io::strategy_to_json(&self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Dilation", module = "povmsim_py", frozen)]
struct PyDilation {
    inner: naimark::Dilation,
    povm: povmsim::Povm,
}

#[pymethods]
impl PyDilation {
    #[getter]
    fn system_dim(&self) -> usize {
        self.inner.system_dim()
    }

    #[getter]
    fn ancilla_dim(&self) -> usize {
        self.inner.ancilla_dim()
    }

    fn realized(&self) -> PyPovm {
        PyPovm { inner: self.inner.realized() }
    }

    /// Largest outcome-probability deviation over `trials` random states.
    #[pyo3(signature = (trials = 100, seed = 0))]
    fn verify(&self, trials: usize, seed: u64) -> f64 {
        naimark::verify_dilation(&self.povm, &self.inner, trials, seed)
    }

    fn to_json(&self) -> String {
        io::canonical_json(&io::dilation_to_json(&self.inner))
    }
}

#[pyfunction]
fn fixture(name: &str) -> PyResult<PyPovm> {
    Ok(PyPovm { inner: core_fixture(name).map_err(to_py)? })
}

#[pyfunction]
#[pyo3(signature = (povm, m = 2))]
fn visibility(povm: &PyPovm, m: usize) -> PyResult<PyVisibility> {
    let inner = visibility_m_outcome(&povm.inner, m).map_err(to_py)?;
    Ok(PyVisibility { inner, povm: povm.inner.clone() })
}

#[pyfunction]
fn qutrit_visibility(povm: &PyPovm) -> PyResult<PyVisibility> {
    let inner = visibility_qutrit_projective(&povm.inner).map_err(to_py)?;
    Ok(PyVisibility { inner, povm: povm.inner.clone() })
}

#[pyfunction]
fn tetra_optimal() -> PyStrategy {
    PyStrategy { inner: protocol_tetra_optimal() }
}

#[pyfunction]
fn inverse_d(povm: &PyPovm) -> PyResult<PyStrategy> {
    Ok(PyStrategy { inner: protocol_inverse_d(&povm.inner).map_err(to_py)? })
}

#[pyfunction]
#[pyo3(signature = (povm, trace_one_qutrit = false))]
fn decompose_povm(povm: &PyPovm, trace_one_qutrit: bool) -> PyResult<Vec<(f64, PyPovm)>> {
    let parts = if trace_one_qutrit {
        decompose::decompose_trace_one_qutrit(&povm.inner)
    } else {
        decompose::decompose_extremal(&povm.inner)
    }
    .map_err(to_py)?;
    Ok(parts.into_iter().map(|(w, m)| (w, PyPovm { inner: m })).collect())
}

#[pyfunction]
fn dilate(povm: &PyPovm) -> PyResult<PyDilation> {
    let inner = naimark::dilate(&povm.inner, None).map_err(to_py)?;
    Ok(PyDilation { inner, povm: povm.inner.clone() })
}

#[pyfunction]
fn werner_bound(t: f64, p_star: f64) -> PyResult<f64> {
    core_werner(t, p_star).map_err(to_py)
}

/// Lower bound on the worst-case qubit visibility for a named preset.
/// Returns `(t_delta, argmin, vertex_count)`.
#[pyfunction]
#[pyo3(signature = (preset = "octahedron", jobs = 1))]
fn polytope_bound(py: Python<'_>, preset: &str, jobs: usize) -> PyResult<(f64, Vec<f64>, usize)> {
    let p = Preset::from_name(preset).map_err(to_py)?;
    let cfg = p.config();
    let run = || -> povmsim::Result<_> {
        let h = build_qubit_polytope(&cfg.directions, cfg.polygon_sides, cfg.tangent_to_tetra)?;
        scan_lower_bound(&h, jobs)
    };
    let r = py.detach(run).map_err(to_py)?;
    Ok((r.t_delta, r.argmin, r.vertex_count))
}

#[pymodule]
fn povmsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPovm>()?;
    m.add_class::<PyVisibility>()?;
    m.add_class::<PyStrategy>()?;
    m.add_class::<PyDilation>()?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(qutrit_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(tetra_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_d, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_povm, m)?)?;
    m.add_function(wrap_pyfunction!(dilate, m)?)?;
    m.add_function(wrap_pyfunction!(werner_bound, m)?)?;
    m.add_function(wrap_pyfunction!(polytope_bound, m)?)?;
    Ok(())
}
