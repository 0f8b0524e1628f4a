//! Python bindings: matrices, problems, solver runs, the shrinkage and
//! Bregman toolkit, convergence constants and metrics.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use shsk::analysis::{self, RateCertificate};
use shsk::bregman;
use shsk::linalg::RowMatrix;
use shsk::problems::{self, matrix_market};
use shsk::solvers::{run_with, RecordOptions, RunOutcome, StopCriteria};
use shsk::{Error, Problem, ProblemMeta, RegParam, WeightStrategy};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn lambda(value: f64) -> PyResult<RegParam> {
    RegParam::new(value).map_err(py_err)
}

#[pyclass(name = "Matrix", module = "pyshsk", frozen)]
struct PyMatrix {
    inner: Arc<RowMatrix>,
}

#[pymethods]
impl PyMatrix {
    /// Builds a matrix from a list of equal-length rows.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = RowMatrix::from_rows(&rows).map_err(py_err)?;
        Ok(PyMatrix { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: Arc::new(RowMatrix::identity(n).map_err(py_err)?),
        })
    }

    /// Zero-based `(row, col, value)` entries; duplicates are summed.
    #[staticmethod]
    fn from_triplets(nrows: usize, ncols: usize, entries: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: Arc::new(RowMatrix::from_triplets(nrows, ncols, &entries).map_err(py_err)?),
        })
    }

    #[staticmethod]
    fn read_matrix_market(path: &str) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: Arc::new(matrix_market::read_matrix_market(path).map_err(py_err)?),
        })
    }

    fn write_matrix_market(&self, path: &str) -> PyResult<()> {
        matrix_market::write_matrix_market(path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn fro_norm_sq(&self) -> f64 {
        self.inner.fro_norm_sq()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&x).map_err(py_err)
    }

    fn transpose_apply(&self, eta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.transpose_apply(&eta).map_err(py_err)
    }

    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.inner.triplets()
    }

    /// `(sigma_max, sigma_min, rank)` from a dense SVD.
    fn spectral_summary(&self) -> PyResult<(f64, f64, usize)> {
        let s = self.inner.spectral_summary().map_err(py_err)?;
        Ok((s.sigma_max, s.sigma_min, s.rank))
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{}, nnz={})", self.inner.nrows(), self.inner.ncols(), self.inner.nnz())
    }
}

#[pyclass(name = "Problem", module = "pyshsk", frozen)]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (matrix, rhs, lam = problems::DEFAULT_LAMBDA, reference = None))]
    fn new(matrix: &PyMatrix, rhs: Vec<f64>, lam: f64, reference: Option<Vec<f64>>) -> PyResult<Self> {
        let meta = ProblemMeta {
            label: "python".into(),
            generator: "user".into(),
            ..Default::default()
        };
        let inner = Problem::new(Arc::clone(&matrix.inner), rhs, lambda(lam)?, reference, meta).map_err(py_err)?;
        Ok(PyProblem { inner })
    }

    /// Standard Gaussian matrix with a planted sparse solution.
    #[staticmethod]
    #[pyo3(signature = (m, n, nnz = None, seed = 0))]
    fn gaussian(m: usize, n: usize, nnz: Option<usize>, seed: u64) -> PyResult<Self> {
        let nnz = nnz.unwrap_or_else(|| problems::default_nnz(n));
        Ok(PyProblem {
            inner: problems::gen_gaussian(m, n, nnz, seed).map_err(py_err)?,
        })
    }

    /// Plants a sparse solution for `matrix`.
    #[staticmethod]
    #[pyo3(signature = (matrix, nnz = None, seed = 0, label = "planted"))]
    fn planted(matrix: &PyMatrix, nnz: Option<usize>, seed: u64, label: &str) -> PyResult<Self> {
        let nnz = nnz.unwrap_or_else(|| problems::default_nnz(matrix.inner.ncols()));
        Ok(PyProblem {
            inner: problems::plant_solution(Arc::clone(&matrix.inner), nnz, seed, label).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load_bundle(dir: &str) -> PyResult<Self> {
        Ok(PyProblem {
            inner: Problem::load_bundle(dir).map_err(py_err)?,
        })
    }

    fn save_bundle(&self, dir: &str) -> PyResult<()> {
        self.inner.save_bundle(dir).map_err(py_err)
    }

    fn with_lambda(&self, lam: f64) -> PyResult<Self> {
        Ok(PyProblem {
            inner: self.inner.clone().with_lambda(lambda(lam)?),
        })
    }

    fn with_noise(&self, level: f64, seed: u64) -> PyResult<Self> {
        Ok(PyProblem {
            inner: self.inner.clone().with_noise(level, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn matrix(&self) -> PyMatrix {
        PyMatrix {
            inner: self.inner.shared_matrix(),
        }
    }

    #[getter]
    fn rhs(&self) -> Vec<f64> {
        self.inner.rhs().to_vec()
    }

    #[getter]
    fn reference(&self) -> Option<Vec<f64>> {
        self.inner.reference().map(<[f64]>::to_vec)
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda().value()
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({}x{}, lambda={}, label={:?})",
            self.inner.nrows(),
            self.inner.ncols(),
            self.inner.lambda().value(),
            self.inner.meta().label
        )
    }
}

#[pyclass(name = "SolveResult", module = "pyshsk", frozen, get_all)]
struct PySolveResult {
    strategy: String,
    x: Vec<f64>,
    x_star: Vec<f64>,
    iterations: usize,
    stop_reason: String,
    final_rse: Option<f64>,
    elapsed: f64,
    residual_norms: Vec<f64>,
    rse: Vec<Option<f64>>,
    bregman: Vec<Option<f64>>,
    history_csv: String,
}

impl PySolveResult {
    fn from_outcome(strategy: String, out: RunOutcome) -> Self {
        let recs = &out.history.records;
        PySolveResult {
            strategy,
            iterations: out.iterations(),
            stop_reason: out.stop_reason.to_string(),
            final_rse: out.final_rse(),
            elapsed: out.elapsed,
            residual_norms: recs.iter().map(|r| r.residual_norm).collect(),
            rse: recs.iter().map(|r| r.rse).collect(),
            bregman: recs.iter().map(|r| r.bregman).collect(),
            history_csv: out.history.to_csv(),
            x_star: out.state.x_star().to_vec(),
            x: out.state.into_solution(),
        }
    }
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult({}, iterations={}, stop_reason={}, final_rse={:?})",
            self.strategy, self.iterations, self.stop_reason, self.final_rse
        )
    }
}

/// Runs a strategy (`shskr`, `shskpr`, `greedy`, `rsk`, `cyclic`, `gaussian`).
#[pyfunction]
#[pyo3(signature = (
    problem, strategy, theta = None, seed = 0, max_iters = 100_000, rse_tol = 1e-6, res_tol = 1e-8,
    record_bregman = true
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    strategy: &str,
    theta: Option<f64>,
    seed: u64,
    max_iters: usize,
    rse_tol: f64,
    res_tol: f64,
    record_bregman: bool,
) -> PyResult<PySolveResult> {
    let rule = WeightStrategy::from_name(strategy, theta, seed).map_err(py_err)?;
    let stop = StopCriteria::new(max_iters, rse_tol, res_tol).map_err(py_err)?;
    let label = rule.label();
    let record = RecordOptions {
        bregman: record_bregman,
        selection: false,
    };
    let out = py
        .detach(|| run_with(&problem.inner, rule, &stop, record))
        .map_err(py_err)?;
    Ok(PySolveResult::from_outcome(label, out))
}

#[pyfunction]
fn soft_shrinkage(x_star: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    Ok(bregman::soft_shrinkage(&x_star, lambda(lam)?))
}

#[pyfunction]
fn conjugate_f(x_star: Vec<f64>, lam: f64) -> PyResult<f64> {
    Ok(bregman::conjugate_f(&x_star, lambda(lam)?))
}

#[pyfunction]
fn objective_f(x: Vec<f64>, lam: f64) -> PyResult<f64> {
    Ok(bregman::objective_f(&x, lambda(lam)?))
}

/// `D(x, y)` with subgradient `x_star`; requires `x = S_lambda(x_star)`.
#[pyfunction]
fn bregman_distance(x_star: Vec<f64>, x: Vec<f64>, y: Vec<f64>, lam: f64) -> PyResult<f64> {
    bregman::bregman_distance(&x_star, &x, &y, lambda(lam)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (matrix, n_limit = analysis::DEFAULT_ENUMERATION_LIMIT))]
fn sigma_tilde_min(matrix: &PyMatrix, n_limit: usize) -> PyResult<f64> {
    analysis::sigma_tilde_min(&matrix.inner, n_limit).map_err(py_err)
}

#[pyclass(name = "RateCertificate", module = "pyshsk", frozen, get_all)]
struct PyRateCertificate {
    sigma_tilde_min: f64,
    x_hat_min: f64,
    sigma_max: f64,
    nu: f64,
    q: f64,
    q_hat: f64,
    q_tilde: Option<f64>,
}

#[pymethods]
impl PyRateCertificate {
    fn __repr__(&self) -> String {
        format!(
            "RateCertificate(nu={}, q={}, q_hat={}, q_tilde={:?})",
            self.nu, self.q, self.q_hat, self.q_tilde
        )
    }
}

/// Convergence constants of a problem with a reference solution.
#[pyfunction]
#[pyo3(signature = (problem, n_limit = analysis::DEFAULT_ENUMERATION_LIMIT))]
fn rate_certificate(problem: &PyProblem, n_limit: usize) -> PyResult<PyRateCertificate> {
    let p = &problem.inner;
    let x_hat = p
        .reference()
        .ok_or_else(|| PyValueError::new_err("problem has no reference solution"))?;
    let c = RateCertificate::compute(p.matrix(), x_hat, p.lambda(), n_limit).map_err(py_err)?;
    Ok(PyRateCertificate {
        sigma_tilde_min: c.sigma_tilde_min,
        x_hat_min: c.x_hat_min,
        sigma_max: c.sigma_max,
        nu: c.nu,
        q: c.q,
        q_hat: c.q_hat,
        q_tilde: c.q_tilde,
    })
}

#[pyfunction]
fn rse(x: Vec<f64>, x_hat: Vec<f64>) -> PyResult<f64> {
    problems::rse(&x, &x_hat).map_err(py_err)
}

#[pyfunction]
fn snr(x: Vec<f64>, x_ref: Vec<f64>) -> PyResult<f64> {
    problems::snr(&x, &x_ref).map_err(py_err)
}

#[pymodule]
fn pyshsk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyRateCertificate>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(soft_shrinkage, m)?)?;
    m.add_function(wrap_pyfunction!(conjugate_f, m)?)?;
    m.add_function(wrap_pyfunction!(objective_f, m)?)?;
    m.add_function(wrap_pyfunction!(bregman_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_tilde_min, m)?)?;
    m.add_function(wrap_pyfunction!(rate_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(rse, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add("DEFAULT_LAMBDA", problems::DEFAULT_LAMBDA)?;
    Ok(())
}
