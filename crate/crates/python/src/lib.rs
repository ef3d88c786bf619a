//! Python module `csdk_py`. Matrices cross the boundary as nested lists of
//! rows; entries may be int, float or complex.

use csdk::csd::{csd, csd_2x2, CsExtraction, CsdOptions, CsdResult, RankMode};
use csdk::isometry::{dist_to_partial_isometry, stability_report};
use csdk::polar::{polar, PolarMethod};
use csdk::symeig::{symeig, EigMethod};
use csdk::testgen::{TestCase, TestClass};
use csdk::{Error, Matrix, C64};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<C64>>;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Rows) -> PyResult<Matrix> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let data: Vec<C64> = rows.into_iter().flatten().collect();
    Matrix::from_row_major(m, n, &data).map_err(to_py_err)
}

fn to_rows(a: &Matrix) -> Rows {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py_err)
}

/// Result of `csd`; factors are returned as nested lists.
#[pyclass(name = "CsdResult", module = "csdk_py", frozen)]
struct PyCsdResult {
    inner: CsdResult,
    input: Matrix,
}

#[pymethods]
impl PyCsdResult {
    #[getter]
    fn u1(&self) -> Rows {
        to_rows(&self.inner.u1)
    }

    #[getter]
    fn u2(&self) -> Rows {
        to_rows(&self.inner.u2)
    }

    #[getter]
    fn v1(&self) -> Rows {
        to_rows(&self.inner.v1)
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c.clone()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.s.clone()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn branch(&self) -> &'static str {
        self.inner.branch.as_str()
    }

    /// `[U1 C V1^*; U2 S V1^*]`
    fn reconstruct(&self) -> Rows {
        to_rows(&self.inner.reconstruct())
    }

    /// Residual and orthogonality measures against the input matrix.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = stability_report(&self.input, &self.inner).map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("residual_2norm", r.residual_2norm)?;
        d.set_item("d_of_a", r.d_of_a)?;
        d.set_item("scaled_residual", r.scaled_residual)?;
        d.set_item("orth_u1", r.orth_u1)?;
        d.set_item("orth_u2", r.orth_u2)?;
        d.set_item("orth_v1", r.orth_v1)?;
        d.set_item("cs_identity_err", r.cs_identity_err)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("CsdResult(k={}, rank={}, branch='{}')", self.inner.k(), self.inner.rank, self.branch())
    }
}

fn options(method: &str, rank_mode: &str, epsilon: f64, cs_extraction: &str, postprocess: bool) -> PyResult<CsdOptions> {
    Ok(CsdOptions {
        polar_method: parse::<PolarMethod>(method)?,
        rank_mode: parse::<RankMode>(rank_mode)?,
        epsilon,
        cs_extraction: parse::<CsExtraction>(cs_extraction)?,
        postprocess,
        ..CsdOptions::default()
    })
}

/// CS decomposition of the partial isometry `a = [A1; A2]`, `A1` the first `m1` rows.
#[allow(clippy::too_many_arguments)]
#[pyfunction(name = "csd")]
#[pyo3(signature = (a, m1, method="qdwh", rank_mode="auto", epsilon=1e-15, cs_extraction="diag", postprocess=true))]
fn py_csd(
    py: Python<'_>,
    a: Rows,
    m1: usize,
    method: &str,
    rank_mode: &str,
    epsilon: f64,
    cs_extraction: &str,
    postprocess: bool,
) -> PyResult<PyCsdResult> {
    let a = to_matrix(a)?;
    let opts = options(method, rank_mode, epsilon, cs_extraction, postprocess)?;
    let inner = py.detach(|| csd(&a, m1, &opts)).map_err(to_py_err)?;
    Ok(PyCsdResult { inner, input: a })
}

/// Complete CSD of a `2n x 2n` unitary; returns `(left, v2)`.
#[pyfunction(name = "csd_2x2")]
#[pyo3(signature = (a, method="qdwh"))]
fn py_csd_2x2(py: Python<'_>, a: Rows, method: &str) -> PyResult<(PyCsdResult, Rows)> {
    let a = to_matrix(a)?;
    let n = a.nrows() / 2;
    let opts = CsdOptions::with_method(parse(method)?);
    let r = py.detach(|| csd_2x2(&a, &opts)).map_err(to_py_err)?;
    let v2 = to_rows(&r.v2);
    Ok((
        PyCsdResult {
            inner: r.left,
            input: a.cols_range(0, n),
        },
        v2,
    ))
}

/// Polar decomposition `a = w h`; returns `(w, h)`.
#[pyfunction(name = "polar")]
#[pyo3(signature = (a, method="qdwh"))]
fn py_polar(py: Python<'_>, a: Rows, method: &str) -> PyResult<(Rows, Rows)> {
    let a = to_matrix(a)?;
    let method = parse(method)?;
    let f = py.detach(|| polar(&a, method)).map_err(to_py_err)?;
    Ok((to_rows(&f.w), to_rows(&f.h)))
}

/// Hermitian eigendecomposition; returns ascending `(eigenvalues, eigenvectors)`.
#[pyfunction(name = "symeig")]
#[pyo3(signature = (b, method="sdc"))]
fn py_symeig(py: Python<'_>, b: Rows, method: &str) -> PyResult<(Vec<f64>, Rows)> {
    let b = to_matrix(b)?;
    let method: EigMethod = parse(method)?;
    let r = py.detach(|| symeig(&b, method)).map_err(to_py_err)?;
    Ok((r.lambda, to_rows(&r.v)))
}

#[pyfunction(name = "dist_to_partial_isometry")]
fn py_dist(a: Rows) -> PyResult<f64> {
    dist_to_partial_isometry(&to_matrix(a)?).map_err(to_py_err)
}

/// Seeded `2n x n` test matrix of class 1-4.
#[pyfunction(name = "test_matrix")]
#[pyo3(signature = (class_id, n, seed, noisy=false))]
fn py_test_matrix(class_id: u8, n: usize, seed: u64, noisy: bool) -> PyResult<Rows> {
    let class = TestClass::from_id(class_id).map_err(to_py_err)?;
    let case = TestCase::new(class, noisy, n, seed).map_err(to_py_err)?;
    Ok(to_rows(&case.generate().map_err(to_py_err)?))
}

#[pyfunction(name = "read_matrix")]
fn py_read_matrix(path: &str) -> PyResult<Rows> {
    Ok(to_rows(&csdk::io::read_matrix(path).map_err(to_py_err)?))
}

#[pyfunction(name = "write_matrix")]
fn py_write_matrix(path: &str, a: Rows) -> PyResult<()> {
    csdk::io::write_matrix(path, &to_matrix(a)?).map_err(to_py_err)
}

#[pymodule]
fn csdk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCsdResult>()?;
    m.add_function(wrap_pyfunction!(py_csd, m)?)?;
    m.add_function(wrap_pyfunction!(py_csd_2x2, m)?)?;
    m.add_function(wrap_pyfunction!(py_polar, m)?)?;
    m.add_function(wrap_pyfunction!(py_symeig, m)?)?;
    m.add_function(wrap_pyfunction!(py_dist, m)?)?;
    m.add_function(wrap_pyfunction!(py_test_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(py_read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(py_write_matrix, m)?)?;
    m.add("UNIT_ROUNDOFF", csdk::UNIT_ROUNDOFF)?;
    Ok(())
}
