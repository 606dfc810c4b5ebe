//! Python bindings for the `hdsel` engine.
//!
//! Matrices cross the boundary as lists of rows; structured results come
//! back as plain dicts.

use hdsel::eigen::{self, SparseEigenReport};
use hdsel::model::{self, Support};
use hdsel::penalty::{PenaltyRule, PenaltySpec};
use hdsel::post::SigmaMethod;
use hdsel::sim::McConfig;
use hdsel::solver::{self, SolverOptions};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py_err(e: hdsel::Error) -> PyErr {
    use hdsel::Error as E;
    match e {
        E::Argument(_)
        | E::Domain(_)
        | E::Dimension { .. }
        | E::Budget { .. }
        | E::DegenerateColumn { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("all rows must have the same length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| json_to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// Design matrix and response. Columns are normalized on request with
/// `normalize()`; estimation routines expect a normalized dataset.
#[pyclass(module = "hdsel", frozen, from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: model::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (x, y, names=None))]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, names: Option<Vec<String>>) -> PyResult<Self> {
        let x = matrix_from_rows(&x)?;
        let y = DVector::from_vec(y);
        let inner = match names {
            Some(n) => model::Dataset::with_names(x, y, n),
            None => model::Dataset::new(x, y),
        }
        .map_err(to_py_err)?;
        Ok(Dataset { inner })
    }

    /// Reads a CSV with a `y` column; an intercept column is prepended.
    #[staticmethod]
    fn from_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            inner: hdsel::io::read_csv(&path).map_err(to_py_err)?,
        })
    }

    fn normalize(&self) -> Self {
        Dataset {
            inner: self.inner.normalize(),
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn scales(&self) -> Vec<f64> {
        self.inner.scales().iter().copied().collect()
    }

    #[getter]
    fn is_normalized(&self) -> bool {
        self.inner.is_normalized()
    }

    /// Maps coefficients on normalized columns back to original units.
    fn to_original_scale(&self, beta: Vec<f64>) -> PyResult<Vec<f64>> {
        if beta.len() != self.inner.p() {
            return Err(PyValueError::new_err(format!(
                "expected {} coefficients",
                self.inner.p()
            )));
        }
        Ok(self
            .inner
            .to_original_scale(&DVector::from_vec(beta))
            .iter()
            .copied()
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, normalized={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.is_normalized()
        )
    }
}

#[pyclass(module = "hdsel", frozen, get_all)]
struct LassoFit {
    beta: Vec<f64>,
    lambda_: f64,
    support: Vec<usize>,
    objective: f64,
    kkt_violation: f64,
    iterations: usize,
    converged: bool,
}

#[pymethods]
impl LassoFit {
    fn __repr__(&self) -> String {
        format!(
            "LassoFit(lambda={}, support={:?}, converged={})",
            self.lambda_, self.support, self.converged
        )
    }
}

impl From<solver::LassoFit> for LassoFit {
    fn from(f: solver::LassoFit) -> Self {
        LassoFit {
            support: f.support().as_slice().to_vec(),
            beta: f.beta.to_vec(),
            lambda_: f.lambda,
            objective: f.objective,
            kkt_violation: f.kkt_violation,
            iterations: f.iterations,
            converged: f.converged,
        }
    }
}

fn parse_rule(rule: &str) -> PyResult<PenaltyRule> {
    match rule {
        "x_dependent" | "xdep" => Ok(PenaltyRule::XDependent),
        "x_independent" | "xindep" => Ok(PenaltyRule::XIndependent),
        other => Err(PyValueError::new_err(format!(
            "unknown penalty rule `{other}`"
        ))),
    }
}

fn parse_method(method: &str) -> PyResult<SigmaMethod> {
    match method {
        "lasso" => Ok(SigmaMethod::Lasso),
        "post_lasso" => Ok(SigmaMethod::PostLasso),
        other => Err(PyValueError::new_err(format!(
            "unknown sigma method `{other}`"
        ))),
    }
}

/// LASSO at penalty `lam`; indices in `unpenalized` are left out of the penalty.
#[pyfunction]
#[pyo3(signature = (ds, lam, unpenalized=None))]
fn solve_lasso(
    py: Python<'_>,
    ds: &Dataset,
    lam: f64,
    unpenalized: Option<Vec<usize>>,
) -> PyResult<LassoFit> {
    let opts =
        SolverOptions::default().with_unpenalized(Support::new(unpenalized.unwrap_or_default()));
    let fit = py
        .detach(|| solver::solve_lasso(&ds.inner, lam, &opts))
        .map_err(to_py_err)?;
    Ok(fit.into())
}

/// Least squares on the given support (normalized coordinates).
#[pyfunction]
fn post_lasso(ds: &Dataset, support: Vec<usize>) -> PyResult<Vec<f64>> {
    let fit = hdsel::post::post_lasso(&ds.inner, &Support::new(support)).map_err(to_py_err)?;
    Ok(fit.beta.to_vec())
}

#[pyfunction]
#[pyo3(signature = (n, p, alpha=0.1, c=1.1, sigma=1.0))]
fn lambda_x_independent(n: usize, p: usize, alpha: f64, c: f64, sigma: f64) -> PyResult<f64> {
    hdsel::penalty::lambda_x_independent(n, p, &PenaltySpec::x_independent(c, alpha, sigma))
        .map_err(to_py_err)
}

/// Returns `(lambda, quantile)` for the simulated X-dependent rule.
#[pyfunction]
#[pyo3(signature = (ds, alpha=0.1, c=1.1, sigma=1.0, draws=10000, seed=0))]
fn lambda_x_dependent(
    py: Python<'_>,
    ds: &Dataset,
    alpha: f64,
    c: f64,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let spec = PenaltySpec {
        c,
        alpha,
        sigma,
        sim_draws: draws,
        seed,
        ..PenaltySpec::default()
    };
    let r = py
        .detach(|| hdsel::penalty::lambda_x_dependent(&ds.inner, &spec))
        .map_err(to_py_err)?;
    Ok((r.lambda, r.quantile.value))
}

/// Iterative noise-level estimate; returns the full trace.
#[pyfunction]
#[pyo3(signature = (ds, method="post_lasso", rule="x_dependent", alpha=0.1, c=1.1, draws=10000, seed=0, nu=1e-4, max_iter=20))]
#[allow(clippy::too_many_arguments)]
fn estimate_sigma<'py>(
    py: Python<'py>,
    ds: &Dataset,
    method: &str,
    rule: &str,
    alpha: f64,
    c: f64,
    draws: usize,
    seed: u64,
    nu: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = PenaltySpec {
        rule: parse_rule(rule)?,
        c,
        alpha,
        sim_draws: draws,
        seed,
        ..PenaltySpec::default()
    };
    let method = parse_method(method)?;
    let est = py
        .detach(|| hdsel::post::estimate_sigma(&ds.inner, &spec, method, nu, max_iter))
        .map_err(to_py_err)?;
    to_py(py, &est)
}

fn eig_dict<'py>(py: Python<'py>, r: &SparseEigenReport) -> PyResult<Bound<'py, PyAny>> {
    let d = PyDict::new(py);
    d.set_item("m", r.m)?;
    d.set_item("kappa", r.kappa_m)?;
    d.set_item("phi", r.phi_m)?;
    d.set_item("mu", r.mu_m)?;
    d.set_item("exact", r.exact)?;
    Ok(d.into_any())
}

/// Exact `kappa(m)`, `phi(m)`, `mu(m)` over supersets of `support`.
#[pyfunction]
fn sparse_eigs<'py>(
    py: Python<'py>,
    ds: &Dataset,
    support: Vec<usize>,
    m: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let t = Support::new(support);
    let r = py
        .detach(|| eigen::sparse_eigs_exact(&ds.inner, &t, m))
        .map_err(to_py_err)?;
    eig_dict(py, &r)
}

/// Certified lower bound and sampled upper estimate of the restricted eigenvalue.
#[pyfunction]
#[pyo3(signature = (ds, support, c=1.1, draws=2000, seed=0))]
fn restricted_eigenvalue<'py>(
    py: Python<'py>,
    ds: &Dataset,
    support: Vec<usize>,
    c: f64,
    draws: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = Support::new(support);
    let cb = eigen::cbar(c).map_err(to_py_err)?;
    let r = py
        .detach(|| eigen::re_estimate(&ds.inner, &t, cb, draws, seed))
        .map_err(to_py_err)?;
    to_py(py, &r)
}

/// Exhaustive oracle: best support of size at most `k_max` for the
/// regression function `f` at noise level `sigma`.
#[pyfunction]
fn solve_oracle<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    f: Vec<f64>,
    sigma: f64,
    k_max: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let x = matrix_from_rows(&x)?;
    let f = DVector::from_vec(f);
    let sol = py
        .detach(|| hdsel::oracle::solve_oracle(&x, &f, sigma, k_max))
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("beta0", sol.beta0.to_vec())?;
    d.set_item("support", sol.support.as_slice().to_vec())?;
    d.set_item("s", sol.s)?;
    d.set_item("c_s", sol.c_s)?;
    d.set_item("criterion_value", sol.criterion_value)?;
    Ok(d.into_any())
}

/// Monte Carlo run. `design` picks a preset (1 or 2); keyword overrides
/// take any configuration field, e.g. `reps=200, seed=7`.
#[pyfunction]
#[pyo3(signature = (design=1, **overrides))]
fn run_mc<'py>(
    py: Python<'py>,
    design: u8,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let base = match design {
        1 => McConfig::design1(),
        2 => McConfig::design2(),
        other => {
            return Err(PyValueError::new_err(format!(
                "design must be 1 or 2, got {other}"
            )))
        }
    };
    let mut cfg =
        serde_json::to_value(&base).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(kw) = overrides {
        let json = py.import("json")?;
        let text: String = json.call_method1("dumps", (kw,))?.extract()?;
        let extra: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        if let (Some(obj), serde_json::Value::Object(extra)) = (cfg.as_object_mut(), extra) {
            obj.extend(extra);
        }
    }
    let cfg: McConfig =
        serde_json::from_value(cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| hdsel::sim::run_mc(&cfg)).map_err(to_py_err)?;
    to_py(py, &report)
}

#[pymodule]
fn hdsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Dataset>()?;
    m.add_class::<LassoFit>()?;
    m.add_function(wrap_pyfunction!(solve_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(post_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_x_independent, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_x_dependent, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(restricted_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(solve_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_mc, m)?)?;
    Ok(())
}
