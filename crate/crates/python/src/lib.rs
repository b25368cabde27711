//! Python bindings for `torus-indep`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use torus_indep::bench::{self, BenchConfig};
use torus_indep::models::{self, Interaction, ModelSpec};
use torus_indep::{
    circ, cosine, multi, omnibus, Error, FrequencyPair, MultiOrderSpec, PairedSample, PermutationPlan, PoissonKernel,
};

create_exception!(torus_indep_py, NumericalError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn paired(theta1: Vec<f64>, theta2: Vec<f64>) -> PyResult<PairedSample> {
    PairedSample::new(theta1, theta2).map_err(to_py)
}

/// Outcome of one independence test.
#[pyclass(name = "TestResult", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    pub df_or_b: u64,
    pub n: usize,
    pub params: BTreeMap<String, String>,
}

#[pymethods]
impl PyTestResult {
    fn __repr__(&self) -> String {
        format!(
            "TestResult(statistic={}, p_value={}, method='{}', df_or_b={}, n={})",
            self.statistic, self.p_value, self.method, self.df_or_b, self.n
        )
    }
}

impl From<torus_indep::TestResult> for PyTestResult {
    fn from(r: torus_indep::TestResult) -> Self {
        PyTestResult {
            statistic: r.statistic,
            p_value: r.p_value,
            method: r.method.to_string(),
            df_or_b: r.df_or_b,
            n: r.n,
            params: r.params,
        }
    }
}

#[pyfunction]
fn wrap_angle(x: f64) -> PyResult<f64> {
    circ::wrap_angle(x).map(f64::from).map_err(to_py)
}

#[pyfunction]
fn circular_mean(angles: Vec<f64>) -> PyResult<f64> {
    circ::circular_mean(&angles).map(f64::from).map_err(to_py)
}

/// Single-frequency cosine test, χ²₁ calibrated.
#[pyfunction]
#[pyo3(signature = (theta1, theta2, r1=1, r2=1, center=true))]
fn cosine_test(theta1: Vec<f64>, theta2: Vec<f64>, r1: i64, r2: i64, center: bool) -> PyResult<PyTestResult> {
    let s = paired(theta1, theta2)?;
    cosine::cosine_test(&s, FrequencyPair::from((r1, r2)), center).map(Into::into).map_err(to_py)
}

/// Multi-order test. `spec` uses the CLI syntax, e.g. `"1,-1,1,1"` or `"1,1/1,-1"`.
#[pyfunction]
#[pyo3(signature = (theta1, theta2, spec, center=true))]
fn multi_test(theta1: Vec<f64>, theta2: Vec<f64>, spec: &str, center: bool) -> PyResult<PyTestResult> {
    let s = paired(theta1, theta2)?;
    let spec: MultiOrderSpec = spec.parse().map_err(to_py)?;
    multi::multi_test(&s, &spec, center).map(Into::into).map_err(to_py)
}

/// Omnibus statistic without calibration.
#[pyfunction]
fn t_omnibus(theta1: Vec<f64>, theta2: Vec<f64>, lam: f64) -> PyResult<f64> {
    let s = paired(theta1, theta2)?;
    let k = PoissonKernel::new(lam).map_err(to_py)?;
    Ok(omnibus::t_omnibus(&s, k))
}

/// Omnibus test calibrated by permutation.
#[pyfunction]
#[pyo3(signature = (theta1, theta2, lam, permutations=10_000, seed=0))]
fn permutation_test(
    py: Python<'_>,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    lam: f64,
    permutations: usize,
    seed: u64,
) -> PyResult<PyTestResult> {
    let s = paired(theta1, theta2)?;
    let k = PoissonKernel::new(lam).map_err(to_py)?;
    let plan = PermutationPlan::new(permutations, seed).map_err(to_py)?;
    py.detach(|| omnibus::permutation_test(&s, k, plan)).map(Into::into).map_err(to_py)
}

fn param(params: Option<&Bound<'_, PyDict>>, name: &str) -> PyResult<Option<f64>> {
    match params.map(|d| d.get_item(name)).transpose()?.flatten() {
        Some(v) => Ok(Some(v.extract()?)),
        None => Ok(None),
    }
}

fn required(params: Option<&Bound<'_, PyDict>>, name: &str) -> PyResult<f64> {
    param(params, name)?.ok_or_else(|| PyValueError::new_err(format!("missing parameter '{name}'")))
}

fn model_spec(model: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<ModelSpec> {
    let allowed: &[&str] = match model {
        "pb" => &["p"],
        "bwc" => &["rho1", "rho2", "rho"],
        "bcvm" => &["kappa1", "kappa2", "kappa3", "interaction"],
        "bvm" => &["kappa1", "kappa2", "mu_g", "kappa_g"],
        other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
    };
    if let Some(d) = params {
        for k in d.keys() {
            let k: String = k.extract()?;
            if !allowed.contains(&k.as_str()) {
                return Err(PyValueError::new_err(format!("unexpected parameter '{k}' for {model}")));
            }
        }
    }
    let spec = match model {
        "pb" => ModelSpec::Pb { p: required(params, "p")? },
        "bwc" => ModelSpec::Bwc {
            rho1: required(params, "rho1")?,
            rho2: required(params, "rho2")?,
            rho: required(params, "rho")?,
        },
        "bcvm" => {
            let interaction = match params.map(|d| d.get_item("interaction")).transpose()?.flatten() {
                Some(v) => v.extract::<String>()?.parse::<Interaction>().map_err(to_py)?,
                None => Interaction::Positive,
            };
            ModelSpec::Bcvm {
                kappa1: required(params, "kappa1")?,
                kappa2: required(params, "kappa2")?,
                kappa3: required(params, "kappa3")?,
                interaction,
            }
        }
        _ => ModelSpec::Bvm {
            kappa1: required(params, "kappa1")?,
            kappa2: required(params, "kappa2")?,
            mu_g: param(params, "mu_g")?.unwrap_or(0.0),
            kappa_g: required(params, "kappa_g")?,
        },
    };
    spec.validate().map_err(to_py)?;
    Ok(spec)
}

/// Draws `n` pairs from a named model: `sample("bcvm", 100, 1, kappa1=1, kappa2=1, kappa3=2)`.
#[pyfunction]
#[pyo3(signature = (model, n, seed, **params))]
fn sample(model: &str, n: usize, seed: u64, params: Option<&Bound<'_, PyDict>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec = model_spec(model, params)?;
    let s = spec.sample(n, seed).map_err(to_py)?;
    Ok((s.first().to_vec(), s.second().to_vec()))
}

#[pyfunction]
#[pyo3(signature = (n, kappa, mu=0.0, seed=0))]
fn sample_vm(n: usize, kappa: f64, mu: f64, seed: u64) -> PyResult<Vec<f64>> {
    models::sample_vm(n, mu, kappa, seed).map_err(to_py)
}

#[pyfunction]
fn vm_cdf(theta: f64, kappa: f64) -> PyResult<f64> {
    models::vm_cdf(theta, kappa).map_err(to_py)
}

#[pyfunction]
fn vm_quantile(u: f64, kappa: f64) -> PyResult<f64> {
    models::vm_quantile(u, kappa).map(f64::from).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (hits, m, level=0.95))]
fn wilson_ci(hits: usize, m: usize, level: f64) -> PyResult<(f64, f64)> {
    bench::wilson_ci(hits, m, level).map_err(to_py)
}

#[pyfunction]
fn by_correction(pvals: Vec<f64>) -> PyResult<Vec<f64>> {
    bench::by_correction(&pvals).map_err(to_py)
}

/// Runs a power experiment from TOML text and returns one dict per cell.
#[pyfunction]
fn empirical_power<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = BenchConfig::from_toml(config).map_err(to_py)?;
    let table = py.detach(|| bench::empirical_power(&cfg)).map_err(to_py)?;
    table
        .cells
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("model", &c.model)?;
            d.set_item("param", c.param)?;
            d.set_item("test", &c.test)?;
            d.set_item("n", c.n)?;
            d.set_item("M", c.m)?;
            d.set_item("rate", c.rate)?;
            d.set_item("wilson_lo", c.wilson_lo)?;
            d.set_item("wilson_hi", c.wilson_hi)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn torus_indep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyTestResult>()?;
    m.add_function(wrap_pyfunction!(wrap_angle, m)?)?;
    m.add_function(wrap_pyfunction!(circular_mean, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_test, m)?)?;
    m.add_function(wrap_pyfunction!(multi_test, m)?)?;
    m.add_function(wrap_pyfunction!(t_omnibus, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sample_vm, m)?)?;
    m.add_function(wrap_pyfunction!(vm_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(vm_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_ci, m)?)?;
    m.add_function(wrap_pyfunction!(by_correction, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_power, m)?)?;
    Ok(())
}
