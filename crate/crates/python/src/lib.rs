//! Python bindings: model families, minimizers, barriers, and the harness.

use num_traits::ToPrimitive;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use twistlab_core::arithmetic::{self, Omega};
use twistlab_core::barrier;
use twistlab_core::gevrey;
use twistlab_core::harness::{self, ExperimentConfig};
use twistlab_core::model::{self, GeneratingFunction, PerturbationParams, Variant};
use twistlab_core::variational::{self, RotationSymbol, Sign, DEFAULT_TOL};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_sign(s: &str) -> PyResult<Sign> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(value_err(format!("sign must be '+' or '-', got {s:?}"))),
    }
}

#[pyclass(name = "Params", frozen)]
struct PyParams {
    inner: PerturbationParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha=2.0, lambda_=1.0, a=1.0, n=4))]
    fn new(alpha: f64, lambda_: f64, a: f64, n: u32) -> PyResult<Self> {
        Ok(PyParams {
            inner: PerturbationParams::new(alpha, lambda_, a, n).map_err(value_err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    /// Peak of `v_n`.
    fn bump_peak(&self) -> f64 {
        self.inner.bump_peak()
    }

    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Params(alpha={}, lambda_={}, a={}, n={})", p.alpha, p.lambda, p.a, p.n)
    }
}

/// A generating function `h(x,x') = ½(x-x')² + V(x')`.
#[pyclass(name = "Family", frozen)]
struct PyFamily {
    inner: GeneratingFunction,
}

#[pymethods]
impl PyFamily {
    /// `variant` is one of `integrable`, `cosine`, `full`; `eta` shifts the bump.
    #[new]
    #[pyo3(signature = (params, variant="full", eta=None))]
    fn new(params: &PyParams, variant: &str, eta: Option<f64>) -> PyResult<Self> {
        let variant = match (variant, eta) {
            ("integrable", None) => Variant::Integrable,
            ("cosine", None) => Variant::CosineOnly,
            ("full", None) => Variant::Full,
            ("full", Some(eta)) => Variant::FullShifted { eta },
            _ => return Err(value_err(format!("bad variant {variant:?} (eta={eta:?})"))),
        };
        Ok(PyFamily {
            inner: model::make_family(&params.inner, variant).map_err(value_err)?,
        })
    }

    /// `h_0 + Q_q` with `Q_q(x) = q^{-2}(u_q + v_q)(qx)`.
    #[staticmethod]
    fn rescaled(params: &PyParams, q: u32) -> PyResult<Self> {
        Ok(PyFamily {
            inner: model::rescaled_family(&params.inner, q).map_err(value_err)?,
        })
    }

    fn h(&self, x: f64, xp: f64) -> f64 {
        self.inner.h(x, xp)
    }

    fn potential(&self, x: f64) -> f64 {
        self.inner.potential_value(x)
    }

    fn period(&self) -> f64 {
        self.inner.period()
    }
}

/// A solved configuration with its solve report.
#[pyclass(name = "Orbit", frozen, get_all)]
struct PyOrbit {
    start: i64,
    values: Vec<f64>,
    action: f64,
    residual: f64,
    iterations: usize,
    window: usize,
    monotone: bool,
}

impl PyOrbit {
    fn from(config: variational::Configuration, report: variational::SolveReport) -> Self {
        PyOrbit {
            start: config.start,
            monotone: config.is_monotone(),
            values: config.values,
            action: report.action,
            residual: report.residual,
            iterations: report.iterations,
            window: report.window,
        }
    }
}

#[pymethods]
impl PyOrbit {
    fn __len__(&self) -> usize {
        self.values.len()
    }
}

#[pyfunction]
#[pyo3(signature = (family, p, q, tol=DEFAULT_TOL))]
fn minimize_periodic(family: &PyFamily, p: i64, q: usize, tol: f64) -> PyResult<PyOrbit> {
    let (c, r) = variational::minimize_periodic(&family.inner, p, q, None, tol).map_err(runtime_err)?;
    Ok(PyOrbit::from(c, r))
}

/// Connecting orbit at the symbol `p/q±`; `0/1` gives the heteroclinic.
#[pyfunction]
#[pyo3(signature = (family, p=0, q=1, sign="+", tol=DEFAULT_TOL))]
fn minimize_connecting(family: &PyFamily, p: i64, q: usize, sign: &str, tol: f64) -> PyResult<PyOrbit> {
    let (c, r) = barrier::connecting_minimizer(&family.inner, p, q, parse_sign(sign)?, tol).map_err(runtime_err)?;
    Ok(PyOrbit::from(c, r))
}

#[pyfunction]
#[pyo3(signature = (family, eta, tol=DEFAULT_TOL))]
fn peierls_zero_plus(family: &PyFamily, eta: f64, tol: f64) -> PyResult<f64> {
    barrier::peierls_zero_plus(&family.inner, eta, tol).map_err(runtime_err)
}

/// `sign` is `None` for the unsigned barrier.
#[pyfunction]
#[pyo3(signature = (family, p, q, xi, sign=None, tol=DEFAULT_TOL))]
fn peierls_rational(family: &PyFamily, p: i64, q: usize, xi: f64, sign: Option<&str>, tol: f64) -> PyResult<f64> {
    let sign = sign.map(parse_sign).transpose()?;
    barrier::peierls_rational(&family.inner, p, q, sign, xi, tol).map_err(runtime_err)
}

/// Barrier profile on `k/grid`; returns `(verdict, max_barrier, argmax, values)`.
#[pyfunction]
#[pyo3(signature = (family, symbol, grid=32, tol=DEFAULT_TOL))]
fn certificate(family: &PyFamily, symbol: &str, grid: usize, tol: f64) -> PyResult<(String, f64, f64, Vec<f64>)> {
    let symbol: RotationSymbol = symbol.parse().map_err(value_err)?;
    let c = barrier::destruction_certificate(&family.inner, symbol, grid, tol).map_err(runtime_err)?;
    let values = c.profile.samples.iter().map(|s| s.value).collect();
    Ok((c.verdict.as_str().to_string(), c.max_barrier, c.argmax, values))
}

/// `(eta, barrier, bump_peak, holds)` for `P_{0+}^{h_n}(η) ≥ v_{n,η}(η)`.
#[pyfunction]
#[pyo3(signature = (params, tol=DEFAULT_TOL))]
fn lower_bound(params: &PyParams, tol: f64) -> PyResult<(f64, f64, f64, bool)> {
    let lb = barrier::lower_bound_check(&params.inner, tol).map_err(runtime_err)?;
    Ok((lb.eta, lb.barrier, lb.bump_peak, lb.holds))
}

/// `(k, p, q, log10_error)` for the first `count` convergents.
#[pyfunction]
fn convergents(omega: &str, count: usize) -> PyResult<Vec<(usize, u64, u64, f64)>> {
    let omega: Omega = omega.parse().map_err(value_err)?;
    arithmetic::convergents(&omega, count)
        .map_err(runtime_err)?
        .into_iter()
        .map(|c| {
            let too_big = || runtime_err(format!("convergent {} does not fit in 64 bits", c.k));
            Ok((c.k, c.p.to_u64().ok_or_else(too_big)?, c.q.to_u64().ok_or_else(too_big)?, c.log10_error))
        })
        .collect()
}

/// `(epsilon, a, r, r_sup)`.
#[pyfunction]
fn pipeline_budget(alpha: f64, mu: f64, delta: f64) -> PyResult<(f64, f64, f64, f64)> {
    let b = arithmetic::pipeline_budget(alpha, mu, delta).map_err(value_err)?;
    Ok((b.epsilon, b.a, b.r, b.r_sup))
}

/// `(observed_sup, bound, margin, holds)`.
#[pyfunction]
#[pyo3(signature = (alpha, lambda_, k, grid=gevrey::DEFAULT_GRID))]
fn cauchy_check(alpha: f64, lambda_: f64, k: usize, grid: usize) -> PyResult<(f64, f64, f64, bool)> {
    let c = gevrey::verify_cauchy_bound(alpha, lambda_, k, grid).map_err(runtime_err)?;
    Ok((c.observed_sup, c.bound, c.margin, c.holds))
}

/// `(norm, scaled)` of `Q_q` in `C^r`.
#[pyfunction]
#[pyo3(signature = (params, q, r, grid=gevrey::DEFAULT_GRID))]
fn cr_decay(params: &PyParams, q: u32, r: f64, grid: usize) -> PyResult<(f64, f64)> {
    let row = gevrey::perturbation_cr_decay(q, &params.inner, r, grid).map_err(runtime_err)?;
    Ok((row.norm, row.scaled))
}

/// Runs a harness command on config text; returns `report.json` as a string.
#[pyfunction]
#[pyo3(signature = (command, config="", out=None))]
fn run(command: &str, config: &str, out: Option<String>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::parse(config).map_err(value_err)?;
    if out.is_some() {
        cfg.out = out;
    }
    let report = match command {
        "orbit" => harness::cmd_orbit(&cfg),
        "barrier" => harness::cmd_barrier(&cfg),
        "destroy" => harness::cmd_destroy(&cfg),
        "norms" => harness::cmd_norms(&cfg),
        _ => return Err(value_err(format!("unknown command {command:?}"))),
    }
    .map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

#[pymodule]
pub fn twistlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PyOrbit>()?;
    m.add_function(wrap_pyfunction!(minimize_periodic, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_connecting, m)?)?;
    m.add_function(wrap_pyfunction!(peierls_zero_plus, m)?)?;
    m.add_function(wrap_pyfunction!(peierls_rational, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(convergents, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_budget, m)?)?;
    m.add_function(wrap_pyfunction!(cauchy_check, m)?)?;
    m.add_function(wrap_pyfunction!(cr_decay, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("DEFAULT_TOL", DEFAULT_TOL)?;
    Ok(())
}
