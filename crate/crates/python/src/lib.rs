//! Python bindings. Reports and bound results are returned as plain dicts.

use dpminimax::bounds::{self, TestForm};
use dpminimax::couplings::{self, CouplingSampler};
use dpminimax::divergences::{self, DiscreteDistribution};
use dpminimax::experiments::{self, ExperimentReport};
use dpminimax::mechanisms::{GaussianMean, ParameterSpace};
use dpminimax::packings;
use dpminimax::verify::{self, AdmissibilityCheck, FiniteMechanism, PrivacyCheck, SimilarityKind};
use dpminimax::PrivacyConstraint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pythonize::pythonize;
use serde::Serialize;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dict<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    Ok(pythonize(py, v)?)
}

fn form(s: &str) -> PyResult<TestForm> {
    match s {
        "joint" => Ok(TestForm::Joint),
        "product" => Ok(TestForm::Product),
        _ => Err(PyValueError::new_err(format!("form must be 'joint' or 'product', got {s:?}"))),
    }
}

/// A privacy constraint. Build with the static constructors.
#[pyclass(name = "PrivacyConstraint", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConstraint(PrivacyConstraint);

#[pymethods]
impl PyConstraint {
    #[staticmethod]
    fn pure_dp(epsilon: f64) -> PyResult<Self> {
        Self::checked(PrivacyConstraint::PureDp { epsilon })
    }

    #[staticmethod]
    fn approx_dp(epsilon: f64, delta: f64) -> PyResult<Self> {
        Self::checked(PrivacyConstraint::ApproxDp { epsilon, delta })
    }

    #[staticmethod]
    fn zcdp(rho: f64) -> PyResult<Self> {
        Self::checked(PrivacyConstraint::Zcdp { rho })
    }

    #[staticmethod]
    fn none() -> Self {
        Self(PrivacyConstraint::None)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind_name()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

impl PyConstraint {
    fn checked(c: PrivacyConstraint) -> PyResult<Self> {
        c.validate().map_err(err)?;
        Ok(Self(c))
    }
}

/// Finite distribution on integer atoms.
#[pyclass(name = "DiscreteDistribution", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistribution(DiscreteDistribution);

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(atoms: Vec<i64>, weights: Vec<f64>) -> PyResult<Self> {
        DiscreteDistribution::new(atoms, weights).map(Self).map_err(err)
    }

    #[staticmethod]
    fn bernoulli(p: f64) -> PyResult<Self> {
        DiscreteDistribution::bernoulli(p).map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(atoms: Vec<i64>) -> PyResult<Self> {
        DiscreteDistribution::uniform(atoms).map(Self).map_err(err)
    }

    #[getter]
    fn atoms(&self) -> Vec<i64> {
        self.0.atoms().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteDistribution(atoms={:?}, weights={:?})", self.0.atoms(), self.0.weights())
    }
}

fn unwrap_dists(ps: Vec<PyRef<'_, PyDistribution>>) -> Vec<DiscreteDistribution> {
    ps.iter().map(|p| p.0.clone()).collect()
}

#[pyfunction]
fn tv(p: &PyDistribution, q: &PyDistribution) -> f64 {
    divergences::tv(&p.0, &q.0)
}

#[pyfunction]
fn kl(p: &PyDistribution, q: &PyDistribution) -> f64 {
    divergences::kl(&p.0, &q.0)
}

#[pyfunction]
fn renyi(alpha: f64, p: &PyDistribution, q: &PyDistribution) -> PyResult<f64> {
    divergences::renyi(alpha, &p.0, &q.0).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (constraint, n, tv, form = "joint"))]
fn le_cam_private<'py>(
    py: Python<'py>,
    constraint: &PyConstraint,
    n: u64,
    tv: f64,
    form: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = bounds::le_cam_private(constraint.0, n, tv, self::form(form)?).map_err(err)?;
    dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (constraint, n, tvs, kls_to_q = None, form = "joint"))]
fn fano_private<'py>(
    py: Python<'py>,
    constraint: &PyConstraint,
    n: u64,
    tvs: Vec<Vec<f64>>,
    kls_to_q: Option<Vec<f64>>,
    form: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = bounds::fano_private(constraint.0, n, tvs.len(), &tvs, kls_to_q.as_deref(), self::form(form)?)
        .map_err(err)?;
    dict(py, &r)
}

#[pyfunction]
fn min_disagreement_lp(ps: Vec<PyRef<'_, PyDistribution>>) -> PyResult<f64> {
    couplings::min_disagreement_lp(&unwrap_dists(ps)).map_err(err)
}

/// Monte-Carlo disagreement matrix of a coupling: `kind` is "maximal"
/// (two laws) or "races".
#[pyfunction]
#[pyo3(signature = (kind, ps, trials = 100_000, seed = 0))]
fn estimate_disagreement<'py>(
    py: Python<'py>,
    kind: &str,
    ps: Vec<PyRef<'_, PyDistribution>>,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let ps = unwrap_dists(ps);
    let s: CouplingSampler = match (kind, ps.as_slice()) {
        ("maximal", [p, q]) => couplings::maximal_pair(p, q),
        ("maximal", _) => return Err(PyValueError::new_err("maximal coupling takes two laws")),
        ("races", _) => couplings::exponential_races(&ps).map_err(err)?,
        _ => return Err(PyValueError::new_err(format!("unknown coupling {kind:?}"))),
    };
    let m = couplings::estimate_disagreement(&s, trials, seed).map_err(err)?;
    dict(py, &m)
}

#[pyfunction]
fn varshamov_gilbert(d: usize, zeta: f64, seed: u64) -> PyResult<Vec<Vec<u8>>> {
    let code = packings::varshamov_gilbert(d, zeta, seed).map_err(err)?;
    Ok(code.words)
}

/// Exhaustive checks on randomized response with `n` entries: privacy,
/// group privacy and Le Cam-match admissibility for two hypotheses.
#[pyfunction]
#[pyo3(signature = (epsilon, constraint, n = 1))]
fn verify_randomized_response<'py>(
    py: Python<'py>,
    epsilon: f64,
    constraint: &PyConstraint,
    n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let m = if n == 1 {
        FiniteMechanism::randomized_response(epsilon)
    } else {
        FiniteMechanism::rr_product(epsilon, n)
    }
    .map_err(err)?;
    let c = constraint.0;
    let privacy = verify::verify_privacy(&m, c).map_err(err)?;
    let group = verify::verify_group_privacy(&m, c).map_err(err)?;
    let admissibility = verify::verify_admissibility(&m, c, &SimilarityKind::LeCamMatch, 2).map_err(err)?;
    dict(
        py,
        &RrChecks {
            privacy,
            group_privacy: group,
            le_cam_admissibility: admissibility,
        },
    )
}

#[derive(Serialize)]
struct RrChecks {
    privacy: PrivacyCheck,
    group_privacy: PrivacyCheck,
    le_cam_admissibility: AdmissibilityCheck,
}

fn constraints(cs: Vec<PyRef<'_, PyConstraint>>) -> Vec<PrivacyConstraint> {
    cs.iter().map(|c| c.0).collect()
}

fn report<'py>(py: Python<'py>, r: Result<ExperimentReport, experiments::ExperimentError>) -> PyResult<Bound<'py, PyAny>> {
    dict(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (ns, constraints, trials = 10_000, seed = 0))]
fn run_bernoulli<'py>(
    py: Python<'py>,
    ns: Vec<usize>,
    constraints: Vec<PyRef<'_, PyConstraint>>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cs = self::constraints(constraints);
    report(py, py.detach(|| experiments::run_bernoulli(&ns, &cs, trials, seed)))
}

#[pyfunction]
#[pyo3(signature = (ns, constraints, trials = 10_000, seed = 0))]
fn run_uniform<'py>(
    py: Python<'py>,
    ns: Vec<usize>,
    constraints: Vec<PyRef<'_, PyConstraint>>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cs = self::constraints(constraints);
    report(py, py.detach(|| experiments::run_uniform(&ns, &cs, trials, seed)))
}

#[pyfunction]
#[pyo3(signature = (d, sigma, ns, constraints, trials = 1_000, seed = 0))]
fn run_gaussian<'py>(
    py: Python<'py>,
    d: usize,
    sigma: f64,
    ns: Vec<usize>,
    constraints: Vec<PyRef<'_, PyConstraint>>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cs = self::constraints(constraints);
    report(py, py.detach(|| experiments::run_gaussian(d, sigma, &ns, &cs, trials, seed)))
}

/// DP-SGML on the Gaussian-mean model over a ball of radius `radius`.
#[pyfunction]
#[pyo3(signature = (theta_star, ns, rhos, sigma = 1.0, radius = 10.0, clip = 10.0, m = 64, trials = 1_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_dpsgml<'py>(
    py: Python<'py>,
    theta_star: Vec<f64>,
    ns: Vec<usize>,
    rhos: Vec<f64>,
    sigma: f64,
    radius: f64,
    clip: f64,
    m: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let space = ParameterSpace::Ball {
        center: vec![0.0; theta_star.len()],
        radius,
    };
    let model = GaussianMean::new(sigma, space, clip).map_err(err)?;
    report(
        py,
        py.detach(|| experiments::run_dpsgml(&model, &theta_star, &ns, &rhos, m, trials, seed)),
    )
}

#[pymodule]
#[pyo3(name = "dpminimax")]
fn dpminimax_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConstraint>()?;
    m.add_class::<PyDistribution>()?;
    m.add_function(wrap_pyfunction!(tv, m)?)?;
    m.add_function(wrap_pyfunction!(kl, m)?)?;
    m.add_function(wrap_pyfunction!(renyi, m)?)?;
    m.add_function(wrap_pyfunction!(le_cam_private, m)?)?;
    m.add_function(wrap_pyfunction!(fano_private, m)?)?;
    m.add_function(wrap_pyfunction!(min_disagreement_lp, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_disagreement, m)?)?;
    m.add_function(wrap_pyfunction!(varshamov_gilbert, m)?)?;
    m.add_function(wrap_pyfunction!(verify_randomized_response, m)?)?;
    m.add_function(wrap_pyfunction!(run_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(run_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(run_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(run_dpsgml, m)?)?;
    Ok(())
}
