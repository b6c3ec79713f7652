//! Python bindings for the stable-market solver.
//!
//! Instances cross the boundary as JSON (the same schema the CLI reads);
//! outcomes and stability reports come back as thin wrapper classes with
//! float payoffs for convenience plus `to_json` for the exact encoding.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stable_market::{io, GeneratorConfig, DEFAULT_EPS};

#[pyclass(frozen)]
struct MarketInstance {
    inner: stable_market::MarketInstance,
}

#[pymethods]
impl MarketInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = io::read_instance(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(MarketInstance { inner })
    }

    fn to_json(&self) -> String {
        io::write_instance(&self.inner)
    }

    fn sellers(&self) -> Vec<String> {
        self.inner.sellers().to_vec()
    }

    fn buyers(&self) -> Vec<String> {
        self.inner.buyers().to_vec()
    }

    /// Validation violations; empty means the instance is well formed.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketInstance({} sellers, {} buyers)",
            self.inner.num_sellers(),
            self.inner.num_buyers()
        )
    }
}

#[pyclass(frozen)]
struct Outcome {
    instance: stable_market::MarketInstance,
    inner: stable_market::Outcome,
}

#[pymethods]
impl Outcome {
    /// Matched (seller, buyer, price) triples.
    fn matching(&self) -> Vec<(String, String, i64)> {
        self.inner
            .matched
            .iter()
            .map(|m| {
                (
                    self.instance.sellers()[m.seller].clone(),
                    self.instance.buyers()[m.buyer].clone(),
                    m.price,
                )
            })
            .collect()
    }

    /// Seller payoffs as floats keyed by id.
    fn q(&self) -> BTreeMap<String, f64> {
        self.instance
            .sellers()
            .iter()
            .zip(&self.inner.q)
            .map(|(id, v)| (id.clone(), v.to_f64()))
            .collect()
    }

    /// Buyer payoffs as floats keyed by id.
    fn r(&self) -> BTreeMap<String, f64> {
        self.instance
            .buyers()
            .iter()
            .zip(&self.inner.r)
            .map(|(id, v)| (id.clone(), v.to_f64()))
            .collect()
    }

    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn to_json(&self) -> String {
        io::write_outcome(&self.instance, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Outcome({} matched, {} passes)",
            self.inner.matched.len(),
            self.inner.iterations
        )
    }
}

#[pyclass(frozen)]
struct StabilityReport {
    instance: stable_market::MarketInstance,
    inner: stable_market::StabilityReport,
}

#[pymethods]
impl StabilityReport {
    fn stable(&self) -> bool {
        self.inner.is_stable()
    }

    /// Blocking (seller, buyer, price) triples.
    fn witnesses(&self) -> Vec<(String, String, i64)> {
        self.inner
            .witnesses
            .iter()
            .map(|w| {
                (
                    self.instance.sellers()[w.seller].clone(),
                    self.instance.buyers()[w.buyer].clone(),
                    w.price,
                )
            })
            .collect()
    }

    fn to_json(&self) -> String {
        io::write_stability_report(&self.instance, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "StabilityReport(stable={}, witnesses={})",
            self.stable(),
            self.inner.witnesses.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (instance, eps=None))]
fn solve(instance: &MarketInstance, eps: Option<f64>) -> PyResult<Outcome> {
    let (outcome, _) = stable_market::run(&instance.inner, eps.unwrap_or(DEFAULT_EPS))
        .map_err(solver_err)?;
    Ok(Outcome {
        instance: instance.inner.clone(),
        inner: outcome,
    })
}

/// Solve and also return the per-pass trace as JSON text.
#[pyfunction]
#[pyo3(signature = (instance, eps=None))]
fn solve_with_trace(instance: &MarketInstance, eps: Option<f64>) -> PyResult<(Outcome, String)> {
    let (outcome, trace) = stable_market::run(&instance.inner, eps.unwrap_or(DEFAULT_EPS))
        .map_err(solver_err)?;
    let trace_json = io::write_trace(&instance.inner, &trace.states);
    Ok((
        Outcome {
            instance: instance.inner.clone(),
            inner: outcome,
        },
        trace_json,
    ))
}

#[pyfunction]
#[pyo3(signature = (instance, outcome, eps=None))]
fn verify(
    instance: &MarketInstance,
    outcome: &Outcome,
    eps: Option<f64>,
) -> PyResult<StabilityReport> {
    let report = stable_market::verify(&instance.inner, &outcome.inner, eps.unwrap_or(DEFAULT_EPS))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(StabilityReport {
        instance: instance.inner.clone(),
        inner: report,
    })
}

/// Audit a trace (as produced by `solve_with_trace`) against the solver
/// invariants; returns (clean, violation strings).
#[pyfunction]
#[pyo3(signature = (instance, trace_json, eps=None))]
fn audit(instance: &MarketInstance, trace_json: &str, eps: Option<f64>) -> PyResult<(bool, Vec<String>)> {
    let states = io::read_trace(trace_json, &instance.inner)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = stable_market::audit_trace(&instance.inner, &states, eps.unwrap_or(DEFAULT_EPS));
    let violations = report
        .violations
        .iter()
        .map(|v| format!("{} at pass {}: {}", v.lemma, v.pass, v.detail))
        .collect();
    Ok((report.is_clean(), violations))
}

#[pyfunction]
#[pyo3(signature = (seed, num_sellers, num_buyers, lo, hi))]
fn generate(seed: u64, num_sellers: usize, num_buyers: usize, lo: i64, hi: i64) -> PyResult<MarketInstance> {
    let config = GeneratorConfig::for_market(seed, num_sellers, num_buyers, lo, hi);
    let inner = stable_market::generate(&config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(MarketInstance { inner })
}

/// Every stable outcome of a tiny instance (guarded brute force).
#[pyfunction]
#[pyo3(signature = (instance, eps=None))]
fn enumerate_stable(instance: &MarketInstance, eps: Option<f64>) -> PyResult<Vec<Outcome>> {
    let outcomes =
        stable_market::enumerate_stable_outcomes(&instance.inner, eps.unwrap_or(DEFAULT_EPS))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(outcomes
        .into_iter()
        .map(|inner| Outcome {
            instance: instance.inner.clone(),
            inner,
        })
        .collect())
}

fn solver_err(e: stable_market::SolverError) -> PyErr {
    match e {
        stable_market::SolverError::Rejected(report) => {
            PyValueError::new_err(format!("invalid instance: {report}"))
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

#[pymodule]
fn stable_market_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MarketInstance>()?;
    m.add_class::<Outcome>()?;
    m.add_class::<StabilityReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_with_trace, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_stable, m)?)?;
    m.add("DEFAULT_EPS", DEFAULT_EPS)?;
    Ok(())
}
