//! Python bindings: problems, compiled protocols, verification and sampling.

use std::collections::BTreeMap;

use locc2d_core::compiler::{ancilla_sin2, direct_coefficients, direct_condition};
use locc2d_core::io::{protocol_from_json, protocol_to_json};
use locc2d_core::runtime::{verify_protocol, MessageKind, Party};
use locc2d_core::tensor::CMatrix;
use locc2d_core::{demos, CompileConfig, DensityMatrix, ExecutionPlan, Operator, Tolerances};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: locc2d_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A measurement problem: states spanning a two-dimensional subspace and a
/// POVM on it.
#[pyclass(name = "Problem", module = "locc2d")]
struct PyProblem {
    inner: locc2d_core::Problem,
}

impl PyProblem {
    fn state(&self, state_index: Option<usize>) -> PyResult<DensityMatrix> {
        match state_index {
            None => self.inner.mixture().map_err(err),
            Some(i) => self
                .inner
                .states
                .get(i)
                .cloned()
                .ok_or_else(|| PyValueError::new_err(format!("state index {i} out of range"))),
        }
    }
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = locc2d_core::Problem::from_json(text, &Tolerances::default()).map_err(err)?;
        Ok(PyProblem { inner })
    }

    /// One of `"singlet-triplet"`, `"trine"`, `"ghz3"`.
    #[staticmethod]
    fn demo(name: &str) -> PyResult<Self> {
        let inner = demos::by_name(name, &Tolerances::default()).map_err(err)?;
        Ok(PyProblem { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims.clone()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.states.len()
    }

    #[getter]
    fn state_labels(&self) -> Option<Vec<usize>> {
        self.inner.state_labels.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.povm.labels().to_vec()
    }

    /// Born probabilities `Tr(ρ Π_m)` per label; `state_index=None` uses the
    /// uniform mixture.
    #[pyo3(signature = (state_index=None))]
    fn born_probabilities(&self, state_index: Option<usize>) -> PyResult<BTreeMap<usize, f64>> {
        let rho = self.state(state_index)?;
        Ok(self.inner.povm.per_label().into_iter().map(|(l, e)| (l, rho.operator().trace_product(&e))).collect())
    }

    #[pyo3(signature = (permute_heuristic=true))]
    fn compile(&self, permute_heuristic: bool) -> PyResult<PyProtocol> {
        let config = CompileConfig { permute_heuristic, tol: Tolerances::default() };
        let inner = self.inner.compile(&config).map_err(err)?;
        Ok(PyProtocol { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, dims={:?}, states={}, labels={:?})",
            self.inner.name.as_deref().unwrap_or(""),
            self.inner.dims,
            self.inner.states.len(),
            self.inner.povm.labels()
        )
    }
}

/// A compiled one-way LOCC protocol.
#[pyclass(name = "Protocol", module = "locc2d")]
struct PyProtocol {
    inner: locc2d_core::Protocol,
}

impl PyProtocol {
    fn plan(&self) -> PyResult<ExecutionPlan> {
        ExecutionPlan::new(&self.inner).map_err(err)
    }
}

fn density_from_rows(rows: Vec<Vec<Complex64>>, dims: &[usize]) -> PyResult<DensityMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("density matrix must be square"));
    }
    let m = CMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let op = Operator::new(m, dims.to_vec()).map_err(err)?;
    DensityMatrix::new(op, &Tolerances::default()).map_err(err)
}

#[pymethods]
impl PyProtocol {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyProtocol { inner: protocol_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        protocol_to_json(&self.inner)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.subspace.dims().to_vec()
    }

    #[getter]
    fn ancilla_depth(&self) -> usize {
        self.inner.tree.ancilla_depth()
    }

    #[getter]
    fn round_depth(&self) -> usize {
        self.inner.tree.round_depth()
    }

    /// `sin²θ` of every ancilla round in pre-order.
    #[getter]
    fn sin2_thetas(&self) -> Vec<f64> {
        self.inner.tree.ancilla_nodes().iter().map(|n| n.sin2_theta()).collect()
    }

    /// Induced POVM elements per label as nested lists of complex numbers.
    fn induced_povm(&self) -> PyResult<BTreeMap<usize, Vec<Vec<Complex64>>>> {
        let povm = self.plan()?.induced_povm();
        Ok(povm
            .per_label()
            .into_iter()
            .map(|(l, e)| {
                let m = e.matrix();
                (l, (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
            })
            .collect())
    }

    fn completeness_residual(&self) -> PyResult<f64> {
        Ok(self.plan()?.completeness_residual())
    }

    /// Verification against `problem`; returns a dict of residuals and `passed`.
    fn verify<'py>(&self, py: Python<'py>, problem: &PyProblem) -> PyResult<Bound<'py, PyDict>> {
        let r = verify_protocol(&self.inner, &problem.inner.povm, &problem.inner.states);
        let d = PyDict::new(py);
        d.set_item("passed", r.passed)?;
        d.set_item("induced_residual", r.induced_residual)?;
        d.set_item("completeness_residual", r.completeness_residual)?;
        d.set_item("label_residuals", r.label_residuals.clone())?;
        d.set_item("state_deviations", r.state_deviations.clone())?;
        d.set_item("max_direct_certificate", r.max_direct_certificate)?;
        d.set_item("max_ancilla_certificate", r.max_ancilla_certificate)?;
        d.set_item("max_unitarity_residual", r.max_unitarity_residual)?;
        d.set_item("malformed", r.malformed.clone())?;
        d.set_item("report", r.to_string())?;
        Ok(d)
    }

    /// Exact outcome probabilities for one of `problem`'s states (or their
    /// uniform mixture when `state_index` is None).
    #[pyo3(signature = (problem, state_index=None))]
    fn exact_distribution(&self, problem: &PyProblem, state_index: Option<usize>) -> PyResult<BTreeMap<usize, f64>> {
        let rho = problem.state(state_index)?;
        Ok(self.plan()?.exact_distribution(&rho).map_err(err)?.probabilities)
    }

    /// Exact outcome probabilities for an explicit density matrix given as rows.
    fn exact_distribution_rho(&self, rho: Vec<Vec<Complex64>>) -> PyResult<BTreeMap<usize, f64>> {
        let rho = density_from_rows(rho, self.inner.subspace.dims())?;
        Ok(self.plan()?.exact_distribution(&rho).map_err(err)?.probabilities)
    }

    #[pyo3(signature = (problem, shots, seed=0, state_index=None))]
    fn sample(
        &self,
        problem: &PyProblem,
        shots: usize,
        seed: u64,
        state_index: Option<usize>,
    ) -> PyResult<BTreeMap<usize, u64>> {
        let rho = problem.state(state_index)?;
        self.plan()?.sample(&rho, shots, seed).map_err(err)
    }

    /// Two-party sessions `0..count`; each is a list of message dicts.
    #[pyo3(signature = (problem, count, seed=0, state_index=None))]
    fn sessions<'py>(
        &self,
        py: Python<'py>,
        problem: &PyProblem,
        count: u64,
        seed: u64,
        state_index: Option<usize>,
    ) -> PyResult<Vec<Vec<Bound<'py, PyDict>>>> {
        let rho = problem.state(state_index)?;
        let transcripts = self.plan()?.sessions(&rho, seed, count).map_err(err)?;
        transcripts
            .iter()
            .map(|t| {
                t.messages
                    .iter()
                    .map(|m| {
                        let d = PyDict::new(py);
                        d.set_item("seq", m.seq)?;
                        d.set_item("from", if m.from == Party::Alice { "A" } else { "B" })?;
                        let kind = match m.kind {
                            MessageKind::RoundOutcome => "round_outcome",
                            MessageKind::FinalLabel => "final_label",
                        };
                        d.set_item("type", kind)?;
                        d.set_item("round", m.round)?;
                        d.set_item("value", m.value)?;
                        Ok(d)
                    })
                    .collect()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Protocol(dims={:?}, rounds={}, ancilla_depth={})",
            self.inner.subspace.dims(),
            self.inner.tree.round_depth(),
            self.inner.tree.ancilla_depth()
        )
    }
}

/// `γ₁ ≥ η₀ − (1 − γ₁) ν₀`, ties counted as true.
#[pyfunction(name = "direct_condition")]
fn py_direct_condition(gamma1: f64, eta0: f64, nu0: f64) -> bool {
    direct_condition(gamma1, eta0, nu0)
}

#[pyfunction(name = "ancilla_sin2")]
fn py_ancilla_sin2(gamma1: f64, eta0: f64, nu0: f64) -> f64 {
    ancilla_sin2(gamma1, eta0, nu0)
}

#[pyfunction(name = "direct_coefficients")]
fn py_direct_coefficients(gamma1: f64, eta0: f64, nu0: f64, count: usize) -> Vec<f64> {
    direct_coefficients(gamma1, eta0, nu0, count)
}

#[pymodule]
fn locc2d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyProtocol>()?;
    m.add_function(wrap_pyfunction!(py_direct_condition, m)?)?;
    m.add_function(wrap_pyfunction!(py_ancilla_sin2, m)?)?;
    m.add_function(wrap_pyfunction!(py_direct_coefficients, m)?)?;
    m.add("DEMOS", demos::DEMO_NAMES.to_vec())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
