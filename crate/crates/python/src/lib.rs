//! Python bindings. Build with `--features extension-module` and import the
//! resulting shared library as `seqlogic_py`.
//!
//! Structured results (reports, statistics) are returned as plain Python
//! dicts decoded from the same JSON the CLI prints.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seqlogic::circuit;
use seqlogic::harness::{self, default_max_attempts, EstimateOptions, VerifyOptions};
use seqlogic::oracle;
use seqlogic::{AssignmentFile, ElementaryAssignment, ElementaryLabel, Error, PrepPath, StateKet, VerifyMode};

fn err(e: Error) -> PyErr {
    match e {
        Error::ExhaustedAttempts { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, json: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn parse_path(path: &str) -> PyResult<PrepPath> {
    path.parse().map_err(err)
}

/// A sequential quantum logic proposition.
#[pyclass(module = "seqlogic_py", frozen)]
struct Proposition {
    inner: seqlogic::Proposition,
}

#[pymethods]
impl Proposition {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        seqlogic::Proposition::parse(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn canonical(&self) -> Self {
        Self {
            inner: self.inner.canonicalize(),
        }
    }

    fn leaves(&self) -> Vec<String> {
        self.inner.leaf_labels().iter().map(|l| l.to_string()).collect()
    }

    #[getter]
    fn ands(&self) -> usize {
        self.inner.count_seq_ands()
    }

    #[getter]
    fn nots(&self) -> usize {
        self.inner.count_nots()
    }

    #[getter]
    fn contains_xor(&self) -> bool {
        self.inner.contains_xor()
    }

    /// Boolean value for a truth assignment of the elementary labels.
    fn classical_eval(&self, truth: std::collections::HashMap<String, bool>) -> PyResult<bool> {
        let truth = truth
            .into_iter()
            .map(|(k, v)| Ok((ElementaryLabel::new(k)?, v)))
            .collect::<Result<_, Error>>()
            .map_err(err)?;
        self.inner.classical_eval(&truth).map_err(err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Proposition({:?})", self.inner.to_string())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Projectors for elementary labels together with the initial state.
#[pyclass(module = "seqlogic_py", frozen)]
struct Assignment {
    file: AssignmentFile,
    asg: ElementaryAssignment,
    psi: StateKet,
}

#[pymethods]
impl Assignment {
    /// Parses the JSON assignment format used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = AssignmentFile::from_json(text).map_err(err)?;
        let (asg, psi) = file.load().map_err(err)?;
        Ok(Self { file, asg, psi })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.asg.system_dim()
    }

    fn labels(&self) -> Vec<String> {
        self.asg.labels().map(|l| l.to_string()).collect()
    }
}

impl Assignment {
    fn require(&self, p: &Proposition) -> PyResult<()> {
        self.asg.require_labels(&p.inner).map_err(err)
    }
}

/// Branch norms, conditional distribution and success probability.
#[pyfunction]
fn analytic<'py>(py: Python<'py>, prop: &Proposition, assignment: &Assignment) -> PyResult<Bound<'py, PyDict>> {
    assignment.require(prop)?;
    let (p, asg, psi) = (&prop.inner, &assignment.asg, &assignment.psi);
    let w = oracle::branch_norms(p, psi, asg).map_err(err)?;
    let cond = oracle::conditional_distribution(p, psi, asg).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("w_true", w.w_true)?;
    out.set_item("w_false", w.w_false)?;
    out.set_item("p_true", cond.p_true)?;
    out.set_item("p_false", cond.p_false)?;
    let success = if p.contains_xor() {
        None
    } else {
        Some(oracle::overall_success_probability(p, psi, asg).map_err(err)?)
    };
    out.set_item("success_probability", success)?;
    Ok(out)
}

/// Compiles and returns the line-oriented circuit dump.
#[pyfunction]
#[pyo3(signature = (prop, assignment, path = "teleport"))]
fn compile(prop: &Proposition, assignment: &Assignment, path: &str) -> PyResult<String> {
    let c = circuit::compile(&prop.inner, &assignment.asg, parse_path(path)?).map_err(err)?;
    Ok(circuit::dump(&c))
}

/// One sampled run of the protocol without restarts.
#[pyfunction]
#[pyo3(signature = (prop, assignment, seed = 0, path = "teleport"))]
fn run<'py>(
    py: Python<'py>,
    prop: &Proposition,
    assignment: &Assignment,
    seed: u64,
    path: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let c = circuit::compile(&prop.inner, &assignment.asg, parse_path(path)?).map_err(err)?;
    let r = seqlogic::run(&c, &assignment.psi, seed).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("success", r.success)?;
    out.set_item("truth_value", r.truth_value)?;
    out.set_item("probability", r.probability)?;
    let residual = r
        .residual_system_state
        .map(|s| s.amplitudes().iter().map(|z| (z.re, z.im)).collect::<Vec<_>>());
    out.set_item("residual_system_state", residual)?;
    Ok(out)
}

/// Shot statistics. `retry=None` runs single attempts; `retry=0` restarts
/// with the default cap.
#[pyfunction]
#[pyo3(signature = (prop, assignment, shots = 10_000, seed = 0, path = "teleport", retry = None, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    prop: &Proposition,
    assignment: &Assignment,
    shots: u64,
    seed: u64,
    path: &str,
    retry: Option<u64>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let c = circuit::compile(&prop.inner, &assignment.asg, parse_path(path)?).map_err(err)?;
    let retry = match retry {
        Some(0) => {
            let p = oracle::overall_success_probability(&c.proposition, &assignment.psi, &assignment.asg)
                .map_err(err)?;
            Some(default_max_attempts(Some(p)))
        }
        other => other,
    };
    let opts = EstimateOptions {
        shots,
        seed,
        retry,
        jobs,
    };
    let stats = py
        .detach(|| harness::estimate(&c, &assignment.psi, opts))
        .map_err(err)?;
    to_py(py, serde_json::to_string(&stats).expect("serializable"))
}

/// Verification report against the oracle; `mode` is "exact" or "sampled".
#[pyfunction]
#[pyo3(signature = (prop, assignment, mode = "exact", shots = 10_000, seed = 0, path = None, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    prop: &Proposition,
    assignment: &Assignment,
    mode: &str,
    shots: u64,
    seed: u64,
    path: Option<&str>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    assignment.require(prop)?;
    let mode = match mode {
        "exact" => VerifyMode::Exact,
        "sampled" => VerifyMode::Sampled { shots, seed },
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let paths = path.map(parse_path).transpose()?.into_iter().collect();
    let opts = VerifyOptions { mode, paths, jobs };
    let report = py
        .detach(|| harness::verify(&prop.inner, &assignment.asg, &assignment.psi, &opts))
        .map_err(err)?;
    to_py(py, serde_json::to_string(&report).expect("serializable"))
}

#[pymodule]
fn seqlogic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Proposition>()?;
    m.add_class::<Assignment>()?;
    m.add_function(wrap_pyfunction!(analytic, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
