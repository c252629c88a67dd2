//! Python bindings for `consensus_prop`.

use consensus_prop::adaptive::{self, AdaptiveOptions, AdaptiveStop};
use consensus_prop::analysis;
use consensus_prop::baseline::{self, DEFAULT_LAZINESS};
use consensus_prop::engine::{self, Beta, ConsensusPropagation, ProtocolConfig, RunTrace, Schedule, StopRule};
use consensus_prop::graph::{self, EdgeWeights, TreeShape};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn py_err(e: consensus_prop::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Graph", module = "consensus_prop_py", frozen)]
struct PyGraph {
    inner: graph::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        graph::build_graph(n, &edges)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        graph::generate_cycle(n).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn torus(m: usize, side: usize) -> PyResult<Self> {
        graph::generate_torus(m, side)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, d, seed=0))]
    fn random_regular(n: usize, d: usize, seed: u64) -> PyResult<Self> {
        graph::generate_random_regular(n, d, seed)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// `shape` is "path", "binary", "kary:<k>" or "random".
    #[staticmethod]
    #[pyo3(signature = (n, shape="path", seed=0))]
    fn tree(n: usize, shape: &str, seed: u64) -> PyResult<Self> {
        let shape = match shape {
            "path" => TreeShape::Path,
            "binary" => TreeShape::Balanced { arity: 2 },
            "random" => TreeShape::Random,
            s => match s.strip_prefix("kary:").and_then(|k| k.parse().ok()) {
                Some(arity) => TreeShape::Balanced { arity },
                None => return Err(PyValueError::new_err(format!("unknown tree shape {s:?}"))),
            },
        };
        graph::generate_tree(n, shape, seed)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        graph::Graph::load(path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.undirected_edges().to_vec()
    }

    fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.inner
            .directed_edges()
            .iter()
            .map(|e| (e.source, e.target))
            .collect()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("node {i} out of range")));
        }
        Ok(self.inner.neighbors(i).to_vec())
    }

    fn regular_degree(&self) -> Option<usize> {
        self.inner.regular_degree()
    }

    fn is_tree(&self) -> bool {
        self.inner.is_tree()
    }

    fn diameter(&self) -> usize {
        self.inner.diameter()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.num_undirected())
    }
}

fn to_beta(beta: f64) -> PyResult<Beta> {
    Beta::new(beta).map_err(py_err)
}

fn trace_dict<'py>(py: Python<'py>, trace: &RunTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", trace.terminal.t)?;
    d.set_item("reason", trace.reason.as_str())?;
    d.set_item("target", trace.target)?;
    d.set_item("errors", trace.errors.clone())?;
    d.set_item("x", trace.terminal.x.clone())?;
    d.set_item("mu", trace.terminal.mu.clone())?;
    d.set_item("K", trace.terminal.k.clone())?;
    Ok(d)
}

#[pyfunction]
fn k_beta(d: usize, beta: f64) -> PyResult<f64> {
    if d < 2 || !(beta > 0.0 && beta.is_finite()) {
        return Err(PyValueError::new_err("k_beta needs d >= 2 and a finite beta > 0"));
    }
    Ok(engine::k_beta(d, beta))
}

#[pyfunction]
fn gamma_of(k: f64, d: usize) -> f64 {
    engine::gamma_of(k, d)
}

#[pyfunction]
fn beta_for(tau_guess: f64, epsilon: f64, d: usize) -> PyResult<f64> {
    adaptive::beta_for(tau_guess, epsilon, d).map_err(py_err)
}

#[pyfunction]
fn t_star_for(beta: f64, tau_guess: f64, epsilon: f64, d: usize) -> PyResult<usize> {
    adaptive::t_star_for(beta, tau_guess, epsilon, d).map_err(py_err)
}

/// The mode `x^β` for unit edge weights.
#[pyfunction]
fn solve_mode(graph: &PyGraph, beta: f64, y: Vec<f64>) -> PyResult<Vec<f64>> {
    let g = &graph.inner;
    analysis::solve_mode(g, &EdgeWeights::uniform(g), beta, &y).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (graph, laziness=DEFAULT_LAZINESS))]
fn mixing_report<'py>(py: Python<'py>, graph: &PyGraph, laziness: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = analysis::mixing_report(&graph.inner, laziness).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("tau_star", r.tau_star)?;
    d.set_item("attained_t", r.attained_t)?;
    d.set_item("tau2", r.tau2)?;
    d.set_item("lambda2", r.lambda2)?;
    d.set_item("n", r.n)?;
    d.set_item("d", r.d)?;
    Ok(d)
}

/// Run consensus propagation. `beta` may be `float("inf")` on trees;
/// `schedule` is "sync", "round-robin" or "random-subset".
#[pyfunction]
#[pyo3(signature = (graph, y, beta, max_t=1000, eps_mu=None, eps_target=None, k0=0.0, schedule="sync", p=0.5, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_cp<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    y: Vec<f64>,
    beta: f64,
    max_t: usize,
    eps_mu: Option<f64>,
    eps_target: Option<f64>,
    k0: f64,
    schedule: &str,
    p: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = &graph.inner;
    let schedule = match schedule {
        "sync" => Schedule::Synchronous,
        "round-robin" => Schedule::RoundRobin,
        "random-subset" => Schedule::RandomSubset { p, seed },
        s => return Err(PyValueError::new_err(format!("unknown schedule {s:?}"))),
    };
    let cfg = ProtocolConfig::new(g, to_beta(beta)?, y).with_uniform_k0(k0);
    let cp = ConsensusPropagation::new(g, cfg).map_err(py_err)?;
    let mut stop = StopRule::max_steps(max_t);
    stop.eps_mu = eps_mu;
    stop.eps_target = eps_target;
    let trace = py.detach(|| cp.run(&schedule, &stop)).map_err(py_err)?;
    trace_dict(py, &trace)
}

#[pyfunction]
#[pyo3(signature = (graph, y, laziness=DEFAULT_LAZINESS, max_t=1000, eps_target=None))]
fn run_pairwise<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    y: Vec<f64>,
    laziness: f64,
    max_t: usize,
    eps_target: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = baseline::metropolis_matrix(&graph.inner, laziness).map_err(py_err)?;
    let mut stop = StopRule::max_steps(max_t);
    stop.eps_target = eps_target;
    let trace = py.detach(|| baseline::run_pairwise(&m, &y, &stop)).map_err(py_err)?;
    trace_dict(py, &trace)
}

#[pyfunction]
#[pyo3(signature = (graph, y, epsilon, max_phases=30, tau_cap=None))]
fn run_adaptive<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    y: Vec<f64>,
    epsilon: f64,
    max_phases: usize,
    tau_cap: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = AdaptiveOptions {
        max_phases,
        tau_cap,
        ..AdaptiveOptions::default()
    };
    let run = py
        .detach(|| adaptive::run_adaptive(&graph.inner, &y, epsilon, &opts))
        .map_err(py_err)?;
    let d = trace_dict(py, &run.trace)?;
    let phases = PyList::empty(py);
    for ph in &run.phases {
        let pd = PyDict::new(py);
        pd.set_item("phase", ph.phase)?;
        pd.set_item("tau_guess", ph.tau_guess)?;
        pd.set_item("beta", ph.beta)?;
        pd.set_item("k_beta", ph.k_beta)?;
        pd.set_item("t_star", ph.t_star)?;
        pd.set_item("start_t", ph.start_t)?;
        pd.set_item("end_t", ph.end_t)?;
        pd.set_item("endpoint_error", ph.endpoint_error)?;
        phases.append(pd)?;
    }
    d.set_item("phases", phases)?;
    let stop = match run.stop {
        AdaptiveStop::Stable => "stable",
        AdaptiveStop::TauCap => "tau_cap",
        AdaptiveStop::PhaseBudget => "phase_budget",
        AdaptiveStop::StepBudget => "step_budget",
    };
    d.set_item("stop", stop)?;
    Ok(d)
}

#[pymodule]
fn consensus_prop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(k_beta, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_of, m)?)?;
    m.add_function(wrap_pyfunction!(beta_for, m)?)?;
    m.add_function(wrap_pyfunction!(t_star_for, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mode, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_cp, m)?)?;
    m.add_function(wrap_pyfunction!(run_pairwise, m)?)?;
    m.add_function(wrap_pyfunction!(run_adaptive, m)?)?;
    Ok(())
}
