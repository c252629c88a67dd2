//! The consensus propagation state machine.
//!
//! Each directed edge `{i,j}` carries a message `(μ_ij, K_ij)`: a mean and a
//! precision. An update of `{i,j}` combines node `i`'s observation with the
//! messages `i` holds from every neighbor except `j`:
//!
//! ```text
//! K_ij ← F_ij(K)    = s / (1 + s / (β Q_ij)),   s = 1 + Σ_{u∈N(i)\j} K_ui
//! μ_ij ← G_ij(μ, K) = (y_i + Σ_{u∈N(i)\j} K_ui μ_ui) / s
//! x_i  = X_i(μ, K)  = (y_i + Σ_{u∈N(i)} K_ui μ_ui) / (1 + Σ_{u∈N(i)} K_ui)
//! ```
//!
//! With `β = ∞` the attenuation disappears and, on a tree, `K_ij` counts the
//! nodes behind `i` while `μ_ij` is their average.

mod regular;
mod schedule;
mod trace;

pub use regular::{gamma_of, k_beta, k_next};
pub use schedule::{Schedule, ScheduleCursor, UpdateSet};
pub(crate) use trace::fmt_opt;
pub use trace::{epsilon_convergence_time, RunTrace, Termination, TraceRecord};

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, EdgeWeights, Graph};
use crate::norms::{consensus_error, max_abs_diff, mean};
use crate::{Error, Result};

/// Inverse temperature `β`: a positive real or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Beta(f64);

impl Beta {
    pub const INFINITE: Beta = Beta(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && !value.is_nan() {
            Ok(Beta(value))
        } else {
            Err(Error::Config(format!("beta must be positive, got {value}")))
        }
    }

    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() {
            Self::new(value)
        } else {
            Err(Error::Config(format!("beta must be finite here, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// Parameters of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub beta: Beta,
    pub weights: EdgeWeights,
    /// Node observations.
    pub y: Vec<f64>,
    /// Initial means, one per directed edge.
    pub mu0: Vec<f64>,
    /// Initial precisions, one per directed edge; non-negative.
    pub k0: Vec<f64>,
}

impl ProtocolConfig {
    /// Unit weights, `K⁰ = 0` and `μ⁰_ij = y_i`.
    pub fn new(graph: &Graph, beta: Beta, y: Vec<f64>) -> Self {
        let mu0 = graph
            .directed_edges()
            .iter()
            .map(|e| y.get(e.source).copied().unwrap_or(0.0))
            .collect();
        Self {
            beta,
            weights: EdgeWeights::uniform(graph),
            y,
            mu0,
            k0: vec![0.0; graph.num_directed()],
        }
    }

    pub fn with_weights(mut self, weights: EdgeWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_initial(mut self, mu0: Vec<f64>, k0: Vec<f64>) -> Self {
        self.mu0 = mu0;
        self.k0 = k0;
        self
    }

    /// Uniform `K⁰ = [k0]`.
    pub fn with_uniform_k0(mut self, k0: f64) -> Self {
        self.k0.iter_mut().for_each(|k| *k = k0);
        self
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let m = graph.num_directed();
        if self.y.len() != graph.n() {
            return Err(Error::Config(format!(
                "y has {} entries, graph has {} nodes",
                self.y.len(),
                graph.n()
            )));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("y contains a non-finite value".into()));
        }
        if self.mu0.len() != m || self.k0.len() != m {
            return Err(Error::Config(format!(
                "initial messages must have one entry per directed edge ({m}); got mu0={}, K0={}",
                self.mu0.len(),
                self.k0.len()
            )));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mu0 contains a non-finite value".into()));
        }
        if let Some(e) = self.k0.iter().position(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(Error::Config(format!(
                "K0 must be finite and non-negative; edge {} has {}",
                graph.directed_edge(e),
                self.k0[e]
            )));
        }
        if self.weights.values().len() != graph.num_undirected() {
            return Err(Error::Config("edge weights do not match the graph".into()));
        }
        if self.beta.is_infinite() && !graph.is_tree() {
            return Err(Error::Config(
                "beta = inf is only supported on trees: on a graph with cycles the \
                 unattenuated precisions grow without bound; use a finite beta"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Messages and estimates after `t` iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageState {
    pub t: usize,
    pub mu: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub x: Vec<f64>,
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_t: usize,
    /// Stop once `max(|Δμ|, |ΔK|)` over a full schedule cycle drops below this.
    pub eps_mu: Option<f64>,
    /// Stop once `‖x − ȳ1‖_{2,n}` drops to this level.
    pub eps_target: Option<f64>,
    /// Record every `stride`-th step; `None` picks a default from the size.
    pub stride: Option<usize>,
    /// Include per-node estimates in trace records.
    pub record_x: bool,
}

impl StopRule {
    pub fn max_steps(max_t: usize) -> Self {
        Self {
            max_t,
            eps_mu: None,
            eps_target: None,
            stride: None,
            record_x: false,
        }
    }

    pub fn with_eps_mu(mut self, eps: f64) -> Self {
        self.eps_mu = Some(eps);
        self
    }

    pub fn with_eps_target(mut self, eps: f64) -> Self {
        self.eps_target = Some(eps);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride.max(1));
        self
    }

    pub fn recording_x(mut self) -> Self {
        self.record_x = true;
        self
    }

    pub(crate) fn effective_stride(&self, num_edges: usize) -> usize {
        match self.stride {
            Some(s) => s.max(1),
            None if num_edges <= 1024 => 1,
            None => self.max_t.div_ceil(1000).max(1),
        }
    }
}

/// A consensus propagation instance: a graph plus a validated configuration.
#[derive(Debug, Clone)]
pub struct ConsensusPropagation<'g> {
    graph: &'g Graph,
    config: ProtocolConfig,
    /// `Q` per directed edge.
    q: Vec<f64>,
}

impl<'g> ConsensusPropagation<'g> {
    pub fn new(graph: &'g Graph, config: ProtocolConfig) -> Result<Self> {
        config.validate(graph)?;
        let q = config.weights.per_directed(graph);
        Ok(Self { graph, config, q })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    /// Same instance with a different `β`; used when `β` changes between
    /// phases while the messages carry over.
    pub fn with_beta(&self, beta: Beta) -> Result<Self> {
        let mut config = self.config.clone();
        config.beta = beta;
        Self::new(self.graph, config)
    }

    /// `1 + Σ_{u∈N(i)\j} K_ui` for `e = {i,j}`.
    fn precision_in(&self, k: &[f64], e: EdgeId) -> f64 {
        let i = self.graph.directed_edge(e).source;
        let back = self.graph.reverse(e);
        1.0 + self
            .graph
            .incoming(i)
            .iter()
            .filter(|&&u| u != back)
            .map(|&u| k[u])
            .sum::<f64>()
    }

    /// `F_ij(K)`; falls back to the unattenuated form when `β = ∞`.
    pub fn f_ij(&self, k: &[f64], e: EdgeId) -> f64 {
        let s = self.precision_in(k, e);
        if self.config.beta.is_infinite() {
            return s;
        }
        s / (1.0 + s / (self.config.beta.value() * self.q[e]))
    }

    /// `1 + Σ_{u∈N(i)\j} K_ui`, the `β = ∞` precision update.
    pub fn f_ij_unattenuated(&self, k: &[f64], e: EdgeId) -> f64 {
        self.precision_in(k, e)
    }

    pub fn g_ij(&self, mu: &[f64], k: &[f64], e: EdgeId) -> f64 {
        let i = self.graph.directed_edge(e).source;
        let back = self.graph.reverse(e);
        let (mut num, mut den) = (self.config.y[i], 1.0);
        for &u in self.graph.incoming(i) {
            if u != back {
                num += k[u] * mu[u];
                den += k[u];
            }
        }
        num / den
    }

    /// Node estimates `X(μ, K)`.
    pub fn estimate(&self, mu: &[f64], k: &[f64]) -> Vec<f64> {
        (0..self.graph.n())
            .map(|i| {
                let (mut num, mut den) = (self.config.y[i], 1.0);
                for &u in self.graph.incoming(i) {
                    num += k[u] * mu[u];
                    den += k[u];
                }
                num / den
            })
            .collect()
    }

    /// `F` applied to every directed edge.
    pub fn f_all(&self, k: &[f64]) -> Vec<f64> {
        (0..k.len()).map(|e| self.f_ij(k, e)).collect()
    }

    /// `G(·, K)` applied to every directed edge.
    pub fn g_all(&self, mu: &[f64], k: &[f64]) -> Vec<f64> {
        (0..mu.len()).map(|e| self.g_ij(mu, k, e)).collect()
    }

    pub fn initial_state(&self) -> MessageState {
        self.state_from(0, self.config.mu0.clone(), self.config.k0.clone())
    }

    /// A state at time `t` with the given messages and `x = X(μ, K)`.
    pub fn state_from(&self, t: usize, mu: Vec<f64>, k: Vec<f64>) -> MessageState {
        let x = self.estimate(&mu, &k);
        MessageState { t, mu, k, x }
    }

    /// Update every directed edge from the previous state; `x` is computed
    /// from the new messages.
    pub fn step_sync(&self, state: &MessageState) -> MessageState {
        let k = self.f_all(&state.k);
        let mu = self.g_all(&state.mu, &state.k);
        self.state_from(state.t + 1, mu, k)
    }

    /// Update only the edges in `edges`; every other message is copied.
    pub fn step_async(&self, state: &MessageState, edges: &[EdgeId]) -> MessageState {
        let mut k = state.k.clone();
        let mut mu = state.mu.clone();
        for &e in edges {
            k[e] = self.f_ij(&state.k, e);
            mu[e] = self.g_ij(&state.mu, &state.k, e);
        }
        self.state_from(state.t + 1, mu, k)
    }

    pub fn step(&self, state: &MessageState, set: UpdateSet<'_>) -> MessageState {
        match set {
            UpdateSet::All => self.step_sync(state),
            UpdateSet::Edges(edges) => self.step_async(state, edges),
        }
    }

    /// Residuals `(‖K − F(K)‖∞, ‖μ − G(μ, K)‖∞)` of a state.
    pub fn fixed_point_residual(&self, state: &MessageState) -> (f64, f64) {
        (
            max_abs_diff(&state.k, &self.f_all(&state.k)),
            max_abs_diff(&state.mu, &self.g_all(&state.mu, &state.k)),
        )
    }

    /// Max-norm contraction factor of `G(·, K)`:
    /// `max_{ij} Σ_{u∈N(i)\j} K_ui / (1 + Σ_{u∈N(i)\j} K_ui)`.
    pub fn contraction_factor(&self, k: &[f64]) -> f64 {
        (0..k.len())
            .map(|e| {
                let s = self.precision_in(k, e);
                (s - 1.0) / s
            })
            .fold(0.0, f64::max)
    }

    pub fn run(&self, schedule: &Schedule, stop: &StopRule) -> Result<RunTrace> {
        self.run_from(self.initial_state(), schedule, stop)
    }

    /// Iterate from `state` until a stopping condition fires. Running out of
    /// budget is reported in the trace, not as an error.
    pub fn run_from(&self, state: MessageState, schedule: &Schedule, stop: &StopRule) -> Result<RunTrace> {
        schedule.validate(self.graph)?;
        let target = mean(&self.config.y);
        let stride = stop.effective_stride(self.graph.num_directed());
        let window = schedule.window(self.graph);
        let mut cursor = schedule.cursor(self.graph);

        let mut state = state;
        let mut trace = RunTrace::new(target);
        let err0 = consensus_error(&state.x, target);
        trace.push_error(err0);
        trace.push_record(TraceRecord::new(
            state.t,
            err0,
            None,
            None,
            stop.record_x.then(|| state.x.clone()),
        ));

        let mut reason = Termination::BudgetExhausted;
        if stop.eps_target.is_some_and(|eps| err0 <= eps) {
            reason = Termination::TargetReached;
        }
        let start_t = state.t;
        let (mut win_max, mut win_len) = (0.0f64, 0usize);

        while reason == Termination::BudgetExhausted && state.t - start_t < stop.max_t {
            let next = self.step(&state, cursor.next_set());
            let dmu = max_abs_diff(&next.mu, &state.mu);
            let dk = max_abs_diff(&next.k, &state.k);
            state = next;

            let err = consensus_error(&state.x, target);
            trace.push_error(err);

            if stop.eps_target.is_some_and(|eps| err <= eps) {
                reason = Termination::TargetReached;
            }
            win_max = win_max.max(dmu).max(dk);
            win_len += 1;
            if win_len == window {
                if stop.eps_mu.is_some_and(|eps| win_max < eps) {
                    reason = Termination::Converged;
                }
                win_max = 0.0;
                win_len = 0;
            }

            let last = reason != Termination::BudgetExhausted || state.t - start_t == stop.max_t;
            if (state.t - start_t).is_multiple_of(stride) || last {
                trace.push_record(TraceRecord::new(
                    state.t,
                    err,
                    Some(dmu),
                    Some(dk),
                    stop.record_x.then(|| state.x.clone()),
                ));
            }
        }
        trace.finish(state, reason);
        Ok(trace)
    }
}
