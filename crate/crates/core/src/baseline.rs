//! Synchronous pairwise averaging, `x^(t) = P x^(t−1)`.

use nalgebra::DMatrix;

use crate::engine::{MessageState, RunTrace, StopRule, Termination, TraceRecord};
use crate::graph::Graph;
use crate::norms::{consensus_error, mean};
use crate::{Error, Result};

/// Default self-loop blend for [`metropolis_matrix`].
pub const DEFAULT_LAZINESS: f64 = 0.5;

/// A symmetric doubly stochastic matrix supported on the graph's edges and
/// the diagonal.
#[derive(Debug, Clone)]
pub struct AveragingMatrix {
    pub p: DMatrix<f64>,
    pub laziness: f64,
    /// Laziness 0 on a bipartite graph: `−1` is an eigenvalue and the
    /// iteration oscillates instead of converging.
    pub bipartite_warning: bool,
    /// Nonzero entries per row, `(column, weight)`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl AveragingMatrix {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// One averaging step.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, w)| w * x[c]).sum())
            .collect()
    }
}

/// Metropolis weights `P_ij = min(1/d_i, 1/d_j)` on edges with the diagonal
/// absorbing the remainder, blended as `(1 − λ) P + λ I`.
pub fn metropolis_matrix(graph: &Graph, laziness: f64) -> Result<AveragingMatrix> {
    if !(0.0..1.0).contains(&laziness) {
        return Err(Error::Config(format!("laziness must be in [0,1), got {laziness}")));
    }
    let n = graph.n();
    let mut p = DMatrix::zeros(n, n);
    for &(i, j) in graph.undirected_edges() {
        let w = (1.0 / graph.degree(i) as f64).min(1.0 / graph.degree(j) as f64);
        p[(i, j)] = w;
        p[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = graph.neighbors(i).iter().map(|&j| p[(i, j)]).sum();
        p[(i, i)] = 1.0 - off;
    }
    let p = p * (1.0 - laziness) + DMatrix::identity(n, n) * laziness;
    let bipartite_warning = laziness == 0.0 && graph.is_bipartite();
    if bipartite_warning {
        log::warn!("bipartite graph with laziness 0: the averaging matrix can have eigenvalue -1 and fail to converge");
    }
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = std::iter::once(i)
                .chain(graph.neighbors(i).iter().copied())
                .map(|c| (c, p[(i, c)]))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            row.sort_by_key(|&(c, _)| c);
            row
        })
        .collect();
    Ok(AveragingMatrix {
        p,
        laziness,
        bipartite_warning,
        rows,
    })
}

/// Iterate `x ← P x` from `x = y`. The trace uses the engine's schema with
/// the message columns left empty.
pub fn run_pairwise(matrix: &AveragingMatrix, y: &[f64], stop: &StopRule) -> Result<RunTrace> {
    if y.len() != matrix.n() {
        return Err(Error::Config(format!(
            "y has {} entries, matrix has {} rows",
            y.len(),
            matrix.n()
        )));
    }
    let target = mean(y);
    let stride = stop.effective_stride(matrix.rows.iter().map(Vec::len).sum());
    let mut trace = RunTrace::new(target);
    let mut x = y.to_vec();
    let err0 = consensus_error(&x, target);
    trace.push_error(err0);
    trace.push_record(TraceRecord::new(0, err0, None, None, stop.record_x.then(|| x.clone())));

    let mut reason = Termination::BudgetExhausted;
    if stop.eps_target.is_some_and(|eps| err0 <= eps) {
        reason = Termination::TargetReached;
    }
    let mut t = 0;
    while reason == Termination::BudgetExhausted && t < stop.max_t {
        x = matrix.apply(&x);
        t += 1;
        let err = consensus_error(&x, target);
        trace.push_error(err);
        if stop.eps_target.is_some_and(|eps| err <= eps) {
            reason = Termination::TargetReached;
        }
        if t % stride == 0 || reason != Termination::BudgetExhausted || t == stop.max_t {
            trace.push_record(TraceRecord::new(t, err, None, None, stop.record_x.then(|| x.clone())));
        }
    }
    trace.finish(
        MessageState {
            t,
            mu: Vec::new(),
            k: Vec::new(),
            x,
        },
        reason,
    );
    Ok(trace)
}
