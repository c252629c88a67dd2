//! Spectral ground truth for consensus propagation and pairwise averaging.
//!
//! Everything here is dense linear algebra: it is meant to certify small
//! instances, not to scale.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::baseline::metropolis_matrix;
use crate::graph::{EdgeWeights, Graph};
use crate::{Error, Result};

/// Size above which [`solve_mode`] switches to conjugate gradient.
pub const DIRECT_SOLVE_MAX_N: usize = 2000;

/// Relative residual required of the mode solve.
const MODE_RESIDUAL_TOL: f64 = 1e-10;

/// The weighted Laplacian `Γ`, with `xᵀΓx = Σ_{(i,j)∈E} Q_ij (x_i − x_j)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianForm {
    pub gamma_matrix: DMatrix<f64>,
}

impl LaplacianForm {
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.gamma_matrix * &v))
    }
}

pub fn laplacian(graph: &Graph, weights: &EdgeWeights) -> LaplacianForm {
    let n = graph.n();
    let mut gamma = DMatrix::zeros(n, n);
    for (&(i, j), &q) in graph.undirected_edges().iter().zip(weights.values()) {
        gamma[(i, j)] -= q;
        gamma[(j, i)] -= q;
        gamma[(i, i)] += q;
        gamma[(j, j)] += q;
    }
    LaplacianForm { gamma_matrix: gamma }
}

/// The mode `x^β`: the solution of `(I + βΓ) x = y`, equivalently the
/// minimizer of `‖x − y‖² + β xᵀΓx`.
pub fn solve_mode(graph: &Graph, weights: &EdgeWeights, beta: f64, y: &[f64]) -> Result<Vec<f64>> {
    if graph.n() <= DIRECT_SOLVE_MAX_N {
        solve_mode_direct(graph, weights, beta, y)
    } else {
        solve_mode_cg(graph, weights, beta, y)
    }
}

fn check_mode_inputs(graph: &Graph, beta: f64, y: &[f64]) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("mode solve needs finite beta > 0, got {beta}")));
    }
    if y.len() != graph.n() {
        return Err(Error::Config(format!(
            "y has {} entries, graph has {} nodes",
            y.len(),
            graph.n()
        )));
    }
    Ok(())
}

/// `(I + βΓ) v` without forming the matrix.
fn apply_mode_operator(graph: &Graph, weights: &EdgeWeights, beta: f64, v: &[f64], out: &mut [f64]) {
    out.copy_from_slice(v);
    for (&(i, j), &q) in graph.undirected_edges().iter().zip(weights.values()) {
        let flow = beta * q * (v[i] - v[j]);
        out[i] += flow;
        out[j] -= flow;
    }
}

fn relative_residual(graph: &Graph, weights: &EdgeWeights, beta: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    apply_mode_operator(graph, weights, beta, x, &mut ax);
    let r: f64 = ax.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ny == 0.0 {
        r
    } else {
        r / ny
    }
}

pub fn solve_mode_direct(graph: &Graph, weights: &EdgeWeights, beta: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_mode_inputs(graph, beta, y)?;
    let n = graph.n();
    let system = DMatrix::identity(n, n) + laplacian(graph, weights).gamma_matrix * beta;
    let chol = Cholesky::new(system).ok_or_else(|| Error::Solver("I + βΓ is not positive definite".into()))?;
    let x: Vec<f64> = chol.solve(&DVector::from_column_slice(y)).iter().copied().collect();
    let res = relative_residual(graph, weights, beta, &x, y);
    if res < MODE_RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Solver(format!("direct solve residual {res:e}")))
    }
}

/// Conjugate gradient on `(I + βΓ) x = y`, matrix-free.
pub fn solve_mode_cg(graph: &Graph, weights: &EdgeWeights, beta: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_mode_inputs(graph, beta, y)?;
    let n = graph.n();
    let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if ny == 0.0 {
        return Ok(x);
    }
    let mut r = y.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 10 * n + 1000;
    for _ in 0..max_iter {
        if rr.sqrt() <= 1e-12 * ny {
            break;
        }
        apply_mode_operator(graph, weights, beta, &p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let ratio = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + ratio * p[k];
        }
    }
    let res = relative_residual(graph, weights, beta, &x, y);
    if res < MODE_RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Solver(format!(
            "conjugate gradient stalled at relative residual {res:e}"
        )))
    }
}

/// The non-backtracking Markov chain on directed edges of a regular graph
/// and the matrices derived from it.
#[derive(Debug, Clone)]
pub struct EdgeProcess {
    pub degree: usize,
    /// `P̂[{i,j}, {u,i}] = 1/(d−1)` for `u ∈ N(i) \ j`.
    pub p_hat: DMatrix<f64>,
    /// Cesàro limit of `P̂`.
    pub p_hat_star: DMatrix<f64>,
    /// `(Aμ)_j = Σ_{i∈N(j)} μ_ij / d`; `n × 2|E|`.
    pub averaging_a: DMatrix<f64>,
}

pub fn edge_process(graph: &Graph) -> Result<EdgeProcess> {
    let d = graph
        .regular_degree()
        .ok_or_else(|| Error::NotRegular("graph is not regular".into()))?;
    if d < 2 {
        return Err(Error::NotRegular(format!("degree is {d}")));
    }
    let m = graph.num_directed();
    let w = 1.0 / (d as f64 - 1.0);
    let mut p_hat = DMatrix::zeros(m, m);
    for e in 0..m {
        let i = graph.directed_edge(e).source;
        let back = graph.reverse(e);
        for &u in graph.incoming(i) {
            if u != back {
                p_hat[(e, u)] = w;
            }
        }
    }
    let mut averaging_a = DMatrix::zeros(graph.n(), m);
    for e in 0..m {
        averaging_a[(graph.directed_edge(e).target, e)] = 1.0 / d as f64;
    }
    let p_hat_star = cesaro_limit(&p_hat)?;
    Ok(EdgeProcess {
        degree: d,
        p_hat,
        p_hat_star,
        averaging_a,
    })
}

/// Strongly connected components of the support of `p`, tagged with
/// whether each one is closed (no probability leaves it).
fn communicating_classes(p: &DMatrix<f64>) -> Vec<(Vec<usize>, bool)> {
    let m = p.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(m, 0);
    let nodes: Vec<_> = (0..m).map(|_| g.add_node(())).collect();
    for a in 0..m {
        for b in 0..m {
            if p[(a, b)] > 0.0 {
                g.add_edge(nodes[a], nodes[b], ());
            }
        }
    }
    let mut comp = vec![0usize; m];
    let sccs = tarjan_scc(&g);
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    sccs.iter()
        .enumerate()
        .map(|(c, scc)| {
            let members: Vec<usize> = scc.iter().map(|v| v.index()).collect();
            let closed = members
                .iter()
                .all(|&a| (0..m).all(|b| p[(a, b)] <= 0.0 || comp[b] == c));
            let mut members = members;
            members.sort_unstable();
            (members, closed)
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the chain: the lcm of the periods of its closed classes.
pub fn chain_period(p: &DMatrix<f64>) -> usize {
    let mut period = 1;
    for (members, closed) in communicating_classes(p) {
        if !closed {
            continue;
        }
        let mut level = vec![usize::MAX; p.nrows()];
        let root = members[0];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut g = 0;
        while let Some(a) = queue.pop_front() {
            for &b in &members {
                if p[(a, b)] > 0.0 {
                    if level[b] == usize::MAX {
                        level[b] = level[a] + 1;
                        queue.push_back(b);
                    } else {
                        g = gcd(g, (level[a] + 1).abs_diff(level[b]));
                    }
                }
            }
        }
        let class_period = g.max(1);
        period = period / gcd(period, class_period) * class_period;
    }
    period
}

fn frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Maximum number of squarings when computing the Cesàro limit; covers
/// horizons up to `period · 2^64` steps.
const CESARO_MAX_SQUARINGS: usize = 64;

/// Cesàro limit `lim_T (1/T) Σ_{τ<T} P^τ` of a row-stochastic matrix.
///
/// With `p` the chain period, `P^p` restricted to each closed class is
/// aperiodic, so `L = lim_k P^{pk}` exists and is reached by repeated
/// squaring until the Frobenius increment drops below `1e-12`. The limit is
/// then `(1/p) Σ_{r<p} P^r L`. Permutation matrices are averaged exactly
/// over their orbits.
pub fn cesaro_limit(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_stochastic(p)?;
    if let Some(perm) = as_permutation(p) {
        return Ok(orbit_average(&perm));
    }
    let m = p.nrows();
    let period = chain_period(p);
    let mut q = DMatrix::identity(m, m);
    for _ in 0..period {
        q = &q * p;
    }
    let mut last_increment = f64::INFINITY;
    for _ in 0..CESARO_MAX_SQUARINGS {
        let next = &q * &q;
        last_increment = frobenius_diff(&next, &q);
        q = next;
        if last_increment < 1e-12 {
            let mut sum = DMatrix::zeros(m, m);
            let mut pr = DMatrix::identity(m, m);
            for _ in 0..period {
                sum += &pr * &q;
                pr = &pr * p;
            }
            return Ok(sum / period as f64);
        }
    }
    Err(Error::CesaroBudget {
        steps: CESARO_MAX_SQUARINGS,
        last_increment,
    })
}

/// Cesàro limit from the class structure of the chain: the stationary
/// distribution of every closed class, weighted by absorption
/// probabilities from transient states.
pub fn cesaro_limit_structural(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_stochastic(p)?;
    let m = p.nrows();
    let classes = communicating_classes(p);
    let mut star = DMatrix::zeros(m, m);
    let closed: Vec<&Vec<usize>> = classes.iter().filter(|(_, c)| *c).map(|(v, _)| v).collect();
    let transient: Vec<usize> = classes
        .iter()
        .filter(|(_, c)| !*c)
        .flat_map(|(v, _)| v.iter().copied())
        .collect();

    let mut stationary = Vec::with_capacity(closed.len());
    for members in &closed {
        let k = members.len();
        // Solve π (P_CC − I) = 0 with Σπ = 1, replacing one equation.
        let mut sys = DMatrix::zeros(k, k);
        for (r, &a) in members.iter().enumerate() {
            for (c, &b) in members.iter().enumerate() {
                sys[(c, r)] = p[(a, b)] - if a == b { 1.0 } else { 0.0 };
            }
        }
        let mut rhs = DVector::zeros(k);
        for c in 0..k {
            sys[(k - 1, c)] = 1.0;
        }
        rhs[k - 1] = 1.0;
        let pi = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("singular stationary system".into()))?;
        for &a in members.iter() {
            for (c, &b) in members.iter().enumerate() {
                star[(a, b)] = pi[c];
            }
        }
        stationary.push(pi);
    }

    if !transient.is_empty() {
        let t = transient.len();
        let mut sys = DMatrix::<f64>::identity(t, t);
        for (r, &a) in transient.iter().enumerate() {
            for (c, &b) in transient.iter().enumerate() {
                sys[(r, c)] -= p[(a, b)];
            }
        }
        let lu = sys.lu();
        for (members, pi) in closed.iter().zip(&stationary) {
            let rhs = DVector::from_iterator(
                t,
                transient
                    .iter()
                    .map(|&a| members.iter().map(|&b| p[(a, b)]).sum::<f64>()),
            );
            let h = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Solver("singular absorption system".into()))?;
            for (r, &a) in transient.iter().enumerate() {
                for (c, &b) in members.iter().enumerate() {
                    star[(a, b)] = h[r] * pi[c];
                }
            }
        }
    }
    Ok(star)
}

fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::Invalid("transition matrix must be square and non-empty".into()));
    }
    for (r, row) in p.row_iter().enumerate() {
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (row.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "row {r} of the transition matrix is not stochastic"
            )));
        }
    }
    Ok(())
}

/// Successor map if every row of `p` holds a single 1 and the map is a
/// bijection.
fn as_permutation(p: &DMatrix<f64>) -> Option<Vec<usize>> {
    let m = p.nrows();
    let mut succ = Vec::with_capacity(m);
    let mut hit = vec![false; m];
    for row in p.row_iter() {
        let mut target = None;
        for (c, &v) in row.iter().enumerate() {
            if v == 1.0 && target.is_none() {
                target = Some(c);
            } else if v != 0.0 {
                return None;
            }
        }
        let c = target?;
        if std::mem::replace(&mut hit[c], true) {
            return None;
        }
        succ.push(c);
    }
    Some(succ)
}

fn permutation_orbits(succ: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; succ.len()];
    let mut orbits = Vec::new();
    for start in 0..succ.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = Vec::new();
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            orbit.push(v);
            v = succ[v];
        }
        orbits.push(orbit);
    }
    orbits
}

fn orbit_average(succ: &[usize]) -> DMatrix<f64> {
    let m = succ.len();
    let mut star = DMatrix::zeros(m, m);
    for orbit in permutation_orbits(succ) {
        let w = 1.0 / orbit.len() as f64;
        for &a in &orbit {
            for &b in &orbit {
                star[(a, b)] = w;
            }
        }
    }
    star
}

/// The Cesàro mixing time `τ* = sup_t ‖Σ_{τ=0}^t (P̂^τ − P̂*)‖`.
///
/// The `‖·‖_{2,m}` scaling cancels in the induced matrix norm, so this is
/// the spectral norm of the partial sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CesaroMixing {
    pub tau_star: f64,
    /// First `t` at which the supremum is attained.
    pub attained_t: usize,
    /// Estimated bound on how much the unscanned tail could add.
    pub tail_bound: f64,
    /// Number of partial sums examined.
    pub steps: usize,
}

/// Step budget for the dense supremum search.
pub const MIXING_MAX_STEPS: usize = 100_000;

/// Threshold on `‖P̂^t − P̂*‖` (or on the period-to-period change of `P̂^t`
/// for periodic chains) beyond which the partial sums are settled.
const MIXING_SETTLE_TOL: f64 = 1e-10;

pub fn cesaro_mixing_time(p_hat: &DMatrix<f64>, p_hat_star: &DMatrix<f64>) -> Result<CesaroMixing> {
    check_stochastic(p_hat)?;
    match as_permutation(p_hat) {
        Some(succ) => Ok(permutation_mixing_time(&succ)),
        None => cesaro_mixing_time_dense(p_hat, p_hat_star, MIXING_MAX_STEPS),
    }
}

/// Exact `τ*` for a permutation chain. Its partial sums are polynomials in a
/// unitary matrix, so their spectral norm is the largest eigenvalue modulus:
/// `|Σ_{τ≤t} ω^τ| = |sin(πk(t+1)/L) / sin(πk/L)|` for `ω = e^{2πik/L}` on an
/// orbit of length `L`. Each orbit block is periodic in `t` with period `L`.
pub fn permutation_mixing_time(succ: &[usize]) -> CesaroMixing {
    let mut lengths: Vec<usize> = permutation_orbits(succ).iter().map(Vec::len).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let (mut best, mut attained) = (0.0f64, 0usize);
    let mut steps = 0;
    for &len in &lengths {
        let l = len as f64;
        for t in 0..len {
            for k in 1..len {
                let theta = std::f64::consts::PI * k as f64 / l;
                let v = ((theta * (t + 1) as f64).sin() / theta.sin()).abs();
                if v > best + 1e-12 {
                    best = v;
                    attained = t;
                } else if (v - best).abs() <= 1e-12 && t < attained {
                    attained = t;
                }
            }
        }
        steps = steps.max(len);
    }
    CesaroMixing {
        tau_star: best,
        attained_t: attained,
        tail_bound: 0.0,
        steps,
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Incremental search over partial sums `S_t = S_{t−1} + P̂^t − P̂*`.
///
/// Stops once both `t ≥ 10 · argmax` and a full period has passed after the
/// powers settled: `‖P̂^t − P̂*‖_F < 1e-10` for aperiodic chains, or
/// `‖P̂^t − P̂^{t−p}‖_F < 1e-10` for a chain of period `p`.
pub fn cesaro_mixing_time_dense(
    p_hat: &DMatrix<f64>,
    p_hat_star: &DMatrix<f64>,
    max_steps: usize,
) -> Result<CesaroMixing> {
    let m = p_hat.nrows();
    if p_hat_star.shape() != p_hat.shape() {
        return Err(Error::Invalid("P̂ and P̂* differ in shape".into()));
    }
    let period = chain_period(p_hat);
    let mut power = DMatrix::<f64>::identity(m, m);
    let mut partial = DMatrix::<f64>::zeros(m, m);
    let mut history: std::collections::VecDeque<DMatrix<f64>> = std::collections::VecDeque::new();
    let (mut best, mut attained) = (0.0f64, 0usize);
    let mut settled_at: Option<usize> = None;
    let mut resid = f64::INFINITY;

    for t in 0..max_steps {
        partial += &power - p_hat_star;
        let sigma = spectral_norm(&partial);
        if sigma > best * (1.0 + 1e-12) + 1e-15 {
            best = sigma;
            attained = t;
        }

        let r = if period == 1 {
            frobenius_diff(&power, p_hat_star)
        } else if history.len() == period {
            frobenius_diff(&power, &history[0])
        } else {
            f64::INFINITY
        };
        let prev_resid = resid;
        resid = r;
        if resid < MIXING_SETTLE_TOL && settled_at.is_none() {
            settled_at = Some(t);
        }
        if let Some(s) = settled_at {
            if t >= 10 * attained && t >= s + period {
                let tail_bound = if period == 1 && prev_resid.is_finite() && resid < prev_resid && prev_resid > 0.0 {
                    let rho = resid / prev_resid;
                    resid * rho / (1.0 - rho)
                } else {
                    resid
                };
                return Ok(CesaroMixing {
                    tau_star: best,
                    attained_t: attained,
                    tail_bound,
                    steps: t + 1,
                });
            }
        }

        if period > 1 {
            history.push_back(power.clone());
            if history.len() > period {
                history.pop_front();
            }
        }
        power = &power * p_hat;
    }
    Err(Error::MixingBudget {
        steps: max_steps,
        partial_max: best,
    })
}

/// Spectrum summary of a symmetric doubly stochastic averaging matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseMixing {
    /// `1 / log(1/λ)`, with `λ` the second-largest eigenvalue, or `|λ_min|`
    /// when that is larger.
    pub tau2: f64,
    pub lambda2: f64,
    pub lambda_min: f64,
    /// The smallest eigenvalue dominates `λ₂` in magnitude; a lazier matrix
    /// would mix faster.
    pub lazy_recommended: bool,
}

pub fn pairwise_mixing_time(p: &DMatrix<f64>) -> Result<PairwiseMixing> {
    let n = p.nrows();
    if n != p.ncols() || n == 0 {
        return Err(Error::Invalid("averaging matrix must be square and non-empty".into()));
    }
    if (p - p.transpose()).amax() > 1e-12 {
        return Err(Error::Invalid("averaging matrix is not symmetric".into()));
    }
    check_stochastic(p)?;
    if n == 1 {
        return Ok(PairwiseMixing {
            tau2: 0.0,
            lambda2: 0.0,
            lambda_min: 1.0,
            lazy_recommended: false,
        });
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(p.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let lambda2 = snap(eig[1]);
    let lambda_min = snap(eig[n - 1]);
    if lambda2 >= 1.0 - 1e-10 {
        return Err(Error::NotMixing(lambda2));
    }
    let lazy_recommended = lambda_min.abs() > lambda2;
    let governing = if lazy_recommended {
        log::warn!("smallest eigenvalue {lambda_min} dominates lambda2 = {lambda2}; consider a lazy averaging matrix");
        lambda_min.abs()
    } else {
        lambda2
    };
    if governing >= 1.0 - 1e-10 {
        return Err(Error::NotMixing(governing));
    }
    let tau2 = if governing <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 / governing).ln()
    };
    Ok(PairwiseMixing {
        tau2,
        lambda2,
        lambda_min,
        lazy_recommended,
    })
}

/// Mixing summary for a graph: `τ*` of its edge process (regular graphs
/// only) and `τ₂` of its lazy Metropolis averaging matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub tau_star: Option<f64>,
    pub attained_t: Option<usize>,
    pub tau2: Option<f64>,
    pub lambda2: Option<f64>,
    pub n: usize,
    pub d: Option<usize>,
}

pub fn mixing_report(graph: &Graph, laziness: f64) -> Result<MixingReport> {
    let d = graph.regular_degree();
    let cesaro = match d {
        Some(d) if d >= 2 => {
            let ep = edge_process(graph)?;
            Some(cesaro_mixing_time(&ep.p_hat, &ep.p_hat_star)?)
        }
        _ => None,
    };
    let averaging = metropolis_matrix(graph, laziness)?;
    let pairwise = pairwise_mixing_time(&averaging.p)?;
    Ok(MixingReport {
        tau_star: cesaro.map(|c| c.tau_star),
        attained_t: cesaro.map(|c| c.attained_t),
        tau2: Some(pairwise.tau2),
        lambda2: Some(pairwise.lambda2),
        n: graph.n(),
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, generate_cycle, generate_random_regular};

    #[test]
    fn single_edge_laplacian() {
        let g = build_graph(2, &[(0, 1)]).unwrap();
        let l = laplacian(&g, &EdgeWeights::uniform(&g));
        assert_eq!(l.gamma_matrix, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn triangle_spectrum() {
        let g = generate_cycle(3).unwrap();
        let l = laplacian(&g, &EdgeWeights::uniform(&g));
        let mut ev: Vec<f64> = SymmetricEigen::new(l.gamma_matrix)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_limits() {
        let g = generate_random_regular(10, 3, 2).unwrap();
        let w = EdgeWeights::uniform(&g);
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solve_mode(&g, &w, 1e-12, &y).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
        let c = vec![0.3; 10];
        for beta in [0.5, 10.0, 1e4] {
            let x = solve_mode(&g, &w, beta, &c).unwrap();
            assert!(x.iter().all(|v| (v - 0.3).abs() < 1e-12));
        }
        assert!(solve_mode(&g, &w, 0.0, &y).is_err());
    }

    #[test]
    fn cg_matches_direct() {
        let g = generate_random_regular(40, 4, 5).unwrap();
        let w = EdgeWeights::uniform(&g);
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        for beta in [0.1, 5.0, 300.0] {
            let a = solve_mode_direct(&g, &w, beta, &y).unwrap();
            let b = solve_mode_cg(&g, &w, beta, &y).unwrap();
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-9));
        }
    }

    #[test]
    fn edge_process_rejects_irregular() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        let err = edge_process(&g).unwrap_err().to_string();
        assert!(err.contains("requires regular graph"), "{err}");
    }

    #[test]
    fn cycle4_edge_process_is_two_orbits() {
        let g = generate_cycle(4).unwrap();
        let ep = edge_process(&g).unwrap();
        let succ = as_permutation(&ep.p_hat).expect("permutation");
        let mut lens: Vec<usize> = permutation_orbits(&succ).iter().map(Vec::len).collect();
        lens.sort_unstable();
        assert_eq!(lens, vec![4, 4]);
        for orbit in permutation_orbits(&succ) {
            for &a in &orbit {
                for &b in &orbit {
                    assert_eq!(ep.p_hat_star[(a, b)], 0.25);
                }
            }
        }
    }

    #[test]
    fn k4_rows_have_two_halves() {
        let g = generate_random_regular(4, 3, 1).unwrap();
        let ep = edge_process(&g).unwrap();
        for row in ep.p_hat.row_iter() {
            let halves = row.iter().filter(|&&v| v == 0.5).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            assert_eq!((halves, zeros), (2, row.len() - 2));
        }
    }

    #[test]
    fn cesaro_identity_and_uniform() {
        let id = DMatrix::<f64>::identity(5, 5);
        assert_eq!(cesaro_limit(&id).unwrap(), id);
        let g = generate_random_regular(8, 3, 3).unwrap();
        let ep = edge_process(&g).unwrap();
        let m = g.num_directed();
        if chain_period(&ep.p_hat) == 1 && communicating_classes(&ep.p_hat).len() == 1 {
            assert!((ep.p_hat_star.add_scalar(-1.0 / m as f64)).amax() < 1e-10);
        }
    }

    #[test]
    fn cesaro_routes_agree_with_transients() {
        // 0 → {1, 2} transient split, 1 and 2 absorbing, 3 ↔ 4 periodic.
        #[rustfmt::skip]
        let p = DMatrix::from_row_slice(5, 5, &[
            0.2, 0.5, 0.3, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 1.0, 0.0,
        ]);
        assert_eq!(chain_period(&p), 2);
        let a = cesaro_limit(&p).unwrap();
        let b = cesaro_limit_structural(&p).unwrap();
        assert!((&a - &b).amax() < 1e-10, "{a}\n{b}");
        assert!((a[(0, 1)] - 0.625).abs() < 1e-12);
        assert!((a[(3, 4)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cycle4_tau_star_is_sqrt2() {
        let g = generate_cycle(4).unwrap();
        let ep = edge_process(&g).unwrap();
        let c = cesaro_mixing_time(&ep.p_hat, &ep.p_hat_star).unwrap();
        assert!((c.tau_star - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.attained_t, 1);
    }

    #[test]
    fn one_state_chain_has_zero_mixing_time() {
        let p = DMatrix::<f64>::identity(1, 1);
        let star = cesaro_limit(&p).unwrap();
        let c = cesaro_mixing_time(&p, &star).unwrap();
        assert_eq!(c.tau_star, 0.0);
        let d = cesaro_mixing_time_dense(&p, &star, 10).unwrap();
        assert_eq!(d.tau_star, 0.0);
    }

    #[test]
    fn permutation_route_matches_dense_route() {
        for n in [3, 5, 8] {
            let g = generate_cycle(n).unwrap();
            let ep = edge_process(&g).unwrap();
            let exact = cesaro_mixing_time(&ep.p_hat, &ep.p_hat_star).unwrap();
            let dense = cesaro_mixing_time_dense(&ep.p_hat, &ep.p_hat_star, 10_000).unwrap();
            assert!((exact.tau_star - dense.tau_star).abs() < 1e-9, "n={n}");
            assert_eq!(exact.attained_t, dense.attained_t);
        }
    }

    #[test]
    fn pairwise_examples() {
        let g = generate_cycle(4).unwrap();
        let p = metropolis_matrix(&g, 0.5).unwrap().p;
        let pm = pairwise_mixing_time(&p).unwrap();
        assert!((pm.lambda2 - 0.5).abs() < 1e-12);
        assert!((pm.tau2 - 1.0 / 2f64.ln()).abs() < 1e-10);
        assert!(!pm.lazy_recommended);

        let n = 5;
        let j = DMatrix::from_element(n, n, 1.0 / n as f64);
        let pm = pairwise_mixing_time(&j).unwrap();
        assert_eq!((pm.lambda2, pm.tau2), (0.0, 0.0));

        // Two disjoint blocks never mix.
        #[rustfmt::skip]
        let split = DMatrix::from_row_slice(4, 4, &[
            0.5, 0.5, 0.0, 0.0,
            0.5, 0.5, 0.0, 0.0,
            0.0, 0.0, 0.5, 0.5,
            0.0, 0.0, 0.5, 0.5,
        ]);
        assert!(matches!(pairwise_mixing_time(&split), Err(Error::NotMixing(_))));
    }
}
