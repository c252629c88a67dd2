//! Expanding a configuration into cells and running them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BetaSpec, Cell, ExperimentConfig, Family, K0Spec, Protocol, ScheduleSpec, YSource};
use crate::adaptive::{beta_for, run_adaptive, AdaptiveOptions, AdaptiveRun};
use crate::analysis::{cesaro_mixing_time, edge_process, pairwise_mixing_time};
use crate::baseline::{metropolis_matrix, run_pairwise};
use crate::engine::{k_beta, Beta, ConsensusPropagation, ProtocolConfig, RunTrace, Schedule, StopRule};
use crate::graph::{generate_cycle, generate_random_regular, generate_torus, generate_tree, Graph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Run the configured protocol.
    Single,
    /// Run consensus propagation and pairwise averaging on every cell.
    Compare,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub family: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: u64,
    pub protocol: String,
    pub beta: String,
    pub epsilon: Option<f64>,
    pub t_eps: Option<usize>,
    pub tau_star: Option<f64>,
    pub tau2: Option<f64>,
    pub wall_ms: Option<f64>,
    pub reason: Option<String>,
    pub error: Option<String>,
}

/// A finished protocol run kept for the per-cell output files.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub protocol: Protocol,
    pub trace: RunTrace,
    /// Extra JSON merged into the terminal-state file (adaptive phases).
    pub extra: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub rows: Vec<SummaryRow>,
    pub artifacts: Vec<RunArtifact>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub mode: RunMode,
    pub outcomes: Vec<CellOutcome>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.outcomes.iter().flat_map(|o| o.rows.iter())
    }

    pub fn failures(&self) -> usize {
        self.rows().filter(|r| r.error.is_some()).count()
    }
}

/// Run every cell of the sweep on the current rayon pool. Results are in
/// cell order regardless of scheduling; a failing cell is recorded in its
/// rows and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig, mode: RunMode) -> Result<ExperimentReport> {
    if mode == RunMode::Compare && !matches!(cfg.protocol, Protocol::Cp | Protocol::CpAdaptive) {
        return Err(Error::Config("compare needs protocol = cp or cp-adaptive".into()));
    }
    let cells = cfg.cells();
    let outcomes = cells.par_iter().map(|cell| run_cell(cfg, cell, mode)).collect();
    Ok(ExperimentReport { mode, outcomes })
}

pub fn build_cell_graph(cfg: &ExperimentConfig, cell: &Cell) -> Result<Graph> {
    let g = &cfg.graph;
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| Error::Config(format!("missing {key}")));
    match g.family {
        Family::Cycle => generate_cycle(need(cell.n, "graph.n")?),
        Family::Torus => generate_torus(need(g.m, "graph.m")?, need(cell.side, "graph.side")?),
        Family::Regular => generate_random_regular(need(cell.n, "graph.n")?, need(g.d, "graph.d")?, cell.graph_seed),
        Family::Tree => generate_tree(need(cell.n, "graph.n")?, g.shape, cell.graph_seed),
        Family::File => {
            let path = g
                .file
                .as_ref()
                .ok_or_else(|| Error::Config("missing graph.file".into()))?;
            Graph::load(path)
        }
    }
}

pub fn build_observations(source: &YSource, n: usize, seed: u64) -> Result<Vec<f64>> {
    match source {
        YSource::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n).map(|_| rng.random::<f64>()).collect())
        }
        YSource::Constant(c) => Ok(vec![*c; n]),
        YSource::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut y = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let content = line.split('#').next().unwrap_or("");
                for tok in content
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                {
                    let v: f64 = tok.parse().map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("invalid observation {tok:?} in {}", path.display()),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: "observations must be finite".into(),
                        });
                    }
                    y.push(v);
                }
            }
            if y.len() != n {
                return Err(Error::Config(format!(
                    "{} has {} observations, graph has {n} nodes",
                    path.display(),
                    y.len()
                )));
            }
            Ok(y)
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, mode: RunMode) -> CellOutcome {
    let protocols: Vec<Protocol> = match mode {
        RunMode::Single => vec![cfg.protocol],
        RunMode::Compare => vec![cfg.protocol, Protocol::Pairwise],
    };
    let mut base = SummaryRow {
        cell: cell.index,
        family: cfg.graph.family.as_str().into(),
        n: cell.n,
        d: cfg.graph.d,
        seed: cell.seed_label,
        protocol: String::new(),
        beta: String::new(),
        epsilon: cell.epsilon,
        t_eps: None,
        tau_star: None,
        tau2: None,
        wall_ms: None,
        reason: None,
        error: None,
    };
    let fail = |base: &SummaryRow, err: &Error| -> CellOutcome {
        log::warn!("cell {} failed: {err}", cell.index);
        let rows = protocols
            .iter()
            .map(|p| SummaryRow {
                protocol: p.as_str().into(),
                error: Some(err.to_string()),
                ..base.clone()
            })
            .collect();
        CellOutcome {
            cell: *cell,
            rows,
            artifacts: Vec::new(),
        }
    };

    let graph = match build_cell_graph(cfg, cell) {
        Ok(g) => g,
        Err(e) => return fail(&base, &e),
    };
    base.n = Some(graph.n());
    base.d = graph.regular_degree();
    let y = match build_observations(&cfg.y, graph.n(), cell.y_seed) {
        Ok(y) => y,
        Err(e) => return fail(&base, &e),
    };

    let wants_auto = matches!(cell.beta, Some(BetaSpec::Auto));
    let compare = mode == RunMode::Compare;
    if cfg.tau_star || compare || wants_auto {
        match exact_tau_star(&graph) {
            Ok(t) => base.tau_star = t,
            Err(e) if wants_auto => return fail(&base, &e),
            Err(e) => log::warn!("cell {}: tau* unavailable: {e}", cell.index),
        }
    }
    if cfg.tau2 || compare {
        match metropolis_matrix(&graph, cfg.laziness).and_then(|m| pairwise_mixing_time(&m.p)) {
            Ok(pm) => base.tau2 = Some(pm.tau2),
            Err(e) => log::warn!("cell {}: tau2 unavailable: {e}", cell.index),
        }
    }

    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for &protocol in &protocols {
        let mut row = SummaryRow {
            protocol: protocol.as_str().into(),
            ..base.clone()
        };
        let start = Instant::now();
        let result = match protocol {
            Protocol::Cp => run_cp(cfg, cell, &graph, &y, base.tau_star, &mut row),
            Protocol::CpAdaptive => run_cp_adaptive(cfg, cell, &graph, &y, &mut row),
            Protocol::Pairwise => run_baseline(cfg, &graph, &y).map(|t| (t, None)),
            Protocol::Analysis => {
                rows.push(row);
                continue;
            }
        };
        if cfg.output.timing {
            row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        match result {
            Ok((trace, extra)) => {
                row.t_eps = cell.epsilon.and_then(|eps| trace.epsilon_convergence_time(eps));
                row.reason = Some(trace.reason.as_str().into());
                artifacts.push(RunArtifact { protocol, trace, extra });
            }
            Err(e) => {
                log::warn!("cell {} ({}): {e}", cell.index, protocol.as_str());
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    CellOutcome {
        cell: *cell,
        rows,
        artifacts,
    }
}

/// `τ*` of the edge process; `None` for graphs it is not defined on.
fn exact_tau_star(graph: &Graph) -> Result<Option<f64>> {
    match graph.regular_degree() {
        Some(d) if d >= 2 => {
            let ep = edge_process(graph)?;
            Ok(Some(cesaro_mixing_time(&ep.p_hat, &ep.p_hat_star)?.tau_star))
        }
        _ => Ok(None),
    }
}

fn stop_rule(cfg: &ExperimentConfig, n: usize) -> StopRule {
    let mut stop = StopRule::max_steps(cfg.stop.max_t.unwrap_or(50 * n));
    stop.eps_mu = cfg.stop.eps_mu;
    stop.eps_target = cfg.stop.eps_target;
    stop.stride = cfg.stop.stride.map(|s| s.max(1));
    stop.record_x = cfg.output.record_x;
    stop
}

fn run_cp(
    cfg: &ExperimentConfig,
    cell: &Cell,
    graph: &Graph,
    y: &[f64],
    tau_star: Option<f64>,
    row: &mut SummaryRow,
) -> Result<(RunTrace, Option<serde_json::Value>)> {
    let beta = match cell
        .beta
        .ok_or_else(|| Error::Config("protocol cp needs cp.beta".into()))?
    {
        BetaSpec::Value(b) => Beta::finite(b)?,
        BetaSpec::Infinite => Beta::INFINITE,
        BetaSpec::Auto => {
            let d = graph
                .regular_degree()
                .ok_or_else(|| Error::NotRegular("cp.beta = auto".into()))?;
            let tau = tau_star.ok_or_else(|| Error::Config("cp.beta = auto needs tau*".into()))?;
            let eps = cell
                .epsilon
                .ok_or_else(|| Error::Config("cp.beta = auto needs epsilon".into()))?;
            Beta::finite(beta_for(tau, eps, d)?)?
        }
    };
    row.beta = if beta.is_infinite() {
        "inf".into()
    } else {
        format!("{}", beta.value())
    };
    let k0 = match cfg.k0 {
        K0Spec::Value(k) => k,
        K0Spec::KBeta => {
            let d = graph
                .regular_degree()
                .filter(|&d| d >= 2)
                .ok_or_else(|| Error::NotRegular("cp.k0 = kbeta".into()))?;
            if beta.is_infinite() {
                return Err(Error::Config("cp.k0 = kbeta needs a finite beta".into()));
            }
            k_beta(d, beta.value())
        }
    };
    let schedule = match &cfg.schedule {
        ScheduleSpec::Synchronous => Schedule::Synchronous,
        ScheduleSpec::RoundRobin => Schedule::RoundRobin,
        ScheduleSpec::RandomSubset { p } => Schedule::RandomSubset {
            p: *p,
            seed: cell.schedule_seed,
        },
        ScheduleSpec::Explicit(path) => Schedule::load_explicit(graph, path)?,
    };
    let config = ProtocolConfig::new(graph, beta, y.to_vec()).with_uniform_k0(k0);
    let cp = ConsensusPropagation::new(graph, config)?;
    Ok((cp.run(&schedule, &stop_rule(cfg, graph.n()))?, None))
}

fn run_cp_adaptive(
    cfg: &ExperimentConfig,
    cell: &Cell,
    graph: &Graph,
    y: &[f64],
    row: &mut SummaryRow,
) -> Result<(RunTrace, Option<serde_json::Value>)> {
    let eps = cell
        .epsilon
        .ok_or_else(|| Error::Config("protocol cp-adaptive needs epsilon".into()))?;
    let mut opts = AdaptiveOptions {
        max_phases: cfg.adaptive_max_phases,
        tau_cap: cfg.adaptive_tau_cap,
        record_x: cfg.output.record_x,
        ..AdaptiveOptions::default()
    };
    if let Some(max_t) = cfg.stop.max_t {
        opts.max_total_steps = max_t;
    }
    if let Some(s) = cfg.stop.stride {
        opts.stride = s.max(1);
    }
    let AdaptiveRun { trace, phases, stop } = run_adaptive(graph, y, eps, &opts)?;
    if let Some(last) = phases.last() {
        row.beta = format!("{}", last.beta);
    }
    let extra = serde_json::json!({ "phases": phases, "adaptive_stop": stop });
    Ok((trace, Some(extra)))
}

fn run_baseline(cfg: &ExperimentConfig, graph: &Graph, y: &[f64]) -> Result<RunTrace> {
    let m = metropolis_matrix(graph, cfg.laziness)?;
    run_pairwise(&m, y, &stop_rule(cfg, graph.n()))
}
