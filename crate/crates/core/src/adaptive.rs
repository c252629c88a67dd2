//! Synchronous consensus propagation with a doubling search over the
//! unknown Cesàro mixing time.
//!
//! Phase `ℓ` guesses `τ̃ = 2^ℓ`, picks `β` and an iteration count `t*` from
//! the guess, and runs `t*` synchronous steps. Messages carry over between
//! phases; since `β` never decreases, precisions entering a phase stay
//! below the new fixed point.

use serde::Serialize;

use crate::engine::{
    k_beta, Beta, ConsensusPropagation, MessageState, ProtocolConfig, RunTrace, Termination, TraceRecord,
};
use crate::graph::Graph;
use crate::norms::{consensus_error, mean, norm_2m};
use crate::{Error, Result};

fn check_inputs(tau_guess: f64, epsilon: f64, d: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    if !(tau_guess >= 0.0 && tau_guess.is_finite()) {
        return Err(Error::Config(format!(
            "mixing time guess must be finite and >= 0, got {tau_guess}"
        )));
    }
    if d < 2 {
        return Err(Error::Config(format!("degree must be >= 2, got {d}")));
    }
    Ok(())
}

/// Safety factor on the `d = 2` choice of `β`.
const D2_SAFETY: f64 = 2.0;

/// `β` for an accuracy target `ε` when the mixing time is `τ̃`, valid for any
/// initial precision `k₀ ≤ k^β`:
///
/// - `d > 2`: `max{2(1+τ̃)/(ε(d−2)), 3/(d−2)}`
/// - `d = 2`: `2 · max{(2(1+τ̃)/ε − 1/2)²/4, 9/16}`
pub fn beta_for(tau_guess: f64, epsilon: f64, d: usize) -> Result<f64> {
    check_inputs(tau_guess, epsilon, d)?;
    let base = 2.0 * (1.0 + tau_guess) / epsilon;
    Ok(if d > 2 {
        let dm2 = d as f64 - 2.0;
        (base / dm2).max(3.0 / dm2)
    } else {
        D2_SAFETY * ((base - 0.5).powi(2) / 4.0).max(9.0 / 16.0)
    })
}

/// Iterations after which estimates stay `ε`-accurate when `β` comes from
/// [`beta_for`] and `k₀ ≤ k^β`:
///
/// - `d > 2`: `⌈(1+(d−1)β) · log((2 + 4τ̃(5+4(d−1)β)) / (ε/2))⌉`
/// - `d = 2`: `⌈(1+2√β) · log((2 + 9τ̃(5+8√β)(1/2+√β)) / (ε/2))⌉`
pub fn t_star_for(beta: f64, tau_guess: f64, epsilon: f64, d: usize) -> Result<usize> {
    check_inputs(tau_guess, epsilon, d)?;
    let t = if d > 2 {
        let a = (d as f64 - 1.0) * beta;
        (1.0 + a) * ((2.0 + 4.0 * tau_guess * (5.0 + 4.0 * a)) / (epsilon / 2.0)).ln()
    } else {
        let r = beta.sqrt();
        (1.0 + 2.0 * r) * ((2.0 + 9.0 * tau_guess * (5.0 + 8.0 * r) * (0.5 + r)) / (epsilon / 2.0)).ln()
    };
    Ok(t.ceil() as usize)
}

/// `β` for the warm start `k₀ = k^β`:
///
/// - `d > 2`: `2(1+τ̃)/(ε(d−2))`
/// - `d = 2`: `2 · (2(1+τ̃)/ε − 1/2)²/4`
pub fn beta_for_warm_start(tau_guess: f64, epsilon: f64, d: usize) -> Result<f64> {
    check_inputs(tau_guess, epsilon, d)?;
    let base = 2.0 * (1.0 + tau_guess) / epsilon;
    Ok(if d > 2 {
        base / (d as f64 - 2.0)
    } else {
        D2_SAFETY * (base - 0.5).powi(2) / 4.0
    })
}

/// `t*` for the warm start: `⌈(1+(d−1)β) log(2/ε)⌉`, or
/// `⌈(1+2√β) log(2/ε)⌉` when `d = 2`.
pub fn t_star_warm_start(beta: f64, epsilon: f64, d: usize) -> Result<usize> {
    check_inputs(0.0, epsilon, d)?;
    let rate = if d > 2 {
        1.0 + (d as f64 - 1.0) * beta
    } else {
        1.0 + 2.0 * beta.sqrt()
    };
    Ok((rate * (2.0 / epsilon).ln()).ceil() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub max_phases: usize,
    /// Stop after the first phase whose guess reaches this value.
    pub tau_cap: Option<f64>,
    pub max_total_steps: usize,
    pub stride: usize,
    pub record_x: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            max_phases: 30,
            tau_cap: None,
            max_total_steps: 50_000_000,
            stride: 1,
            record_x: false,
        }
    }
}

/// Parameters and outcome of one phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: usize,
    pub tau_guess: f64,
    pub beta: f64,
    pub k_beta: f64,
    pub t_star: usize,
    pub start_t: usize,
    pub end_t: usize,
    pub endpoint_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveStop {
    /// Two consecutive phase endpoints agreed to within `ε/10`.
    Stable,
    TauCap,
    PhaseBudget,
    StepBudget,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub trace: RunTrace,
    pub phases: Vec<PhaseSummary>,
    pub stop: AdaptiveStop,
}

pub fn run_adaptive(graph: &Graph, y: &[f64], epsilon: f64, opts: &AdaptiveOptions) -> Result<AdaptiveRun> {
    let d = graph
        .regular_degree()
        .filter(|&d| d >= 2)
        .ok_or_else(|| Error::NotRegular("adaptive search requires a regular graph".into()))?;
    check_inputs(1.0, epsilon, d)?;

    let beta0 = beta_for(1.0, epsilon, d)?;
    let base = ConsensusPropagation::new(graph, ProtocolConfig::new(graph, Beta::finite(beta0)?, y.to_vec()))?;
    let target = mean(y);
    let stride = opts.stride.max(1);

    let mut state = base.initial_state();
    let mut trace = RunTrace::new(target);
    let err0 = consensus_error(&state.x, target);
    trace.push_error(err0);
    let mut first = TraceRecord::new(0, err0, None, None, opts.record_x.then(|| state.x.clone()));
    first.phase = Some(0);
    trace.push_record(first);

    let mut phases: Vec<PhaseSummary> = Vec::new();
    let mut last_endpoint: Option<Vec<f64>> = None;
    let mut stop = AdaptiveStop::PhaseBudget;

    'phases: for phase in 0..opts.max_phases {
        let tau_guess = 2f64.powi(phase as i32);
        let beta = beta_for(tau_guess, epsilon, d)?;
        let t_star = t_star_for(beta, tau_guess, epsilon, d)?;
        let cp = base.with_beta(Beta::finite(beta)?)?;
        let start_t = state.t;

        for s in 1..=t_star {
            if state.t >= opts.max_total_steps {
                stop = AdaptiveStop::StepBudget;
                break 'phases;
            }
            let next = cp.step_sync(&state);
            let dmu = crate::norms::max_abs_diff(&next.mu, &state.mu);
            let dk = crate::norms::max_abs_diff(&next.k, &state.k);
            state = next;
            let err = consensus_error(&state.x, target);
            trace.push_error(err);
            if state.t % stride == 0 || s == t_star {
                let mut r = TraceRecord::new(
                    state.t,
                    err,
                    Some(dmu),
                    Some(dk),
                    opts.record_x.then(|| state.x.clone()),
                );
                r.phase = Some(phase);
                trace.push_record(r);
            }
        }

        phases.push(PhaseSummary {
            phase,
            tau_guess,
            beta,
            k_beta: k_beta(d, beta),
            t_star,
            start_t,
            end_t: state.t,
            endpoint_error: consensus_error(&state.x, target),
        });
        log::debug!("adaptive phase {phase}: tau~={tau_guess} beta={beta} t*={t_star}");

        if let Some(prev) = &last_endpoint {
            let diff: Vec<f64> = prev.iter().zip(&state.x).map(|(a, b)| a - b).collect();
            if norm_2m(&diff) < epsilon / 10.0 {
                stop = AdaptiveStop::Stable;
                break;
            }
        }
        if opts.tau_cap.is_some_and(|cap| tau_guess >= cap) {
            stop = AdaptiveStop::TauCap;
            break;
        }
        last_endpoint = Some(state.x.clone());
    }

    let reason = if stop == AdaptiveStop::Stable {
        Termination::Converged
    } else {
        Termination::BudgetExhausted
    };
    trace.finish(state, reason);
    Ok(AdaptiveRun { trace, phases, stop })
}

/// Continue a state under a new `β` for exactly `steps` synchronous steps.
pub fn run_fixed_steps(cp: &ConsensusPropagation<'_>, state: MessageState, steps: usize) -> MessageState {
    (0..steps).fold(state, |s, _| cp.step_sync(&s))
}
