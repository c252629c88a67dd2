use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MessageState;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Message changes over a full schedule cycle fell below tolerance.
    Converged,
    /// The estimate error reached the requested target.
    TargetReached,
    /// The step budget ran out first.
    BudgetExhausted,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::TargetReached => "target_reached",
            Termination::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// `‖x − ȳ1‖_{2,n}`.
    pub err: f64,
    pub dmu_max: Option<f64>,
    pub dk_max: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub phase: Option<usize>,
}

impl TraceRecord {
    pub fn new(t: usize, err: f64, dmu_max: Option<f64>, dk_max: Option<f64>, x: Option<Vec<f64>>) -> Self {
        Self {
            t,
            err,
            dmu_max,
            dk_max,
            x,
            phase: None,
        }
    }
}

/// The recorded history of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Records at the configured stride; the first and last steps are
    /// always present.
    pub records: Vec<TraceRecord>,
    /// Error at every step, indexed by offset from the first step.
    pub errors: Vec<f64>,
    /// The true average `ȳ`.
    pub target: f64,
    pub terminal: MessageState,
    pub reason: Termination,
}

impl RunTrace {
    pub(crate) fn new(target: f64) -> Self {
        Self {
            records: Vec::new(),
            errors: Vec::new(),
            target,
            terminal: MessageState {
                t: 0,
                mu: Vec::new(),
                k: Vec::new(),
                x: Vec::new(),
            },
            reason: Termination::BudgetExhausted,
        }
    }

    pub(crate) fn push_error(&mut self, err: f64) {
        self.errors.push(err);
    }

    pub(crate) fn push_record(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.t < record.t));
        self.records.push(record);
    }

    pub(crate) fn finish(&mut self, terminal: MessageState, reason: Termination) {
        self.terminal = terminal;
        self.reason = reason;
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(0.0)
    }

    /// First step offset after which the error never exceeds `eps` again
    /// within the recorded horizon; `None` if the final error exceeds `eps`.
    pub fn epsilon_convergence_time(&self, eps: f64) -> Option<usize> {
        epsilon_convergence_time(&self.errors, eps)
    }

    /// Write the trace as CSV: `t,err,dmu_max,dK_max`, then `phase` when any
    /// record carries one, then `x_<i>` columns when estimates were recorded.
    /// Missing values are written as empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let with_phase = self.records.iter().any(|r| r.phase.is_some());
        let nx = self
            .records
            .iter()
            .find_map(|r| r.x.as_ref().map(Vec::len))
            .unwrap_or(0);
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["t", "err", "dmu_max", "dK_max"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if with_phase {
            header.push("phase".into());
        }
        header.extend((0..nx).map(|i| format!("x_{i}")));
        out.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.t.to_string(), fmt_f64(r.err), fmt_opt(r.dmu_max), fmt_opt(r.dk_max)];
            if with_phase {
                row.push(r.phase.map(|p| p.to_string()).unwrap_or_default());
            }
            match &r.x {
                Some(x) => row.extend(x.iter().map(|&v| fmt_f64(v))),
                None => row.extend(std::iter::repeat_n(String::new(), nx)),
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Terminal state as JSON `{t, mu, K, x, reason}`.
    pub fn terminal_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.terminal.t,
            "mu": self.terminal.mu,
            "K": self.terminal.k,
            "x": self.terminal.x,
            "reason": self.reason.as_str(),
        })
    }
}

pub fn epsilon_convergence_time(errors: &[f64], eps: f64) -> Option<usize> {
    match errors.iter().rposition(|&e| e > eps || e.is_nan()) {
        None => Some(0),
        Some(last_bad) if last_bad + 1 < errors.len() => Some(last_bad + 1),
        Some(_) => None,
    }
}

/// Shortest round-trip decimal; non-finite values become empty fields.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
