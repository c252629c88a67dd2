//! Writing experiment results to disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::Protocol;
use super::sweep::{ExperimentReport, RunMode, SummaryRow};
use crate::engine::fmt_opt;
use crate::Result;

pub const SUMMARY_HEADER: [&str; 12] = [
    "family", "n", "d", "seed", "protocol", "beta", "epsilon", "t_eps", "tau_star", "tau2", "wall_ms", "error",
];

pub const COMPARE_HEADER: [&str; 9] = [
    "family",
    "n",
    "d",
    "seed",
    "epsilon",
    "t_eps_cp",
    "t_eps_pairwise",
    "tau_star",
    "tau2",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_summary_csv<'a, W: Write>(rows: impl IntoIterator<Item = &'a SummaryRow>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.family.clone(),
            opt(r.n),
            opt(r.d),
            r.seed.to_string(),
            r.protocol.clone(),
            r.beta.clone(),
            fmt_opt(r.epsilon),
            opt(r.t_eps),
            fmt_opt(r.tau_star),
            fmt_opt(r.tau2),
            fmt_opt(r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub family: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub t_eps_cp: Option<usize>,
    pub t_eps_pairwise: Option<usize>,
    pub tau_star: Option<f64>,
    pub tau2: Option<f64>,
}

/// One row per cell pairing the consensus propagation and pairwise rows.
pub fn compare_rows(report: &ExperimentReport) -> Vec<CompareRow> {
    report
        .outcomes
        .iter()
        .filter_map(|o| {
            let first = o.rows.first()?;
            let find = |pairwise: bool| {
                o.rows
                    .iter()
                    .find(|r| (r.protocol == Protocol::Pairwise.as_str()) == pairwise)
                    .and_then(|r| r.t_eps)
            };
            Some(CompareRow {
                family: first.family.clone(),
                n: first.n,
                d: first.d,
                seed: first.seed,
                epsilon: first.epsilon,
                t_eps_cp: find(false),
                t_eps_pairwise: find(true),
                tau_star: first.tau_star,
                tau2: first.tau2,
            })
        })
        .collect()
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COMPARE_HEADER)?;
    for r in rows {
        out.write_record([
            r.family.clone(),
            opt(r.n),
            opt(r.d),
            r.seed.to_string(),
            fmt_opt(r.epsilon),
            opt(r.t_eps_cp),
            opt(r.t_eps_pairwise),
            fmt_opt(r.tau_star),
            fmt_opt(r.tau2),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Write `summary.csv`, `summary.json`, `compare.csv` (compare mode) and,
/// when `traces` is set, `cells/cell_<k>_<protocol>.{csv,json}`.
pub fn write_report(report: &ExperimentReport, dir: &Path, traces: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_summary_csv(report.rows(), BufWriter::new(File::create(dir.join("summary.csv"))?))?;

    let rows: Vec<&SummaryRow> = report.rows().collect();
    let json = serde_json::json!({
        "cells": report.outcomes.len(),
        "failures": report.failures(),
        "rows": rows,
    });
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, &json)?;
    writeln!(f)?;
    f.flush()?;

    if report.mode == RunMode::Compare {
        let rows = compare_rows(report);
        write_compare_csv(&rows, BufWriter::new(File::create(dir.join("compare.csv"))?))?;
    }

    if traces {
        let cells = dir.join("cells");
        fs::create_dir_all(&cells)?;
        for o in &report.outcomes {
            for a in &o.artifacts {
                let stem = format!("cell_{:04}_{}", o.cell.index, a.protocol.as_str());
                a.trace
                    .write_csv(BufWriter::new(File::create(cells.join(format!("{stem}.csv")))?))?;
                let mut state = a.trace.terminal_json();
                if let (Some(obj), Some(serde_json::Value::Object(extra))) = (state.as_object_mut(), &a.extra) {
                    obj.extend(extra.clone());
                }
                let mut f = BufWriter::new(File::create(cells.join(format!("{stem}.json")))?);
                serde_json::to_writer(&mut f, &state)?;
                writeln!(f)?;
                f.flush()?;
            }
        }
    }
    Ok(())
}
