//! Experiment configuration: a flat `key = value` text format with dotted
//! section keys.
//!
//! ```text
//! # comments start with '#'
//! graph.family = cycle
//! graph.n = 16
//! protocol = cp
//! cp.beta = 10
//! sweep.seed = [1, 2, 3]
//! ```
//!
//! Parsing is strict: unknown keys, repeated keys, malformed values and
//! contradictory combinations are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::graph::TreeShape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Cycle,
    Torus,
    Regular,
    Tree,
    File,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cycle => "cycle",
            Family::Torus => "torus",
            Family::Regular => "regular",
            Family::Tree => "tree",
            Family::File => "file",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cycle" => Family::Cycle,
            "torus" => Family::Torus,
            "regular" | "random-regular" => Family::Regular,
            "tree" => Family::Tree,
            "file" => Family::File,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Protocol {
    Cp,
    CpAdaptive,
    Pairwise,
    /// Mixing-time analysis only; no protocol run.
    Analysis,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Cp => "cp",
            Protocol::CpAdaptive => "cp-adaptive",
            Protocol::Pairwise => "pairwise",
            Protocol::Analysis => "analysis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cp" => Protocol::Cp,
            "cp-adaptive" | "adaptive" => Protocol::CpAdaptive,
            "pairwise" => Protocol::Pairwise,
            "analysis" | "none" => Protocol::Analysis,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    Value(f64),
    Infinite,
    /// Chosen from the exact mixing time and `epsilon`.
    Auto,
}

impl BetaSpec {
    pub fn label(self) -> String {
        match self {
            BetaSpec::Value(b) => format!("{b}"),
            BetaSpec::Infinite => "inf".into(),
            BetaSpec::Auto => "auto".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum YSource {
    Uniform,
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Synchronous,
    RoundRobin,
    RandomSubset { p: f64 },
    Explicit(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum K0Spec {
    Value(f64),
    /// `k^β` of the regular graph (uniform warm start).
    KBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub family: Family,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub side: Option<usize>,
    pub shape: TreeShape,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopSpec {
    /// Horizon; defaults to `50·n`.
    pub max_t: Option<usize>,
    pub eps_mu: Option<f64>,
    pub eps_target: Option<f64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepAxes {
    pub n: Vec<usize>,
    pub side: Vec<usize>,
    pub beta: Vec<BetaSpec>,
    pub epsilon: Vec<f64>,
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub traces: bool,
    pub record_x: bool,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub y: YSource,
    pub y_seed: u64,
    pub protocol: Protocol,
    pub beta: Option<BetaSpec>,
    pub epsilon: Option<f64>,
    pub schedule: ScheduleSpec,
    pub schedule_seed: u64,
    pub k0: K0Spec,
    pub laziness: f64,
    pub adaptive_max_phases: usize,
    pub adaptive_tau_cap: Option<f64>,
    pub tau_star: bool,
    pub tau2: bool,
    pub stop: StopSpec,
    pub output: OutputSpec,
    pub sweep: SweepAxes,
}

const KNOWN_KEYS: &[&str] = &[
    "graph.family",
    "graph.n",
    "graph.d",
    "graph.m",
    "graph.side",
    "graph.shape",
    "graph.seed",
    "graph.file",
    "y.source",
    "y.seed",
    "y.value",
    "y.file",
    "protocol",
    "epsilon",
    "cp.beta",
    "cp.schedule",
    "cp.p",
    "cp.schedule_seed",
    "cp.schedule_file",
    "cp.k0",
    "pairwise.laziness",
    "adaptive.max_phases",
    "adaptive.tau_cap",
    "analysis.tau_star",
    "analysis.tau2",
    "stop.max_t",
    "stop.eps_mu",
    "stop.eps_target",
    "stop.stride",
    "output.dir",
    "output.traces",
    "output.record_x",
    "output.timing",
    "sweep.n",
    "sweep.side",
    "sweep.beta",
    "sweep.epsilon",
    "sweep.seed",
];

/// Raw `key = value` pairs with their line numbers.
struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    base_dir: PathBuf,
}

impl RawConfig {
    fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found {content:?}"),
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key {key:?}"),
                });
            }
            if entries.insert(key.clone(), (line, value.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("key {key:?} given twice"),
                });
            }
        }
        Ok(Self { entries, base_dir })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get<T>(&self, key: &str, what: &str, conv: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => conv(v).map(Some).ok_or_else(|| Error::Parse {
                line: *line,
                message: format!("{key}: expected {what}, found {v:?}"),
            }),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key, "a non-negative integer", |v| v.parse().ok())
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key, "a non-negative integer", |v| v.parse().ok())
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key, "a number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key, "true or false", |v| v.parse().ok())
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                self.base_dir.join(p)
            } else {
                p
            }
        })
    }

    fn list<T>(&self, key: &str, what: &str, conv: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
        self.get(key, &format!("a list [..] of {what}"), |v| {
            let inner = v.strip_prefix('[')?.strip_suffix(']')?.trim();
            if inner.is_empty() {
                return Some(Vec::new());
            }
            inner.split(',').map(|s| conv(s.trim())).collect()
        })
        .map(Option::unwrap_or_default)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_of(key),
            message: message.into(),
        }
    }
}

fn parse_beta(v: &str) -> Option<BetaSpec> {
    match v {
        "inf" | "infinity" => Some(BetaSpec::Infinite),
        "auto" => Some(BetaSpec::Auto),
        _ => v
            .parse::<f64>()
            .ok()
            .filter(|b| *b > 0.0 && b.is_finite())
            .map(BetaSpec::Value),
    }
}

fn parse_shape(v: &str) -> Option<TreeShape> {
    match v {
        "path" => Some(TreeShape::Path),
        "binary" => Some(TreeShape::Balanced { arity: 2 }),
        "random" => Some(TreeShape::Random),
        _ => {
            let k = v.strip_prefix("kary:")?.parse().ok().filter(|&k: &usize| k >= 1)?;
            Some(TreeShape::Balanced { arity: k })
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with_base(&text, base)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, PathBuf::new())
    }

    fn parse_with_base(text: &str, base_dir: PathBuf) -> Result<Self> {
        let raw = RawConfig::parse(text, base_dir)?;

        let family = raw
            .get("graph.family", "cycle|torus|regular|tree|file", Family::parse)?
            .ok_or_else(|| raw.error("graph.family", "missing required key graph.family"))?;
        let protocol = raw
            .get("protocol", "cp|cp-adaptive|pairwise|analysis", Protocol::parse)?
            .ok_or_else(|| raw.error("protocol", "missing required key protocol"))?;

        let graph = GraphSpec {
            family,
            n: raw.usize("graph.n")?,
            d: raw.usize("graph.d")?,
            m: raw.usize("graph.m")?,
            side: raw.usize("graph.side")?,
            shape: raw
                .get("graph.shape", "path|binary|kary:<k>|random", parse_shape)?
                .unwrap_or(TreeShape::Path),
            seed: raw.u64("graph.seed")?.unwrap_or(0),
            file: raw.path("graph.file"),
        };

        let sweep = SweepAxes {
            n: raw.list("sweep.n", "integers", |v| v.parse().ok())?,
            side: raw.list("sweep.side", "integers", |v| v.parse().ok())?,
            beta: raw.list("sweep.beta", "positive numbers or inf", parse_beta)?,
            epsilon: raw.list("sweep.epsilon", "numbers", |v| v.parse().ok())?,
            seed: raw.list("sweep.seed", "integers", |v| v.parse().ok())?,
        };

        let y = match raw.str("y.source").unwrap_or("uniform") {
            "uniform" => YSource::Uniform,
            "constant" => YSource::Constant(
                raw.f64("y.value")?
                    .ok_or_else(|| raw.error("y.source", "y.source = constant needs y.value"))?,
            ),
            "file" => YSource::File(
                raw.path("y.file")
                    .ok_or_else(|| raw.error("y.source", "y.source = file needs y.file"))?,
            ),
            other => {
                return Err(raw.error(
                    "y.source",
                    format!("y.source: expected uniform|constant|file, found {other:?}"),
                ))
            }
        };

        let schedule = match raw.str("cp.schedule").unwrap_or("sync") {
            "sync" | "synchronous" => ScheduleSpec::Synchronous,
            "round-robin" => ScheduleSpec::RoundRobin,
            "random-subset" => ScheduleSpec::RandomSubset {
                p: raw
                    .f64("cp.p")?
                    .ok_or_else(|| raw.error("cp.schedule", "random-subset schedule needs cp.p"))?,
            },
            "explicit" => ScheduleSpec::Explicit(
                raw.path("cp.schedule_file")
                    .ok_or_else(|| raw.error("cp.schedule", "explicit schedule needs cp.schedule_file"))?,
            ),
            other => {
                return Err(raw.error(
                    "cp.schedule",
                    format!("cp.schedule: expected sync|round-robin|random-subset|explicit, found {other:?}"),
                ))
            }
        };

        let k0 = match raw.str("cp.k0") {
            None => K0Spec::Value(0.0),
            Some("kbeta") => K0Spec::KBeta,
            Some(_) => K0Spec::Value(
                raw.f64("cp.k0")?
                    .filter(|k| *k >= 0.0)
                    .ok_or_else(|| raw.error("cp.k0", "cp.k0 must be a non-negative number or kbeta"))?,
            ),
        };

        let cfg = ExperimentConfig {
            graph,
            y,
            y_seed: raw.u64("y.seed")?.unwrap_or(0),
            protocol,
            beta: raw.get("cp.beta", "a positive number, inf or auto", parse_beta)?,
            epsilon: raw.f64("epsilon")?,
            schedule,
            schedule_seed: raw.u64("cp.schedule_seed")?.unwrap_or(0),
            k0,
            laziness: raw
                .f64("pairwise.laziness")?
                .unwrap_or(crate::baseline::DEFAULT_LAZINESS),
            adaptive_max_phases: raw.usize("adaptive.max_phases")?.unwrap_or(30),
            adaptive_tau_cap: raw.f64("adaptive.tau_cap")?,
            tau_star: raw.bool("analysis.tau_star")?.unwrap_or(protocol == Protocol::Analysis),
            tau2: raw.bool("analysis.tau2")?.unwrap_or(protocol == Protocol::Analysis),
            stop: StopSpec {
                max_t: raw.usize("stop.max_t")?,
                eps_mu: raw.f64("stop.eps_mu")?,
                eps_target: raw.f64("stop.eps_target")?,
                stride: raw.usize("stop.stride")?,
            },
            output: OutputSpec {
                dir: raw.path("output.dir").unwrap_or_else(|| PathBuf::from("out")),
                traces: raw.bool("output.traces")?.unwrap_or(true),
                record_x: raw.bool("output.record_x")?.unwrap_or(false),
                timing: raw.bool("output.timing")?.unwrap_or(false),
            },
            sweep,
        };
        cfg.check(&raw)?;
        Ok(cfg)
    }

    fn check(&self, raw: &RawConfig) -> Result<()> {
        let beta_given = raw.has("cp.beta") || raw.has("sweep.beta");
        match self.protocol {
            Protocol::CpAdaptive => {
                if beta_given {
                    return Err(raw.error(
                        if raw.has("cp.beta") { "cp.beta" } else { "sweep.beta" },
                        "beta is chosen by the adaptive mixing-time search; remove cp.beta / sweep.beta",
                    ));
                }
                if self.epsilon.is_none() && self.sweep.epsilon.is_empty() {
                    return Err(raw.error("protocol", "protocol = cp-adaptive needs epsilon"));
                }
            }
            Protocol::Cp => {
                if !beta_given {
                    return Err(raw.error("protocol", "protocol = cp needs cp.beta (or sweep.beta)"));
                }
            }
            Protocol::Pairwise | Protocol::Analysis => {}
        }
        if raw.has("cp.beta") && raw.has("sweep.beta") {
            return Err(raw.error("sweep.beta", "cp.beta and sweep.beta are mutually exclusive"));
        }
        if raw.has("graph.n") && raw.has("sweep.n") {
            return Err(raw.error("sweep.n", "graph.n and sweep.n are mutually exclusive"));
        }
        if raw.has("graph.side") && raw.has("sweep.side") {
            return Err(raw.error("sweep.side", "graph.side and sweep.side are mutually exclusive"));
        }
        if raw.has("epsilon") && raw.has("sweep.epsilon") {
            return Err(raw.error("sweep.epsilon", "epsilon and sweep.epsilon are mutually exclusive"));
        }
        let uses_auto = self.beta == Some(BetaSpec::Auto) || self.sweep.beta.contains(&BetaSpec::Auto);
        if uses_auto && self.epsilon.is_none() && self.sweep.epsilon.is_empty() {
            return Err(raw.error("cp.beta", "cp.beta = auto needs epsilon"));
        }
        for eps in self.epsilon.iter().chain(&self.sweep.epsilon) {
            if !(*eps > 0.0 && *eps < 1.0) {
                return Err(raw.error("epsilon", format!("epsilon must be in (0,1), got {eps}")));
            }
        }
        if !(0.0..1.0).contains(&self.laziness) {
            return Err(raw.error("pairwise.laziness", "pairwise.laziness must be in [0,1)"));
        }
        let g = &self.graph;
        let has_n = g.n.is_some() || !self.sweep.n.is_empty();
        let need = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(raw.error(key, msg.to_string()))
            }
        };
        match g.family {
            Family::Cycle => need(has_n, "graph.family", "cycle needs graph.n or sweep.n")?,
            Family::Tree => need(has_n, "graph.family", "tree needs graph.n or sweep.n")?,
            Family::Regular => {
                need(has_n, "graph.family", "regular needs graph.n or sweep.n")?;
                need(g.d.is_some(), "graph.family", "regular needs graph.d")?;
            }
            Family::Torus => {
                need(g.m.is_some(), "graph.family", "torus needs graph.m")?;
                need(
                    g.side.is_some() || !self.sweep.side.is_empty(),
                    "graph.family",
                    "torus needs graph.side or sweep.side",
                )?;
            }
            Family::File => need(g.file.is_some(), "graph.family", "family = file needs graph.file")?,
        }
        Ok(())
    }

    /// Number of cells in the sweep cross product.
    pub fn cell_count(&self) -> usize {
        let len = |k: usize| k.max(1);
        len(self.sweep.n.len())
            * len(self.sweep.side.len())
            * len(self.sweep.beta.len())
            * len(self.sweep.epsilon.len())
            * len(self.sweep.seed.len())
    }

    /// Expand the sweep into concrete cells, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        fn axis<T: Copy>(values: &[T], fallback: T) -> Vec<T> {
            if values.is_empty() {
                vec![fallback]
            } else {
                values.to_vec()
            }
        }
        let ns: Vec<Option<usize>> = if self.sweep.n.is_empty() {
            vec![self.graph.n]
        } else {
            self.sweep.n.iter().map(|&n| Some(n)).collect()
        };
        let sides: Vec<Option<usize>> = if self.sweep.side.is_empty() {
            vec![self.graph.side]
        } else {
            self.sweep.side.iter().map(|&s| Some(s)).collect()
        };
        let betas: Vec<Option<BetaSpec>> = if self.sweep.beta.is_empty() {
            vec![self.beta]
        } else {
            self.sweep.beta.iter().map(|&b| Some(b)).collect()
        };
        let epsilons: Vec<Option<f64>> = if self.sweep.epsilon.is_empty() {
            vec![self.epsilon]
        } else {
            self.sweep.epsilon.iter().map(|&e| Some(e)).collect()
        };
        let seeds = axis(&self.sweep.seed.iter().map(|&s| Some(s)).collect::<Vec<_>>(), None);

        let mut cells = Vec::new();
        for &n in &ns {
            for &side in &sides {
                for &beta in &betas {
                    for &epsilon in &epsilons {
                        for &seed in &seeds {
                            cells.push(Cell {
                                index: cells.len(),
                                n,
                                side,
                                beta,
                                epsilon,
                                graph_seed: seed.unwrap_or(self.graph.seed),
                                y_seed: seed.unwrap_or(self.y_seed),
                                schedule_seed: seed.unwrap_or(self.schedule_seed),
                                seed_label: seed.unwrap_or(self.graph.seed),
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n: Option<usize>,
    pub side: Option<usize>,
    pub beta: Option<BetaSpec>,
    pub epsilon: Option<f64>,
    pub graph_seed: u64,
    pub y_seed: u64,
    pub schedule_seed: u64,
    pub seed_label: u64,
}
