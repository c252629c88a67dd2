//! Communication schedules: which directed edges transmit at each step.

use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeId, Graph};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Every directed edge at every step.
    Synchronous,
    /// One edge per step, cycling through the canonical order.
    RoundRobin,
    /// Each edge independently with probability `p` per step.
    RandomSubset { p: f64, seed: u64 },
    /// A fixed list of update sets, replayed cyclically.
    Explicit(Vec<Vec<EdgeId>>),
}

/// The edges updated at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSet<'a> {
    All,
    Edges(&'a [EdgeId]),
}

impl Schedule {
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let m = graph.num_directed();
        match self {
            Schedule::Synchronous | Schedule::RoundRobin => Ok(()),
            Schedule::RandomSubset { p, .. } => {
                if *p > 0.0 && *p <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "random-subset probability must be in (0,1], got {p}"
                    )))
                }
            }
            Schedule::Explicit(sets) => {
                if sets.is_empty() {
                    return Err(Error::Config("explicit schedule is empty".into()));
                }
                let mut covered = vec![false; m];
                for &e in sets.iter().flatten() {
                    if e >= m {
                        return Err(Error::Config(format!(
                            "explicit schedule names edge id {e}, graph has {m}"
                        )));
                    }
                    covered[e] = true;
                }
                match covered.iter().position(|c| !c) {
                    Some(e) => Err(Error::Config(format!(
                        "explicit schedule never updates edge {}",
                        graph.directed_edge(e)
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Length of one "full schedule cycle", the window over which message
    /// changes are accumulated for the convergence test.
    pub fn window(&self, graph: &Graph) -> usize {
        let m = graph.num_directed().max(1);
        match self {
            Schedule::Synchronous => 1,
            Schedule::RoundRobin => m,
            Schedule::RandomSubset { p, .. } => {
                let m = m as f64;
                ((m / p) * m.ln()).ceil().max(1.0) as usize
            }
            Schedule::Explicit(sets) => sets.len().max(1),
        }
    }

    pub fn cursor(&self, graph: &Graph) -> ScheduleCursor<'_> {
        let rng = match self {
            Schedule::RandomSubset { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        ScheduleCursor {
            schedule: self,
            num_edges: graph.num_directed(),
            position: 0,
            rng,
            buffer: Vec::new(),
        }
    }

    /// Parse an explicit schedule: one step per line, each step a
    /// whitespace-separated list of directed edges written `i,j`. A line
    /// holding only `-` is an empty step; `#` starts a comment.
    pub fn read_explicit<R: BufRead>(graph: &Graph, r: R) -> Result<Schedule> {
        let mut sets = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "-" {
                sets.push(Vec::new());
                continue;
            }
            let mut set = Vec::new();
            for tok in line.split_whitespace() {
                let err = || Error::Parse {
                    line: lineno + 1,
                    message: format!("expected a directed edge `i,j`, found {tok:?}"),
                };
                let (i, j) = tok.split_once(',').ok_or_else(err)?;
                let i: usize = i.parse().map_err(|_| err())?;
                let j: usize = j.parse().map_err(|_| err())?;
                let e = graph.edge_id(i, j).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("{{{i},{j}}} is not an edge of the graph"),
                })?;
                set.push(e);
            }
            sets.push(set);
        }
        Ok(Schedule::Explicit(sets))
    }

    pub fn load_explicit(graph: &Graph, path: impl AsRef<Path>) -> Result<Schedule> {
        let file = std::fs::File::open(path)?;
        Self::read_explicit(graph, std::io::BufReader::new(file))
    }
}

/// Lazily materializes the update sets of a schedule.
#[derive(Debug)]
pub struct ScheduleCursor<'s> {
    schedule: &'s Schedule,
    num_edges: usize,
    position: usize,
    rng: Option<ChaCha8Rng>,
    buffer: Vec<EdgeId>,
}

impl ScheduleCursor<'_> {
    pub fn next_set(&mut self) -> UpdateSet<'_> {
        let pos = self.position;
        self.position += 1;
        match self.schedule {
            Schedule::Synchronous => UpdateSet::All,
            Schedule::RoundRobin => {
                self.buffer.clear();
                if self.num_edges > 0 {
                    self.buffer.push(pos % self.num_edges);
                }
                UpdateSet::Edges(&self.buffer)
            }
            Schedule::RandomSubset { p, .. } => {
                let rng = self.rng.as_mut().expect("seeded");
                self.buffer.clear();
                for e in 0..self.num_edges {
                    if rng.random::<f64>() < *p {
                        self.buffer.push(e);
                    }
                }
                UpdateSet::Edges(&self.buffer)
            }
            Schedule::Explicit(sets) => UpdateSet::Edges(&sets[pos % sets.len()]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_cycle;

    #[test]
    fn round_robin_cycles_all_edges() {
        let g = generate_cycle(4).unwrap();
        let s = Schedule::RoundRobin;
        let mut c = s.cursor(&g);
        let seen: Vec<EdgeId> = (0..16)
            .map(|_| match c.next_set() {
                UpdateSet::Edges(e) => e[0],
                UpdateSet::All => unreachable!(),
            })
            .collect();
        assert_eq!(seen[..8], (0..8).collect::<Vec<_>>()[..]);
        assert_eq!(seen[8..], seen[..8]);
        assert_eq!(s.window(&g), 8);
    }

    #[test]
    fn random_subset_is_seeded() {
        let g = generate_cycle(10).unwrap();
        let s = Schedule::RandomSubset { p: 0.3, seed: 9 };
        let collect = || {
            let mut c = s.cursor(&g);
            (0..50)
                .map(|_| match c.next_set() {
                    UpdateSet::Edges(e) => e.to_vec(),
                    UpdateSet::All => unreachable!(),
                })
                .collect::<Vec<_>>()
        };
        let a = collect();
        assert_eq!(a, collect());
        let mut hit = vec![false; g.num_directed()];
        a.iter().flatten().for_each(|&e| hit[e] = true);
        assert!(hit.iter().all(|&h| h));
        assert!(Schedule::RandomSubset { p: 0.0, seed: 0 }.validate(&g).is_err());
        // 20 edges: ceil((20 / 0.3) * ln 20)
        assert_eq!(s.window(&g), ((20.0 / 0.3) * 20f64.ln()).ceil() as usize);
    }

    #[test]
    fn explicit_parse_and_coverage() {
        let g = generate_cycle(3).unwrap();
        let text = "# steps\n0,1 1,2 2,0\n-\n1,0 2,1 0,2\n";
        let s = Schedule::read_explicit(&g, text.as_bytes()).unwrap();
        s.validate(&g).unwrap();
        match &s {
            Schedule::Explicit(sets) => {
                assert_eq!(sets.len(), 3);
                assert!(sets[1].is_empty());
            }
            _ => unreachable!(),
        }
        let partial = Schedule::read_explicit(&g, "0,1\n".as_bytes()).unwrap();
        assert!(partial.validate(&g).is_err());
        assert!(Schedule::read_explicit(&g, "0,0\n".as_bytes()).is_err());
    }
}
