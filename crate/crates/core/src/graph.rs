//! Undirected graphs with a canonical directed-edge index, plus generators
//! for the graph families used in experiments.
//!
//! Every undirected edge `(i, j)` contributes two directed edges `{i,j}` and
//! `{j,i}`. Directed edges are numbered lexicographically by
//! `(source, target)`, and every per-edge vector in the crate (messages,
//! weights, transition matrices) uses that numbering.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Index of a directed edge in the canonical ordering.
pub type EdgeId = usize;

/// Default number of configuration-model attempts before giving up.
pub const DEFAULT_REGULAR_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub source: usize,
    pub target: usize,
}

impl fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.source, self.target)
    }
}

/// A connected simple undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Undirected edges as `(min, max)`, sorted.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists.
    adjacency: Vec<Vec<usize>>,
    /// Directed edge `{i, adjacency[i][k]}` has id `out_offset[i] + k`.
    out_offset: Vec<usize>,
    directed: Vec<DirectedEdge>,
    reverse: Vec<EdgeId>,
    /// For node `i`, ids of the incoming edges `{u,i}`, ordered by `u`.
    incoming: Vec<Vec<EdgeId>>,
    /// Index into `edges` of the undirected edge behind each directed edge.
    undirected_of: Vec<usize>,
}

/// Build a graph from `n` nodes and a list of undirected edges.
///
/// Rejects out-of-range endpoints, self-loops, duplicate edges (in either
/// orientation) and disconnected results.
pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Graph("graph must have at least one node".into()));
    }
    let mut seen = BTreeSet::new();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::Graph(format!(
                "edge ({i},{j}) has an endpoint out of range 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::Graph(format!("self-loop ({i},{j})")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::Graph(format!("duplicate edge ({i},{j})")));
        }
    }

    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in &seen {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
    }

    let unreached = bfs_distances(&adjacency, 0).iter().position(|d| d.is_none());
    if let Some(v) = unreached {
        return Err(Error::Graph(format!(
            "disconnected: node {v} is not reachable from node 0"
        )));
    }

    let edges: Vec<(usize, usize)> = seen.into_iter().collect();
    let mut out_offset = Vec::with_capacity(n + 1);
    let mut directed = Vec::with_capacity(2 * edges.len());
    out_offset.push(0);
    for (i, nbrs) in adjacency.iter().enumerate() {
        for &j in nbrs {
            directed.push(DirectedEdge { source: i, target: j });
        }
        out_offset.push(directed.len());
    }

    let id_of =
        |i: usize, j: usize| -> EdgeId { out_offset[i] + adjacency[i].binary_search(&j).expect("edge present") };
    let reverse = directed.iter().map(|e| id_of(e.target, e.source)).collect();
    let incoming = (0..n)
        .map(|i| adjacency[i].iter().map(|&u| id_of(u, i)).collect())
        .collect();
    let undirected_of = directed
        .iter()
        .map(|e| {
            let key = (e.source.min(e.target), e.source.max(e.target));
            edges.binary_search(&key).expect("edge present")
        })
        .collect();

    Ok(Graph {
        n,
        edges,
        adjacency,
        out_offset,
        directed,
        reverse,
        incoming,
        undirected_of,
    })
}

fn bfs_distances(adjacency: &[Vec<usize>], root: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[root] = Some(0);
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap();
        for &u in &adjacency[v] {
            if dist[u].is_none() {
                dist[u] = Some(dv + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn undirected_edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_undirected(&self) -> usize {
        self.edges.len()
    }

    pub fn num_directed(&self) -> usize {
        self.directed.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn directed_edges(&self) -> &[DirectedEdge] {
        &self.directed
    }

    pub fn directed_edge(&self, e: EdgeId) -> DirectedEdge {
        self.directed[e]
    }

    /// Id of the directed edge `{i,j}`, if `(i,j)` is an edge.
    pub fn edge_id(&self, i: usize, j: usize) -> Option<EdgeId> {
        let nbrs = self.adjacency.get(i)?;
        nbrs.binary_search(&j).ok().map(|k| self.out_offset[i] + k)
    }

    /// Id of `{j,i}` given the id of `{i,j}`.
    pub fn reverse(&self, e: EdgeId) -> EdgeId {
        self.reverse[e]
    }

    /// Ids of the edges `{u,i}` for `u ∈ N(i)`.
    pub fn incoming(&self, i: usize) -> &[EdgeId] {
        &self.incoming[i]
    }

    /// Ids of the edges `{i,u}` for `u ∈ N(i)`.
    pub fn outgoing(&self, i: usize) -> std::ops::Range<EdgeId> {
        self.out_offset[i]..self.out_offset[i + 1]
    }

    /// Index into [`Graph::undirected_edges`] of the edge behind `e`.
    pub fn undirected_index(&self, e: EdgeId) -> usize {
        self.undirected_of[e]
    }

    /// Common degree if the graph is regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree(0);
        self.adjacency.iter().all(|a| a.len() == d).then_some(d)
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n
    }

    pub fn distances_from(&self, root: usize) -> Vec<usize> {
        bfs_distances(&self.adjacency, root)
            .into_iter()
            .map(|d| d.expect("graph is connected"))
            .collect()
    }

    pub fn eccentricity(&self, v: usize) -> usize {
        self.distances_from(v).into_iter().max().unwrap_or(0)
    }

    pub fn diameter(&self) -> usize {
        (0..self.n).map(|v| self.eccentricity(v)).max().unwrap_or(0)
    }

    pub fn is_bipartite(&self) -> bool {
        let dist = self.distances_from(0);
        self.edges.iter().all(|&(i, j)| dist[i] % 2 != dist[j] % 2)
    }

    /// For a tree, the number of nodes on the source side of `{i,j}`
    /// (the set `S_ij` of nodes that reach `j` only through `i`).
    pub fn subtree_size(&self, e: EdgeId) -> Option<usize> {
        if !self.is_tree() {
            return None;
        }
        let DirectedEdge { source, target } = self.directed[e];
        let mut seen = vec![false; self.n];
        seen[source] = true;
        seen[target] = true;
        let mut stack = vec![source];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        Some(count)
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for &(i, j) in &self.edges {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_edge_list(std::io::BufWriter::new(file))
    }

    /// Parse the edge-list format: a header line `n <count>` followed by one
    /// `i j` pair per line. Blank lines and `#` comments are ignored.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Graph> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("expected a node index, found {s:?}"),
                })
            };
            match (n, fields.as_slice()) {
                (None, ["n", count]) => n = Some(parse(count)?),
                (None, _) => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "edge list must start with `n <count>`".into(),
                    })
                }
                (Some(_), [i, j]) => edges.push((parse(i)?, parse(j)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected `i j`, found {line:?}"),
                    })
                }
            }
        }
        let n = n.ok_or_else(|| Error::Graph("empty edge list".into()))?;
        build_graph(n, &edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Graph> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file))
    }
}

/// Positive weights `Q_ij` on the undirected edges of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    /// Indexed like [`Graph::undirected_edges`].
    values: Vec<f64>,
}

impl EdgeWeights {
    /// `Q_ij = 1` on every edge.
    pub fn uniform(graph: &Graph) -> Self {
        Self {
            values: vec![1.0; graph.num_undirected()],
        }
    }

    /// Weights given per undirected edge, in any orientation. Every edge of
    /// the graph must receive exactly one strictly positive weight.
    pub fn from_pairs(graph: &Graph, pairs: &[((usize, usize), f64)]) -> Result<Self> {
        let mut values = vec![None; graph.num_undirected()];
        for &((i, j), q) in pairs {
            let key = (i.min(j), i.max(j));
            let idx = graph
                .edges
                .binary_search(&key)
                .map_err(|_| Error::Config(format!("weight given for non-edge ({i},{j})")))?;
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::Config(format!("weight Q({i},{j}) = {q} is not positive")));
            }
            if values[idx].replace(q).is_some() {
                return Err(Error::Config(format!("weight for ({i},{j}) given twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(idx, q)| {
                q.ok_or_else(|| {
                    let (i, j) = graph.edges[idx];
                    Error::Config(format!("missing weight for edge ({i},{j})"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { values })
    }

    pub fn get(&self, graph: &Graph, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        graph.edges.binary_search(&key).ok().map(|k| self.values[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weight of each directed edge, in canonical order.
    pub fn per_directed(&self, graph: &Graph) -> Vec<f64> {
        (0..graph.num_directed())
            .map(|e| self.values[graph.undirected_index(e)])
            .collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.values.iter().all(|&q| q == 1.0)
    }
}

/// Cycle on `n ≥ 3` nodes with edges `(i, i+1 mod n)`.
pub fn generate_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::Graph(format!("cycle needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    build_graph(n, &edges)
}

/// The `m`-dimensional torus grid with `side` nodes per dimension.
///
/// Node ids are mixed-radix: coordinate `k` of node `v` is
/// `(v / side^k) % side`.
pub fn generate_torus(m: usize, side: usize) -> Result<Graph> {
    if m == 0 {
        return Err(Error::Graph("torus dimension must be >= 1".into()));
    }
    if side < 3 {
        return Err(Error::Graph(format!(
            "torus side must be >= 3 (got {side}); smaller sides create duplicate edges"
        )));
    }
    let n = side
        .checked_pow(m as u32)
        .ok_or_else(|| Error::Graph("torus too large".into()))?;
    let mut edges = Vec::with_capacity(n * m);
    for v in 0..n {
        let mut stride = 1;
        for _ in 0..m {
            let coord = (v / stride) % side;
            let next = if coord + 1 == side {
                v + stride - side * stride
            } else {
                v + stride
            };
            edges.push((v, next));
            stride *= side;
        }
    }
    build_graph(n, &edges)
}

/// A uniformly paired random `d`-regular graph (configuration model), with
/// whole-instance rejection of self-loops, multi-edges and disconnected
/// outcomes. Deterministic for a fixed seed.
pub fn generate_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    generate_random_regular_with_retries(n, d, seed, DEFAULT_REGULAR_RETRIES)
}

pub fn generate_random_regular_with_retries(n: usize, d: usize, seed: u64, retries: usize) -> Result<Graph> {
    if d == 0 || d >= n {
        return Err(Error::Graph(format!("need 1 <= d < n, got n={n}, d={d}")));
    }
    if !(n * d).is_multiple_of(2) {
        return Err(Error::Graph(format!("n*d must be even, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..retries {
        points.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue 'attempt;
            }
        }
        let edges: Vec<_> = seen.into_iter().collect();
        match build_graph(n, &edges) {
            Ok(g) => return Ok(g),
            Err(_) => continue,
        }
    }
    Err(Error::RejectionBudget {
        n,
        d,
        attempts: retries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeShape {
    Path,
    /// Complete `arity`-ary tree in heap layout: the parent of `v` is
    /// `(v - 1) / arity`.
    Balanced {
        arity: usize,
    },
    /// Uniform labelled tree from a random Prüfer sequence.
    Random,
}

pub fn generate_tree(n: usize, shape: TreeShape, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Graph(format!("tree needs n >= 2, got {n}")));
    }
    let edges: Vec<(usize, usize)> = match shape {
        TreeShape::Path => (1..n).map(|v| (v - 1, v)).collect(),
        TreeShape::Balanced { arity } => {
            if arity == 0 {
                return Err(Error::Graph("tree arity must be >= 1".into()));
            }
            (1..n).map(|v| ((v - 1) / arity, v)).collect()
        }
        TreeShape::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prufer: Vec<usize> = (0..n.saturating_sub(2)).map(|_| rng.random_range(0..n)).collect();
            prufer_decode(n, &prufer)
        }
    };
    build_graph(n, &edges)
}

fn prufer_decode(n: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = leaves.pop_first().expect("a leaf always exists");
        edges.push((leaf, v));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    edges
}
