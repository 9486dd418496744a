//! Problem ingestion: weighted graphs, QUBO instances, the QUBO-to-MaxCut
//! reduction, cut evaluation and the shifted performance ratio.
//!
//! Node ids are 0-based internally; the edge-list file format is 1-based.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected weighted graph with signed weights. No self loops, no
/// duplicate pairs, zero-weight edges are dropped at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    /// adjacency[u] = list of (v, w)
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl WeightedGraph {
    /// Build a graph from 0-based edges. Zero-weight edges are dropped.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Graph("graph must have at least one node".into()));
        }
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        let mut out = Vec::new();
        for (u, v, w) in edges {
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Graph(format!("edge ({u},{v}) out of range for {num_nodes} nodes")));
            }
            if !w.is_finite() {
                return Err(Error::Graph(format!("non-finite weight on edge ({u},{v})")));
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key, ()).is_some() {
                return Err(Error::Graph(format!("duplicate edge ({},{})", key.0, key.1)));
            }
            if w != 0.0 {
                out.push(Edge { u: key.0, v: key.1, w });
            }
        }
        let mut g = WeightedGraph { num_nodes, edges: out, adjacency: Vec::new() };
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        self.adjacency = adj;
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    /// Sum of positive edge weights.
    pub fn positive_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w.max(0.0)).sum()
    }

    /// Sum of negative edge weights (a non-positive number).
    pub fn negative_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w.min(0.0)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w.abs()).fold(0.0, f64::max)
    }

    /// Dense adjacency matrix, row-major, N*N.
    pub fn dense_adjacency(&self) -> Vec<f64> {
        let n = self.num_nodes;
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.u * n + e.v] = e.w;
            a[e.v * n + e.u] = e.w;
        }
        a
    }

    /// Induced subgraph on `nodes` (in the given order), keeping only
    /// edges with both endpoints in the set. Returns the subgraph and the
    /// mapping from subgraph index to original node id.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(WeightedGraph, Vec<usize>)> {
        let mut index = HashMap::new();
        for (i, &u) in nodes.iter().enumerate() {
            index.insert(u, i);
        }
        let mut edges = Vec::new();
        for e in &self.edges {
            if let (Some(&a), Some(&b)) = (index.get(&e.u), index.get(&e.v)) {
                edges.push((a, b, e.w));
            }
        }
        Ok((WeightedGraph::new(nodes.len(), edges)?, nodes.to_vec()))
    }
}

/// QUBO instance: minimize x'Qx + c'x over binary x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboInstance {
    pub n: usize,
    /// Symmetric n*n coefficient matrix, row-major.
    pub q: Vec<f64>,
    pub c: Vec<f64>,
}

impl QuboInstance {
    /// Symmetrizes Q as (Q + Q')/2 on construction.
    pub fn new(n: usize, q: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if q.len() != n * n || c.len() != n {
            return Err(Error::Graph("QUBO dimension mismatch".into()));
        }
        let mut qs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                qs[i * n + j] = 0.5 * (q[i * n + j] + q[j * n + i]);
            }
        }
        Ok(QuboInstance { n, q: qs, c })
    }

    /// Objective value for a binary assignment.
    pub fn objective(&self, x: &[u8]) -> f64 {
        let n = self.n;
        let mut f = 0.0;
        for i in 0..n {
            if x[i] == 0 {
                continue;
            }
            f += self.c[i];
            for j in 0..n {
                if x[j] != 0 {
                    f += self.q[i * n + j];
                }
            }
        }
        f
    }
}

/// Spin assignment over {+1, -1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinAssignment(pub Vec<i8>);

impl SpinAssignment {
    pub fn new(z: Vec<i8>) -> Result<Self> {
        if z.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Graph("spin entries must be +1 or -1".into()));
        }
        Ok(SpinAssignment(z))
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        // bit 0 -> +1, bit 1 -> -1
        SpinAssignment(bits.iter().map(|&b| if b == 0 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> SpinAssignment {
        SpinAssignment(self.0.iter().map(|s| -s).collect())
    }
}

/// Map of instance name to best-known cut value.
#[derive(Debug, Clone, Default)]
pub struct BestKnownTable {
    entries: HashMap<String, f64>,
}

impl BestKnownTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, opt: f64) {
        self.entries.insert(name.into(), opt);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).copied()
    }

    /// Ordered copy of all entries.
    pub fn to_map(&self) -> std::collections::BTreeMap<String, f64> {
        self.entries.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    /// Load from a CSV file of lines `instance_name,opt_value`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut table = BestKnownTable::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "instance_name,opt_value" {
                continue;
            }
            let (name, value) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::Parse { line: lineno + 1, message: "expected name,value".into() })?;
            let opt: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: lineno + 1, message: format!("non-numeric opt value {value:?}") })?;
            if !opt.is_finite() {
                return Err(Error::Parse { line: lineno + 1, message: "opt value must be finite".into() });
            }
            table.insert(name.trim(), opt);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut names: Vec<_> = self.entries.keys().collect();
        names.sort();
        let mut out = String::from("instance_name,opt_value\n");
        for name in names {
            out.push_str(&format!("{},{}\n", name, self.entries[name]));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFormat {
    EdgeList,
    Qubo,
}

#[derive(Debug, Clone)]
pub enum ParsedInstance {
    Graph(WeightedGraph),
    Qubo(QuboInstance),
}

/// Parse a benchmark instance file.
///
/// Edge-list: line 1 `N M`, then M lines `u v w` with 1-based node ids.
/// QUBO: line 1 `n`, then triplets `i j q`; rows with i = j are linear
/// terms folded into c.
pub fn parse_instance(path: &Path, format: InstanceFormat) -> Result<ParsedInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance_str(&text, format)
}

pub fn parse_instance_str(text: &str, format: InstanceFormat) -> Result<ParsedInstance> {
    match format {
        InstanceFormat::EdgeList => Ok(ParsedInstance::Graph(parse_edge_list(text)?)),
        InstanceFormat::Qubo => Ok(ParsedInstance::Qubo(parse_qubo(text)?)),
    }
}

fn numbers(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let parts = numbers(header);
    if parts.len() != 2 {
        return Err(Error::Parse { line: lineno + 1, message: "header must be `N M`".into() });
    }
    let n: usize = parts[0]
        .parse()
        .map_err(|_| Error::Parse { line: lineno + 1, message: "bad node count".into() })?;
    let m: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse { line: lineno + 1, message: "bad edge count".into() })?;
    let mut edges = Vec::with_capacity(m);
    let mut count = 0usize;
    for (lineno, line) in lines {
        let parts = numbers(line);
        if parts.len() != 3 {
            return Err(Error::Parse { line: lineno + 1, message: "edge line must be `u v w`".into() });
        }
        let u: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: "bad node id".into() })?;
        let v: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: "bad node id".into() })?;
        let w: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: format!("non-numeric weight {:?}", parts[2]) })?;
        if u == 0 || v == 0 || u > n || v > n {
            return Err(Error::Parse { line: lineno + 1, message: format!("node id out of range 1..={n}") });
        }
        if u == v {
            return Err(Error::Parse { line: lineno + 1, message: format!("self-loop on node {u}") });
        }
        edges.push((u - 1, v - 1, w));
        count += 1;
    }
    if count != m {
        return Err(Error::Parse { line: 1, message: format!("header promises {m} edges, file has {count}") });
    }
    // Report duplicate edges with a line number by checking before construction.
    let mut seen = HashMap::new();
    for (idx, &(u, v, _)) in edges.iter().enumerate() {
        let key = (u.min(v), u.max(v));
        if seen.insert(key, ()).is_some() {
            return Err(Error::Parse {
                line: idx + 2,
                message: format!("duplicate edge ({},{})", key.0 + 1, key.1 + 1),
            });
        }
    }
    WeightedGraph::new(n, edges)
}

pub fn parse_qubo(text: &str) -> Result<QuboInstance> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let parts = numbers(header);
    if parts.is_empty() {
        return Err(Error::Parse { line: lineno + 1, message: "header must be `n`".into() });
    }
    let n: usize = parts[0]
        .parse()
        .map_err(|_| Error::Parse { line: lineno + 1, message: "bad variable count".into() })?;
    let mut q = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for (lineno, line) in lines {
        let parts = numbers(line);
        if parts.len() != 3 {
            return Err(Error::Parse { line: lineno + 1, message: "entry must be `i j q`".into() });
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: "bad index".into() })?;
        let j: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: "bad index".into() })?;
        let value: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Parse { line: lineno + 1, message: format!("non-numeric coefficient {:?}", parts[2]) })?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Parse { line: lineno + 1, message: format!("index out of range 1..={n}") });
        }
        let (i, j) = (i - 1, j - 1);
        if i == j {
            c[i] += value;
        } else {
            // off-diagonal entries are split symmetrically
            q[i * n + j] += value / 2.0;
            q[j * n + i] += value / 2.0;
        }
    }
    QuboInstance::new(n, q, c)
}

/// Reduce a QUBO to weighted MaxCut on n+1 nodes. Node 0 is the
/// auxiliary spin carrying the linear terms. For every spin assignment z,
/// the QUBO objective under x_i = (1 - z_0 * z_i)/2 equals
/// `offset - cut_value(graph, z)`.
pub fn qubo_to_maxcut(qubo: &QuboInstance) -> Result<(WeightedGraph, f64)> {
    let n = qubo.n;
    // Fold diagonal into the linear part: Q_ii x_i^2 = Q_ii x_i for binary x.
    let mut c = qubo.c.clone();
    for i in 0..n {
        c[i] += qubo.q[i * n + i];
    }
    // f(z) = const + sum_{i<j} J_ij z_i z_j + sum_i h_i z_i  with x = (1-z)/2.
    // Pair term 2 Q_ij x_i x_j contributes J_ij = Q_ij/2, -Q_ij/2 to each h,
    // and Q_ij/2 to the constant. Linear c_i x_i contributes -c_i/2 to h_i
    // and c_i/2 to the constant.
    let mut constant = 0.0;
    let mut h = vec![0.0; n];
    let mut edges = Vec::new();
    for i in 0..n {
        constant += c[i] / 2.0;
        h[i] -= c[i] / 2.0;
        for j in (i + 1)..n {
            let qij = qubo.q[i * n + j];
            constant += qij / 2.0;
            h[i] -= qij / 2.0;
            h[j] -= qij / 2.0;
            // Graph edge weight 2*J_ij so that f = offset - cut.
            if qij != 0.0 {
                edges.push((i + 1, j + 1, qij));
            }
        }
    }
    let mut total_w = edges.iter().map(|&(_, _, w)| w).sum::<f64>();
    for (i, &hi) in h.iter().enumerate() {
        if hi != 0.0 {
            edges.push((0, i + 1, 2.0 * hi));
            total_w += 2.0 * hi;
        }
    }
    let graph = WeightedGraph::new(n + 1, edges)?;
    let offset = constant + total_w / 2.0;
    Ok((graph, offset))
}

/// Rescale edge weights by the maximum absolute weight so all weights lie
/// in [-1, 1] with at least one weight of magnitude 1.
pub fn normalize_edge_weights(g: &WeightedGraph) -> Result<WeightedGraph> {
    let max_abs = g.max_abs_weight();
    if max_abs == 0.0 {
        return Err(Error::Graph("cannot normalize an all-zero-weight graph".into()));
    }
    WeightedGraph::new(
        g.num_nodes(),
        g.edges().iter().map(|e| (e.u, e.v, e.w / max_abs)),
    )
}

/// Cut value H_C(z) = 1/2 sum_{(u,v) in E} w_uv (1 - z_u z_v).
pub fn cut_value(g: &WeightedGraph, z: &SpinAssignment) -> Result<f64> {
    if z.len() != g.num_nodes() {
        return Err(Error::Graph(format!(
            "spin length {} does not match graph size {}",
            z.len(),
            g.num_nodes()
        )));
    }
    Ok(g
        .edges()
        .iter()
        .map(|e| 0.5 * e.w * (1.0 - f64::from(z.0[e.u]) * f64::from(z.0[e.v])))
        .sum())
}

/// Performance ratio rho = (cut - neg) / (opt - neg). `neg` is the sum of
/// negative edge weights (<= 0). Returns values > 1 with a warning when
/// the best-known value is beaten.
pub fn performance_ratio(cut: f64, opt: f64, neg: f64) -> Result<f64> {
    if neg > 0.0 {
        return Err(Error::Graph("neg must be <= 0".into()));
    }
    let denom = opt - neg;
    if denom <= 0.0 {
        return Err(Error::Graph(format!("degenerate ratio: opt - neg = {denom} <= 0")));
    }
    if cut > opt {
        eprintln!("warning: cut {cut} exceeds best-known {opt}; ratio > 1 returned as computed");
    }
    Ok((cut - neg) / denom)
}

/// Exact optimum by enumerating 2^(N-1) assignments (z_0 fixed by Z2
/// symmetry). Intended for N <= 20.
pub fn brute_force_opt(g: &WeightedGraph) -> (f64, SpinAssignment) {
    let n = g.num_nodes();
    assert!(n <= 26, "brute force limited to small graphs");
    let edges = g.edges();
    let mut best = f64::NEG_INFINITY;
    let mut best_mask = 0u64;
    let half = 1u64 << (n - 1) as u64;
    for mask in 0..half {
        let mut cut = 0.0;
        for e in edges {
            let zu = (mask >> e.u) & 1;
            let zv = (mask >> e.v) & 1;
            if zu != zv {
                cut += e.w;
            }
        }
        if cut > best {
            best = cut;
            best_mask = mask;
        }
    }
    let z = SpinAssignment(
        (0..n)
            .map(|i| if (best_mask >> i) & 1 == 1 { -1 } else { 1 })
            .collect(),
    );
    (best, z)
}

/// Multi-start 1-opt local search with a few random restarts; used to
/// obtain best-known values for graphs too large to enumerate.
pub fn local_search_opt(g: &WeightedGraph, restarts: usize, seed: u64) -> (f64, SpinAssignment) {
    use rand::{Rng, SeedableRng};
    let n = g.num_nodes();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut best_cut = f64::NEG_INFINITY;
    let mut best_z = vec![1i8; n];
    for _ in 0..restarts.max(1) {
        let mut z: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
        // gain[u] = change in cut from flipping u
        loop {
            let mut improved = false;
            for u in 0..n {
                let mut gain = 0.0;
                for &(v, w) in g.neighbors(u) {
                    // flipping u toggles the (u,v) term
                    if z[u] == z[v] {
                        gain += w;
                    } else {
                        gain -= w;
                    }
                }
                if gain > 1e-12 {
                    z[u] = -z[u];
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        let cut = cut_value(g, &SpinAssignment(z.clone())).expect("length matches");
        if cut > best_cut {
            best_cut = cut;
            best_z = z;
        }
    }
    (best_cut, SpinAssignment(best_z))
}

impl fmt::Display for WeightedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightedGraph(N={}, M={})", self.num_nodes, self.edges.len())
    }
}

// serde skips the adjacency cache; rebuild on deserialize via a helper.
impl WeightedGraph {
    pub fn rebuild_after_deserialize(&mut self) {
        self.rebuild_adjacency();
    }
}
