//! Capacity-constrained baseline partitioners: seeded random chunking,
//! greedy modularity agglomeration, boundary-node minimization, and
//! recursive Kernighan-Lin bisection. All outputs satisfy the hard
//! per-group capacity and are deterministic under a fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Assignment of every node to one of k groups, each of size <= capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMatrix {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub capacity: usize,
}

impl PartitionMatrix {
    /// Build from an assignment vector, compacting group labels to 0..k in
    /// order of first appearance by lowest node id.
    pub fn new(assignment: Vec<usize>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Partition("capacity must be >= 1".into()));
        }
        if assignment.is_empty() {
            return Err(Error::Partition("empty assignment".into()));
        }
        let mut relabel: Vec<Option<usize>> = vec![None; assignment.len()];
        let mut next = 0usize;
        let mut compact = Vec::with_capacity(assignment.len());
        for &a in &assignment {
            if a >= assignment.len() {
                return Err(Error::Partition(format!("group label {a} out of range")));
            }
            let label = *relabel[a].get_or_insert_with(|| {
                let l = next;
                next += 1;
                l
            });
            compact.push(label);
        }
        let part = PartitionMatrix { assignment: compact, k: next, capacity };
        let violations = validate_partition(&part);
        if !violations.is_empty() {
            return Err(Error::Partition(violations.join("; ")));
        }
        Ok(part)
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    /// Node lists per group, node ids ascending within each group.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (u, &a) in self.assignment.iter().enumerate() {
            out[a].push(u);
        }
        out
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Check the partition invariants; returns human-readable violations
/// (empty = valid).
pub fn validate_partition(part: &PartitionMatrix) -> Vec<String> {
    let mut violations = Vec::new();
    if part.capacity == 0 {
        violations.push("capacity is 0".into());
        return violations;
    }
    for (u, &a) in part.assignment.iter().enumerate() {
        if a >= part.k {
            violations.push(format!("node {u} assigned to out-of-range group {a}"));
        }
    }
    let mut sizes = vec![0usize; part.k];
    for &a in &part.assignment {
        if a < part.k {
            sizes[a] += 1;
        }
    }
    for (g, &s) in sizes.iter().enumerate() {
        if s == 0 {
            violations.push(format!("group {g} is empty"));
        }
        if s > part.capacity {
            violations.push(format!("group {g} has {s} nodes, capacity {}", part.capacity));
        }
    }
    let min_k = part.assignment.len().div_ceil(part.capacity);
    if part.k < min_k {
        violations.push(format!("k = {} below minimum {min_k}", part.k));
    }
    violations
}

/// Uniform random partition: shuffle the nodes and cut into chunks of
/// `c_max`, giving ceil(N / c_max) groups.
pub fn random_partition(g: &WeightedGraph, c_max: usize, seed: u64) -> Result<PartitionMatrix> {
    if c_max == 0 {
        return Err(Error::Partition("capacity must be >= 1".into()));
    }
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (i, &u) in order.iter().enumerate() {
        assignment[u] = i / c_max;
    }
    PartitionMatrix::new(assignment, c_max)
}

/// Modularity Q of a grouping over signed weights:
/// Q = sum_c [ in_c / (2m) - (tot_c / (2m))^2 ] with 2m = sum_ij A_ij.
pub fn modularity(g: &WeightedGraph, assignment: &[usize]) -> f64 {
    let two_m = 2.0 * g.total_weight();
    if two_m == 0.0 {
        return 0.0;
    }
    let k = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; k]; // each internal edge counted twice
    let mut strength = vec![0.0; k];
    for e in g.edges() {
        strength[assignment[e.u]] += e.w;
        strength[assignment[e.v]] += e.w;
        if assignment[e.u] == assignment[e.v] {
            internal[assignment[e.u]] += 2.0 * e.w;
        }
    }
    (0..k)
        .map(|c| internal[c] / two_m - (strength[c] / two_m) * (strength[c] / two_m))
        .sum()
}

/// Greedy agglomerative modularity maximization (CNM) with merge refusal
/// above capacity. On non-positive total weight the modularity objective
/// is undefined and we fall back to a random partition; the flag in the
/// returned pair reports that.
pub fn modularity_partition_flagged(g: &WeightedGraph, c_max: usize) -> Result<(PartitionMatrix, bool)> {
    if c_max == 0 {
        return Err(Error::Partition("capacity must be >= 1".into()));
    }
    let n = g.num_nodes();
    let m = g.total_weight();
    if g.edges().is_empty() || m <= 0.0 {
        return Ok((random_partition(g, c_max, 0)?, true));
    }
    // community state: label per node, size, strength D_c, and pairwise
    // cross weights W_ab kept in a dense k x k matrix (desk-scale N)
    let mut label: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    let mut size = vec![1usize; n];
    let mut strength: Vec<f64> = (0..n).map(|u| g.neighbors(u).iter().map(|&(_, w)| w).sum()).collect();
    let mut between = vec![0.0; n * n];
    for e in g.edges() {
        between[e.u * n + e.v] += e.w;
        between[e.v * n + e.u] += e.w;
    }
    loop {
        // best merge: max dQ, tie-break lowest (a, b)
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !alive[b] || between[a * n + b] == 0.0 || size[a] + size[b] > c_max {
                    continue;
                }
                let dq = between[a * n + b] / m - strength[a] * strength[b] / (2.0 * m * m);
                let better = match best {
                    None => true,
                    Some((bq, _, _)) => dq > bq + 1e-15,
                };
                if better {
                    best = Some((dq, a, b));
                }
            }
        }
        match best {
            Some((dq, a, b)) if dq > 1e-15 => {
                // merge b into a
                for c in 0..n {
                    if alive[c] && c != a && c != b {
                        between[a * n + c] += between[b * n + c];
                        between[c * n + a] = between[a * n + c];
                    }
                }
                strength[a] += strength[b];
                size[a] += size[b];
                alive[b] = false;
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
            _ => break,
        }
    }
    Ok((PartitionMatrix::new(label, c_max)?, false))
}

pub fn modularity_partition(g: &WeightedGraph, c_max: usize) -> Result<PartitionMatrix> {
    modularity_partition_flagged(g, c_max).map(|(p, _)| p)
}

/// Count of boundary nodes: nodes with at least one neighbor in a
/// different group.
pub fn boundary_count(g: &WeightedGraph, assignment: &[usize]) -> usize {
    (0..g.num_nodes())
        .filter(|&u| g.neighbors(u).iter().any(|&(v, _)| assignment[v] != assignment[u]))
        .count()
}

/// Two-stage boundary minimization: greedy-modularity initialization, then
/// local node moves that strictly reduce the boundary-node count subject
/// to capacity. Stops when no improving move exists or after N^2 moves.
pub fn boundary_partition(g: &WeightedGraph, c_max: usize, seed: u64) -> Result<PartitionMatrix> {
    let init = match modularity_partition_flagged(g, c_max)? {
        (p, false) => p,
        _ => random_partition(g, c_max, seed)?,
    };
    let n = g.num_nodes();
    let mut assignment = init.assignment;
    let mut sizes = vec![0usize; n];
    for &a in &assignment {
        sizes[a] += 1;
    }
    let mut current = boundary_count(g, &assignment);
    let mut moves = 0usize;
    'outer: while moves < n * n {
        for u in 0..n {
            let from = assignment[u];
            // only boundary nodes can profit from moving
            if g.neighbors(u).iter().all(|&(v, _)| assignment[v] == from) {
                continue;
            }
            for to in 0..n {
                if to == from || sizes[to] == 0 || sizes[to] >= c_max {
                    continue;
                }
                assignment[u] = to;
                let cand = boundary_count(g, &assignment);
                if cand < current {
                    sizes[from] -= 1;
                    sizes[to] += 1;
                    current = cand;
                    moves += 1;
                    continue 'outer;
                }
                assignment[u] = from;
            }
        }
        break;
    }
    PartitionMatrix::new(assignment, c_max)
}

/// Cross-cut weight between the two sides of a bisection (side[] is a
/// boolean per local node index).
fn bisection_cut(g: &WeightedGraph, side: &[bool]) -> f64 {
    g.edges()
        .iter()
        .filter(|e| side[e.u] != side[e.v])
        .map(|e| e.w)
        .sum()
}

/// One Kernighan-Lin pass over a balanced bisection. Mutates `side` if a
/// positive-gain prefix of swaps is found; returns the achieved gain.
fn kl_pass(g: &WeightedGraph, side: &mut [bool]) -> f64 {
    let n = g.num_nodes();
    // d[u] = external - internal cost of u under the current sides
    let mut d = vec![0.0; n];
    // d over ALL neighbors (locked included) so the gain d_a + d_b - 2w_ab
    // is the exact cut change of swapping a and b in the full graph
    let recompute = |d: &mut [f64], side: &[bool]| {
        for u in 0..n {
            d[u] = g
                .neighbors(u)
                .iter()
                .map(|&(v, w)| if side[v] != side[u] { w } else { -w })
                .sum();
        }
    };
    let mut locked = vec![false; n];
    let mut work = side.to_vec();
    recompute(&mut d, &work);
    let mut swaps: Vec<(usize, usize)> = Vec::new();
    let mut gains: Vec<f64> = Vec::new();
    loop {
        // best unlocked cross pair by gain, tie-break lowest ids
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if locked[a] || work[a] {
                continue;
            }
            for b in 0..n {
                if locked[b] || !work[b] {
                    continue;
                }
                let w_ab = g.neighbors(a).iter().find(|&&(v, _)| v == b).map_or(0.0, |&(_, w)| w);
                let gain = d[a] + d[b] - 2.0 * w_ab;
                if best.is_none_or(|(bg, _, _)| gain > bg + 1e-15) {
                    best = Some((gain, a, b));
                }
            }
        }
        let Some((gain, a, b)) = best else { break };
        work[a] = !work[a];
        work[b] = !work[b];
        locked[a] = true;
        locked[b] = true;
        swaps.push((a, b));
        gains.push(gain);
        recompute(&mut d, &work);
    }
    // take the best positive prefix of cumulative gain
    let mut acc = 0.0;
    let mut best_prefix = 0usize;
    let mut best_gain = 0.0;
    for (i, &gain) in gains.iter().enumerate() {
        acc += gain;
        if acc > best_gain + 1e-12 {
            best_gain = acc;
            best_prefix = i + 1;
        }
    }
    for &(a, b) in &swaps[..best_prefix] {
        side[a] = !side[a];
        side[b] = !side[b];
    }
    best_gain
}

/// Recursive balanced bisection with Kernighan-Lin refinement. Each
/// bisection splits the node set into halves differing by at most one and
/// runs KL passes until no positive-gain pass; recursion stops when parts
/// fit the capacity.
pub fn kl_partition(g: &WeightedGraph, c_max: usize, seed: u64) -> Result<PartitionMatrix> {
    if c_max == 0 {
        return Err(Error::Partition("capacity must be >= 1".into()));
    }
    let n = g.num_nodes();
    let mut assignment = vec![0usize; n];
    let mut next_label = 0usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stack: Vec<Vec<usize>> = vec![(0..n).collect()];
    while let Some(nodes) = stack.pop() {
        if nodes.len() <= c_max {
            for &u in &nodes {
                assignment[u] = next_label;
            }
            next_label += 1;
            continue;
        }
        let (sub, mapping) = g.induced_subgraph(&nodes)?;
        // balanced random initial split
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.shuffle(&mut rng);
        let half = nodes.len() / 2;
        let mut side = vec![false; nodes.len()];
        for &i in order.iter().take(half) {
            side[i] = true;
        }
        let mut prev_cut = bisection_cut(&sub, &side);
        loop {
            let gain = kl_pass(&sub, &mut side);
            if gain <= 1e-12 {
                break;
            }
            let cut = bisection_cut(&sub, &side);
            debug_assert!(cut <= prev_cut + 1e-9, "KL pass increased cut: {prev_cut} -> {cut}");
            prev_cut = cut;
        }
        let left: Vec<usize> = (0..nodes.len()).filter(|&i| !side[i]).map(|i| mapping[i]).collect();
        let right: Vec<usize> = (0..nodes.len()).filter(|&i| side[i]).map(|i| mapping[i]).collect();
        stack.push(right);
        stack.push(left);
    }
    PartitionMatrix::new(assignment, c_max)
}

/// Which heuristic to run; `Gen` is handled by the caller with a trained
/// generator model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partitioner {
    Random,
    Modularity,
    Boundary,
    Kl,
    Gen,
}

impl std::str::FromStr for Partitioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Partitioner::Random),
            "modularity" => Ok(Partitioner::Modularity),
            "boundary" => Ok(Partitioner::Boundary),
            "kl" => Ok(Partitioner::Kl),
            "gen" => Ok(Partitioner::Gen),
            other => Err(Error::Partition(format!("unknown partitioner {other:?}"))),
        }
    }
}

impl std::fmt::Display for Partitioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Partitioner::Random => "random",
            Partitioner::Modularity => "modularity",
            Partitioner::Boundary => "boundary",
            Partitioner::Kl => "kl",
            Partitioner::Gen => "gen",
        };
        write!(f, "{name}")
    }
}

/// Run one of the four baseline heuristics.
pub fn run_heuristic(
    which: Partitioner,
    g: &WeightedGraph,
    c_max: usize,
    seed: u64,
) -> Result<PartitionMatrix> {
    match which {
        Partitioner::Random => random_partition(g, c_max, seed),
        Partitioner::Modularity => modularity_partition(g, c_max),
        Partitioner::Boundary => boundary_partition(g, c_max, seed),
        Partitioner::Kl => kl_partition(g, c_max, seed),
        Partitioner::Gen => Err(Error::Partition("gen partitioner requires a trained model".into())),
    }
}
