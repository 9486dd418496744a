//! Offline dataset construction: heuristic partitions with uniform random
//! QAOA parameters, labeled by running the recursive solver with the fixed
//! (S, P) pair at the top level.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::fnv1a;
use crate::error::{Error, Result};
use crate::graph::{brute_force_opt, local_search_opt, performance_ratio, WeightedGraph};
use crate::partition::{run_heuristic, PartitionMatrix, Partitioner};
use crate::sim::QaoaAngles;
use crate::solver::{mix_seed, recursive_solve, HeuristicStrategy, PartitionPlan, PartitionStrategy, SolveConfig};

/// How many independent runs each heuristic contributes per graph before
/// deduplication.
pub const RUNS_PER_HEURISTIC: usize = 70;

const HEURISTICS: [Partitioner; 4] =
    [Partitioner::Random, Partitioner::Modularity, Partitioner::Boundary, Partitioner::Kl];

/// One labeled training sample: a graph reference, a top-level partition,
/// the per-subgraph QAOA parameters (row-major 2p x k), and the realized
/// performance ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflineSample {
    /// Instance name or file reference.
    pub graph: String,
    /// Stable fingerprint of the node count and edge list.
    pub graph_hash: u64,
    pub assignment: Vec<usize>,
    pub capacity: usize,
    /// Circuit depth p.
    pub depth: usize,
    /// Parameter matrix, row-major 2p x k (gamma rows then beta rows).
    pub params: Vec<f64>,
    pub rho: f64,
}

/// Stable fingerprint of a graph: FNV-1a over node count and the sorted
/// edge list bit patterns.
pub fn graph_fingerprint(g: &WeightedGraph) -> u64 {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(g.num_nodes() as u64).to_le_bytes());
    let mut edges = g.edges().to_vec();
    edges.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
    for e in edges {
        bytes.extend_from_slice(&(e.u as u64).to_le_bytes());
        bytes.extend_from_slice(&(e.v as u64).to_le_bytes());
        bytes.extend_from_slice(&e.w.to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// Canonical form for dedup: groups ordered by minimum member id, labels
/// renumbered accordingly (identical to first-appearance relabeling).
pub fn canonical_assignment(assignment: &[usize]) -> Vec<usize> {
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(assignment.len());
    for &a in assignment {
        let next = relabel.len();
        out.push(*relabel.entry(a).or_insert(next));
    }
    out
}

/// Wraps an inner strategy but serves a fixed (S, P) plan for the first
/// (top-level) call; deeper recursion levels fall through to the inner
/// strategy with freshly optimized parameters.
pub struct FixedTopStrategy<S: PartitionStrategy> {
    fixed: Mutex<Option<PartitionPlan>>,
    inner: S,
}

impl FixedTopStrategy<HeuristicStrategy> {
    pub fn new(plan: PartitionPlan, family: Partitioner) -> Self {
        Self::with_inner(plan, HeuristicStrategy(family))
    }
}

impl<S: PartitionStrategy> FixedTopStrategy<S> {
    pub fn with_inner(plan: PartitionPlan, inner: S) -> Self {
        FixedTopStrategy { fixed: Mutex::new(Some(plan)), inner }
    }
}

impl<S: PartitionStrategy> PartitionStrategy for FixedTopStrategy<S> {
    fn plan(&self, g: &WeightedGraph, c_max: usize, p: usize, seed: u64) -> Result<PartitionPlan> {
        if let Some(plan) = self.fixed.lock().expect("plan lock").take() {
            if plan.part.assignment.len() == g.num_nodes() {
                return Ok(plan);
            }
        }
        self.inner.plan(g, c_max, p, seed)
    }

    fn label(&self) -> String {
        format!("fixed-top({})", self.inner.label())
    }
}

/// Run one heuristic under a random node relabeling so that deterministic
/// heuristics still produce varied partitions across runs.
fn perturbed_heuristic(
    which: Partitioner,
    g: &WeightedGraph,
    c_max: usize,
    rng: &mut ChaCha20Rng,
) -> Result<PartitionMatrix> {
    let n = g.num_nodes();
    let mut perm: Vec<usize> = (0..n).collect(); // old id -> new id
    perm.shuffle(rng);
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (perm[e.u], perm[e.v], e.w)).collect();
    let shuffled = WeightedGraph::new(n, edges)?;
    let part = run_heuristic(which, &shuffled, c_max, rng.gen())?;
    let assignment: Vec<usize> = (0..n).map(|u| part.assignment[perm[u]]).collect();
    PartitionMatrix::new(assignment, c_max)
}

/// Uniform random parameters in [0, 2pi) for k subgraphs at depth p.
fn random_angle_set(k: usize, p: usize, rng: &mut ChaCha20Rng) -> Vec<QaoaAngles> {
    (0..k)
        .map(|_| {
            let gamma: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            QaoaAngles::new(gamma, beta).expect("in-range angles")
        })
        .collect()
}

fn flatten_angles(angles: &[QaoaAngles], p: usize) -> Vec<f64> {
    let k = angles.len();
    let mut flat = vec![0.0; 2 * p * k];
    for (j, a) in angles.iter().enumerate() {
        for l in 0..p {
            flat[l * k + j] = a.gamma()[l];
            flat[(p + l) * k + j] = a.beta()[l];
        }
    }
    flat
}

/// Build the labeled offline dataset for one graph: 4 heuristics x
/// `RUNS_PER_HEURISTIC` runs, canonicalized and deduplicated, each unique
/// partition paired with uniform random parameters and labeled by the
/// recursive solver.
pub fn build_graph_samples(
    name: &str,
    g: &WeightedGraph,
    cfg: &SolveConfig,
    runs_per_heuristic: usize,
    seed: u64,
) -> Result<Vec<OfflineSample>> {
    cfg.validate()?;
    let n = g.num_nodes();
    let hash = graph_fingerprint(g);
    let (opt, _) = if n <= 22 {
        brute_force_opt(g)
    } else {
        local_search_opt(g, 64, mix_seed(seed, 0xA11))
    };
    let neg = g.negative_weight();

    // collect unique partitions, remembering the first heuristic family
    // that produced each (used for deeper recursion levels while labeling)
    let mut unique: BTreeMap<Vec<usize>, Partitioner> = BTreeMap::new();
    for (hi, &which) in HEURISTICS.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(seed, (0x70 + hi) as u64 ^ hash));
        for _ in 0..runs_per_heuristic {
            let part = perturbed_heuristic(which, g, cfg.max_nodes, &mut rng)?;
            unique.entry(canonical_assignment(&part.assignment)).or_insert(which);
        }
    }

    // label each unique partition in parallel with derived seeds
    let jobs: Vec<(usize, Vec<usize>, Partitioner)> =
        unique.into_iter().enumerate().map(|(i, (a, f))| (i, a, f)).collect();
    let samples: Result<Vec<OfflineSample>> = jobs
        .into_par_iter()
        .map(|(i, assignment, family)| {
            let part = PartitionMatrix::new(assignment.clone(), cfg.max_nodes)?;
            let k = part.k;
            let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(seed, 0x9000 + i as u64));
            let angles = random_angle_set(k, cfg.p, &mut rng);
            let flat = flatten_angles(&angles, cfg.p);
            // the sampled angles seed the standard optimization protocol, so
            // labels measure each partition as the deployed solver would
            let plan = PartitionPlan { part, angles: Some(angles), pin_angles: false, used_fallback: false };
            let strategy = FixedTopStrategy::new(plan, family);
            let mut sub_cfg = cfg.clone();
            sub_cfg.seed = mix_seed(seed, 0xB000 + i as u64);
            let report = recursive_solve(g, &strategy, &sub_cfg)?;
            let rho = match performance_ratio(report.cut, opt, neg) {
                Ok(r) => r,
                // a local-search OPT can be beaten; record the raw ratio
                Err(_) => (report.cut - neg) / (opt - neg),
            };
            Ok(OfflineSample {
                graph: name.to_string(),
                graph_hash: hash,
                assignment,
                capacity: cfg.max_nodes,
                depth: cfg.p,
                params: flat,
                rho,
            })
        })
        .collect();
    samples
}

/// Build samples for a whole corpus of graphs.
pub fn build_offline_dataset(
    graphs: &[(String, WeightedGraph)],
    cfg: &SolveConfig,
    runs_per_heuristic: usize,
    seed: u64,
) -> Result<Vec<OfflineSample>> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        let gs = mix_seed(seed, graph_fingerprint(g));
        out.extend(build_graph_samples(name, g, cfg, runs_per_heuristic, gs)?);
    }
    Ok(out)
}

/// Write samples as JSON-lines, one sample per line.
pub fn save_samples(path: &Path, samples: &[OfflineSample]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a JSON-lines sample file.
pub fn load_samples(path: &Path) -> Result<Vec<OfflineSample>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: OfflineSample = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(s);
    }
    Ok(out)
}

impl OfflineSample {
    /// Decode the flat parameter row-major storage back into per-subgraph
    /// angle sets.
    pub fn angle_sets(&self) -> Result<Vec<QaoaAngles>> {
        let p = self.depth;
        let k = self.assignment.iter().copied().max().map_or(0, |m| m + 1);
        if self.params.len() != 2 * p * k {
            return Err(Error::Model(format!(
                "parameter storage has {} values, expected {}",
                self.params.len(),
                2 * p * k
            )));
        }
        (0..k)
            .map(|j| {
                let gamma: Vec<f64> = (0..p).map(|l| self.params[l * k + j]).collect();
                let beta: Vec<f64> = (0..p).map(|l| self.params[(p + l) * k + j]).collect();
                QaoaAngles::new(gamma, beta)
            })
            .collect()
    }
}
