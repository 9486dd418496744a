//! Joint partition/parameter generator: topology encoder, orthogonal
//! complement head (OCH) for discriminative soft partitions, greedy
//! capacity discretization (GCD) with a straight-through estimator, and
//! the arctangent parameter head.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::{compute_node_features, NUM_FEATURES};
use crate::graph::WeightedGraph;
use crate::nn::layers::{
    gat_encoder_forward, gat_masks, gcn_encoder_forward, gcn_norm_adjacency, glorot_uniform,
    init_gat_encoder, init_gcn_encoder, linear, EncoderSpec, ParamStore,
};
use crate::nn::tape::{Id, Matrix, Tape};
use crate::nn::Checkpoint;
use crate::partition::{validate_partition, PartitionMatrix};
use crate::sim::QaoaAngles;
use crate::solver::{PartitionPlan, PartitionStrategy};

use super::evaluator::{masked_adjacency, matrix_to_angles};

pub const GEN_HIDDEN: usize = 128;
pub const GEN_LAYERS: usize = 2;
pub const K_MAX: usize = 127;
pub const OCH_TAU: f64 = 0.05;

/// Cluster centers from the orthogonal complement head: Gram-Schmidt QR
/// of [g | anchors], dropping the g column. Rows of C are orthonormal and
/// orthogonal to the global context g. Returns (C, g, fallback flag).
pub fn och_centers(h_topology: &Matrix, k: usize, pool: &Matrix) -> Result<(Matrix, Vec<f64>, bool)> {
    let (n, h) = h_topology.shape();
    if k == 0 {
        return Err(Error::Model("k must be >= 1".into()));
    }
    if k + 1 > h {
        return Err(Error::Model(format!("k + 1 = {} exceeds hidden dim {h}", k + 1)));
    }
    if k > pool.rows {
        return Err(Error::Model(format!("k = {k} exceeds anchor pool size {}", pool.rows)));
    }
    // global context: normalized mean of row-normalized embeddings
    let mut g_tilde = vec![0.0; h];
    for i in 0..n {
        let norm: f64 = (0..h).map(|d| h_topology.get(i, d).powi(2)).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for d in 0..h {
                g_tilde[d] += h_topology.get(i, d) / norm;
            }
        }
    }
    for v in g_tilde.iter_mut() {
        *v /= n as f64;
    }
    let mut fallback = false;
    let mut g_norm: f64 = g_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
    if g_norm < 1e-12 {
        // degenerate global direction: unnormalized mean + tiny fixed jitter
        fallback = true;
        for (d, v) in g_tilde.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += h_topology.get(i, d);
            }
            *v = acc / n as f64 + 1e-8 * (d + 1) as f64;
        }
        g_norm = g_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
        if g_norm < 1e-15 {
            return Err(Error::Model("zero global context vector".into()));
        }
    }
    let g: Vec<f64> = g_tilde.iter().map(|x| x / g_norm).collect();

    // modified Gram-Schmidt on [g | a_1 .. a_k]
    let mut basis: Vec<Vec<f64>> = vec![g.clone()];
    for i in 0..k {
        let mut v: Vec<f64> = (0..h).map(|d| pool.get(i, d)).collect();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vd, qd) in v.iter_mut().zip(q) {
                *vd -= dot * qd;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::Model(format!("anchor {i} degenerate under Gram-Schmidt")));
        }
        for vd in v.iter_mut() {
            *vd /= norm;
        }
        basis.push(v);
    }
    let mut c = Matrix::zeros(k, h);
    for (i, q) in basis[1..].iter().enumerate() {
        for (d, &qd) in q.iter().enumerate() {
            c.set(i, d, qd);
        }
    }
    Ok((c, g, fallback))
}

/// Greedy capacity discretization (round-based admission). Returns the
/// raw group label per node in 0..k; labels keep the soft-partition
/// column identity (groups may be empty).
pub fn gcd_assignment(s_tilde: &Matrix, c_max: usize) -> Result<Vec<usize>> {
    let (n, k) = s_tilde.shape();
    if c_max == 0 || k * c_max < n {
        return Err(Error::Partition(format!("capacity infeasible: k={k} c_max={c_max} for {n} nodes")));
    }
    // Phase 1: per-row preference ranks, descending score, ties by lower
    // partition index
    let ranks: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&a, &b| {
                s_tilde
                    .get(i, b)
                    .partial_cmp(&s_tilde.get(i, a))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    // Phase 2: round-based greedy negotiation
    let mut assigned = vec![usize::MAX; n];
    let mut load = vec![0usize; k];
    let mut remaining = n;
    for l in 0..k {
        let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..n {
            if assigned[i] == usize::MAX {
                candidates[ranks[i][l]].push(i);
            }
        }
        for j in 0..k {
            let remain = c_max - load[j];
            let mut u = std::mem::take(&mut candidates[j]);
            if u.len() > remain {
                // admit the highest-scoring candidates, ties by lower id
                u.sort_by(|&a, &b| {
                    s_tilde
                        .get(b, j)
                        .partial_cmp(&s_tilde.get(a, j))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                u.truncate(remain);
            }
            for &i in &u {
                assigned[i] = j;
                load[j] += 1;
                remaining -= 1;
            }
        }
        if remaining == 0 {
            break;
        }
    }
    if remaining > 0 {
        return Err(Error::Partition("GCD left unassigned nodes".into()));
    }
    Ok(assigned)
}

/// GCD to a validated partition (labels compacted, empty groups dropped).
pub fn gcd_discretize(s_tilde: &Matrix, c_max: usize) -> Result<PartitionMatrix> {
    PartitionMatrix::new(gcd_assignment(s_tilde, c_max)?, c_max)
}

/// Joint generator g_theta.
#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub store: ParamStore,
    /// Frozen N(0,1) anchor pool, k_max x hidden; not optimized.
    pub pool: Matrix,
    pub p: usize,
    pub weighted: bool,
}

/// Tape handles and decoded values of one generator forward pass.
pub struct GeneratorForward {
    /// Hard partition (STE node, N x k' compact columns) for the evaluator.
    pub s_ste: Id,
    /// Parameter matrix node, 2p x k'.
    pub p_out: Id,
    /// Soft partition node (N x k raw columns).
    pub s_tilde: Id,
    pub part: PartitionMatrix,
    pub angles: Vec<QaoaAngles>,
    pub och_fallback: bool,
}

impl GeneratorNet {
    pub fn new(p: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (topo, part) = Self::encoder_specs();
        init_gat_encoder(&mut store, &topo, &mut rng);
        init_gcn_encoder(&mut store, &part, &mut rng);
        store.insert("phead.w0", glorot_uniform(GEN_HIDDEN, GEN_HIDDEN, &mut rng));
        store.insert("phead.b0", Matrix::zeros(1, GEN_HIDDEN));
        store.insert("phead.w1", glorot_uniform(GEN_HIDDEN, 4 * p, &mut rng));
        store.insert("phead.b1", Matrix::zeros(1, 4 * p));
        // anchor pool drawn after the parameters, frozen for the lifetime
        // of the model
        let pool = Matrix {
            rows: K_MAX,
            cols: GEN_HIDDEN,
            data: (0..K_MAX * GEN_HIDDEN).map(|_| rand::Rng::sample(&mut rng, StandardNormal)).collect(),
        };
        GeneratorNet { store, pool, p, weighted: true }
    }

    fn encoder_specs() -> (EncoderSpec, EncoderSpec) {
        (
            EncoderSpec { prefix: "gtopo".into(), in_dim: NUM_FEATURES, hidden: GEN_HIDDEN, layers: GEN_LAYERS },
            EncoderSpec { prefix: "gpart".into(), in_dim: NUM_FEATURES, hidden: GEN_HIDDEN, layers: GEN_LAYERS },
        )
    }

    /// Forward pass on an existing tape: partition first (OCH soft
    /// assignment, GCD hard rounding behind an STE), parameters second
    /// (partition encoder on the stop-gradient masked adjacency, pooled
    /// per subgraph, arctangent head into [0, 2pi)).
    pub fn forward(
        &self,
        tape: &mut Tape,
        ids: &BTreeMap<String, Id>,
        g: &WeightedGraph,
        x: &Matrix,
        k: usize,
        c_max: usize,
    ) -> Result<GeneratorForward> {
        let n = g.num_nodes();
        let (topo_spec, part_spec) = Self::encoder_specs();
        let a = Matrix::from_vec(n, n, g.dense_adjacency())?;

        // topology embeddings
        let topo_masks = gat_masks(&a, self.weighted);
        let x_id = tape.leaf(x.clone());
        let h_topo = gat_encoder_forward(tape, ids, &topo_spec, x_id, &topo_masks);

        // OCH soft partition; C is constant for the pass (no gradient
        // through the QR), learning flows through H C^T via H
        let (c, _g_vec, och_fallback) = och_centers(tape.value(h_topo), k, &self.pool)?;
        let c_t = tape.leaf(c.transpose());
        let logits = tape.matmul(h_topo, c_t);
        let s_tilde = tape.softmax_rows(logits, OCH_TAU);

        // GCD hard rounding; compact the labels (empty columns dropped)
        // while keeping the soft columns addressable for the STE
        let raw = gcd_assignment(tape.value(s_tilde), c_max)?;
        let part = PartitionMatrix::new(raw.clone(), c_max)?;
        let kc = part.k;
        let mut col_map = Matrix::zeros(k, kc);
        for (u, &raw_label) in raw.iter().enumerate() {
            col_map.set(raw_label, part.assignment[u], 1.0);
        }
        let col_map_id = tape.leaf(col_map);
        let s_soft_compact = tape.matmul(s_tilde, col_map_id);
        let mut hard = Matrix::zeros(n, kc);
        for (u, &label) in part.assignment.iter().enumerate() {
            hard.set(u, label, 1.0);
        }
        let s_ste = tape.hard_substitute(s_soft_compact, hard.clone());

        // parameter branch on the stop-gradient masked adjacency
        let a_sub = masked_adjacency(&a, &hard);
        let norm_sub = gcn_norm_adjacency(&a_sub);
        let h_part = gcn_encoder_forward(tape, ids, &part_spec, x_id, &norm_sub);
        let h_sub = tape.segment_mean_rows(h_part, &part.assignment, kc);
        let m0 = linear(tape, h_sub, ids["phead.w0"], ids["phead.b0"]);
        let m0 = tape.relu(m0);
        let raw_head = linear(tape, m0, ids["phead.w1"], ids["phead.b1"]); // kc x 4p
        // split the 4p columns into (y, x) halves with constant selectors
        let mut sel_y = Matrix::zeros(4 * self.p, 2 * self.p);
        let mut sel_x = Matrix::zeros(4 * self.p, 2 * self.p);
        for j in 0..2 * self.p {
            sel_y.set(j, j, 1.0);
            sel_x.set(2 * self.p + j, j, 1.0);
        }
        let sel_y = tape.leaf(sel_y);
        let sel_x = tape.leaf(sel_x);
        let y = tape.matmul(raw_head, sel_y);
        let xc = tape.matmul(raw_head, sel_x);
        let angles_mat = tape.atan2(y, xc); // kc x 2p, entries in [0, 2pi)
        let p_out = tape.transpose(angles_mat); // 2p x kc

        let p_value = tape.value(p_out).clone();
        let angles: Result<Vec<QaoaAngles>> = (0..kc).map(|j| matrix_to_angles(&p_value, j)).collect();
        Ok(GeneratorForward { s_ste, p_out, s_tilde, part, angles: angles?, och_fallback })
    }

    /// Inference convenience: fresh tape, standardized structural features.
    pub fn generate(&self, g: &WeightedGraph, c_max: usize) -> Result<(PartitionMatrix, Vec<QaoaAngles>)> {
        self.generate_with_k(g, default_k(g.num_nodes(), c_max)?, c_max)
    }

    pub fn generate_with_k(
        &self,
        g: &WeightedGraph,
        k: usize,
        c_max: usize,
    ) -> Result<(PartitionMatrix, Vec<QaoaAngles>)> {
        let x = features_matrix(g)?;
        let mut tape = Tape::new();
        let ids = self.store.leaves(&mut tape);
        let fwd = self.forward(&mut tape, &ids, g, &x, k, c_max)?;
        Ok((fwd.part, fwd.angles))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut params = self.store.params.clone();
        params.insert("frozen.pool".to_string(), self.pool.clone());
        let mut ckpt = Checkpoint::new("generator", params);
        ckpt.meta.insert("p".into(), serde_json::json!(self.p));
        ckpt.meta.insert("weighted".into(), serde_json::json!(self.weighted));
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind("generator")?;
        let mut params = ckpt.params.clone();
        let pool = params
            .remove("frozen.pool")
            .ok_or_else(|| Error::Model("checkpoint missing anchor pool".into()))?;
        let p = ckpt.meta.get("p").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let weighted = ckpt.meta.get("weighted").and_then(|v| v.as_bool()).unwrap_or(true);
        Ok(GeneratorNet { store: ParamStore { params }, pool, p, weighted })
    }
}

/// Default subgraph count: the minimum feasible k under the capacity.
pub fn default_k(n: usize, c_max: usize) -> Result<usize> {
    if c_max == 0 {
        return Err(Error::Partition("capacity must be >= 1".into()));
    }
    let k = n.div_ceil(c_max);
    if k > K_MAX {
        return Err(Error::Model(format!("k = {k} exceeds anchor pool capacity {K_MAX}")));
    }
    Ok(k.max(1))
}

/// Candidate subgraph counts for surrogate-driven selection: the minimum
/// feasible k plus a few finer splits. Heuristic partitioners frequently
/// outperform the minimal split by using more, smaller groups, so the
/// generator is given the same freedom when an evaluator is available to
/// rank the options.
pub fn candidate_ks(n: usize, c_max: usize) -> Result<Vec<usize>> {
    let kmin = default_k(n, c_max)?;
    let hi = (kmin + 3).min(K_MAX).min(n.saturating_sub(1).max(1));
    Ok((kmin..=hi.max(kmin)).collect())
}

/// Standardized structural features as a matrix.
pub fn features_matrix(g: &WeightedGraph) -> Result<Matrix> {
    let f = compute_node_features(g);
    Matrix::from_vec(g.num_nodes(), NUM_FEATURES, f.data)
}

/// The trained generator as a recursion partitioning strategy: emits both
/// the partition and per-subgraph initial angles at every level.
pub struct GeneratorStrategy {
    pub net: GeneratorNet,
}

impl PartitionStrategy for GeneratorStrategy {
    fn plan(&self, g: &WeightedGraph, c_max: usize, _p: usize, _seed: u64) -> Result<PartitionPlan> {
        let (part, angles) = self.net.generate(g, c_max)?;
        debug_assert!(validate_partition(&part).is_empty());
        Ok(PartitionPlan { part, angles: Some(angles), pin_angles: false, used_fallback: false })
    }

    fn direct_angles(&self, g: &WeightedGraph, _p: usize, _seed: u64) -> Option<QaoaAngles> {
        // whole graph as a single subgraph: k = 1 forward
        let x = features_matrix(g).ok()?;
        let mut tape = Tape::new();
        let ids = self.net.store.leaves(&mut tape);
        let fwd = self.net.forward(&mut tape, &ids, g, &x, 1, g.num_nodes()).ok()?;
        fwd.angles.into_iter().next()
    }

    fn label(&self) -> String {
        "gen".to_string()
    }
}
