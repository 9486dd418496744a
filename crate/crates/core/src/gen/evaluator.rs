//! Multi-view surrogate evaluator: predicts the performance ratio of a
//! (graph, partition, parameters) configuration from three encoded views
//! (topology, masked partition structure, broadcast circuit parameters).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::features::{compute_node_features, NUM_FEATURES};
use crate::graph::WeightedGraph;
use crate::nn::layers::{
    gat_encoder_forward, gat_masks, gcn_encoder_forward, gcn_norm_adjacency, glorot_uniform,
    init_gat_encoder, init_gcn_encoder, linear, EncoderSpec, ParamStore,
};
use crate::nn::tape::{Id, Matrix, Tape};
use crate::nn::Checkpoint;
use crate::partition::PartitionMatrix;
use crate::sim::QaoaAngles;

pub const EVAL_HIDDEN: usize = 64;
pub const EVAL_LAYERS: usize = 3;
pub const EVAL_HEAD_HIDDEN: usize = 256;

/// One-hot N x k assignment matrix of a hard partition.
pub fn partition_to_matrix(part: &PartitionMatrix) -> Matrix {
    let n = part.num_nodes();
    let mut s = Matrix::zeros(n, part.k);
    for (u, &a) in part.assignment.iter().enumerate() {
        s.set(u, a, 1.0);
    }
    s
}

/// Stack per-subgraph angles into the 2p x k parameter matrix (column j =
/// gamma_1..gamma_p, beta_1..beta_p of subgraph j).
pub fn angles_to_matrix(angles: &[QaoaAngles]) -> Result<Matrix> {
    if angles.is_empty() {
        return Err(Error::Shape("need at least one angle set".into()));
    }
    let p = angles[0].depth();
    let k = angles.len();
    let mut m = Matrix::zeros(2 * p, k);
    for (j, a) in angles.iter().enumerate() {
        if a.depth() != p {
            return Err(Error::Shape("mixed circuit depths in parameter matrix".into()));
        }
        for l in 0..p {
            m.set(l, j, a.gamma()[l]);
            m.set(p + l, j, a.beta()[l]);
        }
    }
    Ok(m)
}

/// Column j of a 2p x k parameter matrix as QAOA angles.
pub fn matrix_to_angles(m: &Matrix, j: usize) -> Result<QaoaAngles> {
    if m.rows % 2 != 0 || m.rows == 0 {
        return Err(Error::Shape("parameter matrix must have 2p rows".into()));
    }
    let p = m.rows / 2;
    QaoaAngles::new(
        (0..p).map(|l| m.get(l, j)).collect(),
        (0..p).map(|l| m.get(p + l, j)).collect(),
    )
}

/// Masked adjacency A_sub = A element-wise (S S^T): intra-partition edges
/// only. Works for hard one-hot S and for soft assignments.
pub fn masked_adjacency(a: &Matrix, s: &Matrix) -> Matrix {
    let sst = s.matmul(&s.transpose());
    let mut out = a.clone();
    for i in 0..out.data.len() {
        out.data[i] *= sst.data[i];
    }
    out
}

/// Surrogate evaluator f_phi.
#[derive(Debug, Clone)]
pub struct EvaluatorNet {
    pub store: ParamStore,
    pub p: usize,
    /// Scale attention messages by edge weights (disabled by the
    /// `--gnn-unweighted` ablation).
    pub weighted: bool,
}

impl EvaluatorNet {
    pub fn new(p: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (topo, part, parm) = Self::encoder_specs(p);
        init_gat_encoder(&mut store, &topo, &mut rng);
        init_gcn_encoder(&mut store, &part, &mut rng);
        init_gat_encoder(&mut store, &parm, &mut rng);
        store.insert("head.w0", glorot_uniform(3 * EVAL_HIDDEN, EVAL_HEAD_HIDDEN, &mut rng));
        store.insert("head.b0", Matrix::zeros(1, EVAL_HEAD_HIDDEN));
        store.insert("head.w1", glorot_uniform(EVAL_HEAD_HIDDEN, 1, &mut rng));
        store.insert("head.b1", Matrix::zeros(1, 1));
        EvaluatorNet { store, p, weighted: true }
    }

    fn encoder_specs(p: usize) -> (EncoderSpec, EncoderSpec, EncoderSpec) {
        (
            EncoderSpec { prefix: "topo".into(), in_dim: NUM_FEATURES, hidden: EVAL_HIDDEN, layers: EVAL_LAYERS },
            EncoderSpec { prefix: "part".into(), in_dim: NUM_FEATURES, hidden: EVAL_HIDDEN, layers: EVAL_LAYERS },
            EncoderSpec { prefix: "parm".into(), in_dim: 4 * p, hidden: EVAL_HIDDEN, layers: EVAL_LAYERS },
        )
    }

    /// Forward pass on an existing tape. `s` is the N x k partition matrix
    /// node (hard, or an STE substitution) and `p_mat` the 2p x k
    /// parameter node. Adjacency-derived structures are constants for the
    /// pass; gradients reach `s` through the X_param = S P^T broadcast.
    /// Returns the scalar rho-hat node, strictly inside (0.5, 1.0).
    pub fn forward(
        &self,
        tape: &mut Tape,
        ids: &BTreeMap<String, Id>,
        g: &WeightedGraph,
        x: &Matrix,
        s: Id,
        p_mat: Id,
    ) -> Result<Id> {
        let n = g.num_nodes();
        let (sv, pv) = (tape.value(s).shape(), tape.value(p_mat).shape());
        if sv.0 != n {
            return Err(Error::Shape(format!("partition matrix has {} rows for {n} nodes", sv.0)));
        }
        if pv.0 != 2 * self.p || pv.1 != sv.1 {
            return Err(Error::Shape(format!(
                "parameter matrix {}x{} incompatible with p={} and k={}",
                pv.0, pv.1, self.p, sv.1
            )));
        }
        let (topo, part, parm) = Self::encoder_specs(self.p);
        let a = Matrix::from_vec(n, n, g.dense_adjacency())?;
        let a_sub = masked_adjacency(&a, tape.value(s));

        // topology view on the full adjacency
        let topo_masks = gat_masks(&a, self.weighted);
        let x_id = tape.leaf(x.clone());
        let h_topo = gat_encoder_forward(tape, ids, &topo, x_id, &topo_masks);
        let pool_topo = tape.mean_rows(h_topo);

        // partition view on the masked adjacency
        let norm_sub = gcn_norm_adjacency(&a_sub);
        let h_part = gcn_encoder_forward(tape, ids, &part, x_id, &norm_sub);
        let pool_part = tape.mean_rows(h_part);

        // parameter view: broadcast per-subgraph parameters to nodes, embed
        // periodically, encode on the masked adjacency
        let p_t = tape.transpose(p_mat);
        let x_param_raw = tape.matmul(s, p_t);
        let x_param = tape.mod_tau(x_param_raw);
        let sin = tape.sin(x_param);
        let cos = tape.cos(x_param);
        let embedded = tape.concat_cols(&[sin, cos]);
        let sub_masks = gat_masks(&a_sub, self.weighted);
        let h_parm = gat_encoder_forward(tape, ids, &parm, embedded, &sub_masks);
        let pool_parm = tape.mean_rows(h_parm);

        let joint = tape.concat_cols(&[pool_topo, pool_part, pool_parm]);
        let h0 = linear(tape, joint, ids["head.w0"], ids["head.b0"]);
        let h0 = tape.relu(h0);
        let logit = linear(tape, h0, ids["head.w1"], ids["head.b1"]);
        let sig = tape.sigmoid(logit);
        let half = tape.scale(sig, 0.5);
        Ok(tape.add_scalar(half, 0.5))
    }

    /// Plain inference on hard inputs.
    pub fn predict(&self, g: &WeightedGraph, s: &Matrix, p_mat: &Matrix) -> Result<f64> {
        let x = compute_node_features(g);
        let x = Matrix::from_vec(g.num_nodes(), NUM_FEATURES, x.data)?;
        let mut tape = Tape::new();
        let ids = self.store.leaves(&mut tape);
        let s_id = tape.leaf(s.clone());
        let p_id = tape.leaf(p_mat.clone());
        let out = self.forward(&mut tape, &ids, g, &x, s_id, p_id)?;
        Ok(tape.value(out).data[0])
    }

    pub fn predict_config(&self, g: &WeightedGraph, part: &PartitionMatrix, angles: &[QaoaAngles]) -> Result<f64> {
        self.predict(g, &partition_to_matrix(part), &angles_to_matrix(angles)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new("evaluator", self.store.params.clone());
        ckpt.meta.insert("p".into(), serde_json::json!(self.p));
        ckpt.meta.insert("weighted".into(), serde_json::json!(self.weighted));
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind("evaluator")?;
        let p = ckpt.meta.get("p").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let weighted = ckpt.meta.get("weighted").and_then(|v| v.as_bool()).unwrap_or(true);
        Ok(EvaluatorNet { store: ParamStore { params: ckpt.params.clone() }, p, weighted })
    }
}
