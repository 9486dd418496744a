//! Neural building blocks on top of the tape: parameter storage with
//! seeded Glorot initialization, dense layers, GCN convolution and
//! single-head GATv2 attention over signed weighted adjacencies.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::tape::{Id, Matrix, Tape};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Named parameter matrices; BTreeMap keeps iteration order stable for
/// deterministic optimization and checkpointing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub params: BTreeMap<String, Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        self.params.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> &Matrix {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name:?}"))
    }

    /// Register every parameter as a tape leaf; returns name -> node id.
    pub fn leaves(&self, tape: &mut Tape) -> BTreeMap<String, Id> {
        self.params
            .iter()
            .map(|(name, value)| (name.clone(), tape.leaf(value.clone())))
            .collect()
    }

    /// Zero gradient accumulators matching every parameter.
    pub fn zero_grads(&self) -> BTreeMap<String, Matrix> {
        self.params
            .iter()
            .map(|(name, value)| (name.clone(), Matrix::zeros(value.rows, value.cols)))
            .collect()
    }
}

/// Accumulate this tape's gradients into a running gradient map.
pub fn accumulate_grads(
    grads: &mut BTreeMap<String, Matrix>,
    ids: &BTreeMap<String, Id>,
    tape_grads: &[Matrix],
) {
    for (name, id) in ids {
        grads.get_mut(name).expect("gradient buffer").add_assign(&tape_grads[id.0]);
    }
}

/// Uniform Glorot initialization with fan-based scaling.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix {
        rows,
        cols,
        data: (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect(),
    }
}

/// x W + b with a broadcast row bias.
pub fn linear(tape: &mut Tape, x: Id, w: Id, b: Id) -> Id {
    let xw = tape.matmul(x, w);
    tape.add_row_vec(xw, b)
}

/// Symmetric GCN normalization D^{-1/2} (A_eff + I) D^{-1/2}, where D is
/// the degree of |A_eff| + I. Signed weights stay in the numerator; the
/// absolute values keep the normalization well-defined.
pub fn gcn_norm_adjacency(a_eff: &Matrix) -> Matrix {
    assert_eq!(a_eff.rows, a_eff.cols, "adjacency must be square");
    let n = a_eff.rows;
    let mut deg = vec![0.0; n];
    for i in 0..n {
        let mut d = 1.0; // self loop
        for j in 0..n {
            if i != j {
                d += a_eff.get(i, j).abs();
            }
        }
        deg[i] = d;
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = if i == j { 1.0 } else { a_eff.get(i, j) };
            out.set(i, j, a / (deg[i].sqrt() * deg[j].sqrt()));
        }
    }
    out
}

/// One GCN convolution: norm_adj X W + b. The normalized adjacency is a
/// constant for the pass (precompute with [`gcn_norm_adjacency`]).
pub fn gcn_layer(tape: &mut Tape, x: Id, norm_adj: &Matrix, w: Id, b: Id) -> Id {
    let adj = tape.leaf(norm_adj.clone());
    let ax = tape.matmul(adj, x);
    linear(tape, ax, w, b)
}

/// Constant attention structure for a GATv2 layer: the neighborhood mask
/// (neighbors plus self) and the per-edge message scaling (edge weight,
/// self-loop 1; all ones in unweighted mode).
pub struct GatMasks {
    pub mask: Matrix,
    pub edge_weights: Matrix,
}

pub fn gat_masks(a_eff: &Matrix, weighted: bool) -> GatMasks {
    assert_eq!(a_eff.rows, a_eff.cols, "adjacency must be square");
    let n = a_eff.rows;
    let mut mask = Matrix::zeros(n, n);
    let mut weights = Matrix::zeros(n, n);
    for i in 0..n {
        mask.set(i, i, 1.0);
        weights.set(i, i, 1.0);
        for j in 0..n {
            if i != j && a_eff.get(i, j) != 0.0 {
                mask.set(i, j, 1.0);
                weights.set(i, j, if weighted { a_eff.get(i, j) } else { 1.0 });
            }
        }
    }
    GatMasks { mask, edge_weights: weights }
}

/// Single-head GATv2: logits e_ij = att . leaky_relu(W_s h_i + W_t h_j)
/// over j in neighbors(i) plus self; alpha = masked softmax; output
/// row i = sum_j alpha_ij * w_ij * (W_t h_j).
pub fn gatv2_layer(tape: &mut Tape, x: Id, masks: &GatMasks, w_s: Id, w_t: Id, att: Id) -> Id {
    let s = tape.matmul(x, w_s);
    let t = tape.matmul(x, w_t);
    let logits = tape.pair_leaky_dot(s, t, att, LEAKY_SLOPE);
    let alpha = tape.softmax_rows_masked(logits, &masks.mask, 1.0);
    let weights = tape.leaf(masks.edge_weights.clone());
    let scaled = tape.mul(alpha, weights);
    tape.matmul(scaled, t)
}

/// Parameters of an L-layer GNN encoder with uniform hidden width.
pub struct EncoderSpec {
    pub prefix: String,
    pub in_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

/// Register GCN encoder parameters (W_l, b_l per layer).
pub fn init_gcn_encoder(store: &mut ParamStore, spec: &EncoderSpec, rng: &mut ChaCha20Rng) {
    for l in 0..spec.layers {
        let in_dim = if l == 0 { spec.in_dim } else { spec.hidden };
        store.insert(format!("{}.w{l}", spec.prefix), glorot_uniform(in_dim, spec.hidden, rng));
        store.insert(format!("{}.b{l}", spec.prefix), Matrix::zeros(1, spec.hidden));
    }
}

/// Register GATv2 encoder parameters (W_s, W_t, att per layer).
pub fn init_gat_encoder(store: &mut ParamStore, spec: &EncoderSpec, rng: &mut ChaCha20Rng) {
    for l in 0..spec.layers {
        let in_dim = if l == 0 { spec.in_dim } else { spec.hidden };
        store.insert(format!("{}.ws{l}", spec.prefix), glorot_uniform(in_dim, spec.hidden, rng));
        store.insert(format!("{}.wt{l}", spec.prefix), glorot_uniform(in_dim, spec.hidden, rng));
        store.insert(format!("{}.att{l}", spec.prefix), glorot_uniform(1, spec.hidden, rng));
    }
}

/// Run a GCN encoder stack with ReLU between layers (no activation after
/// the last layer).
pub fn gcn_encoder_forward(
    tape: &mut Tape,
    ids: &BTreeMap<String, Id>,
    spec: &EncoderSpec,
    x: Id,
    norm_adj: &Matrix,
) -> Id {
    let mut h = x;
    for l in 0..spec.layers {
        let w = ids[&format!("{}.w{l}", spec.prefix)];
        let b = ids[&format!("{}.b{l}", spec.prefix)];
        h = gcn_layer(tape, h, norm_adj, w, b);
        if l + 1 < spec.layers {
            h = tape.relu(h);
        }
    }
    h
}

/// Run a GATv2 encoder stack with ReLU between layers.
pub fn gat_encoder_forward(
    tape: &mut Tape,
    ids: &BTreeMap<String, Id>,
    spec: &EncoderSpec,
    x: Id,
    masks: &GatMasks,
) -> Id {
    let mut h = x;
    for l in 0..spec.layers {
        let ws = ids[&format!("{}.ws{l}", spec.prefix)];
        let wt = ids[&format!("{}.wt{l}", spec.prefix)];
        let att = ids[&format!("{}.att{l}", spec.prefix)];
        h = gatv2_layer(tape, h, masks, ws, wt, att);
        if l + 1 < spec.layers {
            h = tape.relu(h);
        }
    }
    h
}
