//! Structural node descriptors: degree, weighted degree, weighted
//! clustering, PageRank and Brandes betweenness, standardized per graph
//! into an N x 5 feature matrix.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::graph::WeightedGraph;

pub const NUM_FEATURES: usize = 5;

const PAGERANK_DAMPING: f64 = 0.85;
const PAGERANK_TOL: f64 = 1e-9;
const PAGERANK_MAX_ITERS: usize = 200;
const VARIANCE_GUARD: f64 = 1e-12;

/// Standardized N x 5 feature matrix, row-major:
/// [degree, weighted degree, clustering, pagerank, betweenness].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub num_nodes: usize,
    pub data: Vec<f64>,
}

impl NodeFeatures {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * NUM_FEATURES..(i + 1) * NUM_FEATURES]
    }
}

pub fn compute_node_features(g: &WeightedGraph) -> NodeFeatures {
    let raw = raw_node_features(g);
    NodeFeatures { num_nodes: g.num_nodes(), data: standardize_columns(&raw, g.num_nodes()) }
}

/// Raw (unstandardized) feature columns, row-major N x 5.
pub fn raw_node_features(g: &WeightedGraph) -> Vec<f64> {
    let n = g.num_nodes();
    let degree: Vec<f64> = (0..n).map(|u| g.neighbors(u).len() as f64).collect();
    let strength: Vec<f64> = (0..n).map(|u| g.neighbors(u).iter().map(|&(_, w)| w).sum()).collect();
    let clustering = weighted_clustering(g, &degree);
    let pagerank = pagerank(g);
    let betweenness = betweenness_centrality(g);
    let mut out = vec![0.0; n * NUM_FEATURES];
    for u in 0..n {
        out[u * NUM_FEATURES] = degree[u];
        out[u * NUM_FEATURES + 1] = strength[u];
        out[u * NUM_FEATURES + 2] = clustering[u];
        out[u * NUM_FEATURES + 3] = pagerank[u];
        out[u * NUM_FEATURES + 4] = betweenness[u];
    }
    out
}

/// Onnela-style weighted clustering on normalized absolute weights.
/// Nodes with fewer than two neighbors get 0.
fn weighted_clustering(g: &WeightedGraph, degree: &[f64]) -> Vec<f64> {
    let n = g.num_nodes();
    let max_abs = g.max_abs_weight();
    if max_abs == 0.0 {
        return vec![0.0; n];
    }
    // hat(A)_ij = |A_ij| / max|A|
    let mut hat = vec![0.0; n * n];
    for e in g.edges() {
        let w = e.w.abs() / max_abs;
        hat[e.u * n + e.v] = w;
        hat[e.v * n + e.u] = w;
    }
    (0..n)
        .map(|i| {
            let d = degree[i];
            if d < 2.0 {
                return 0.0;
            }
            let mut sum = 0.0;
            for &(j, _) in g.neighbors(i) {
                for &(k, _) in g.neighbors(i) {
                    if j == k {
                        continue;
                    }
                    let triple = hat[i * n + j] * hat[j * n + k] * hat[k * n + i];
                    if triple > 0.0 {
                        sum += triple.cbrt();
                    }
                }
            }
            sum / (d * (d - 1.0))
        })
        .collect()
}

/// Power-iteration PageRank over absolute weights, damping 0.85, L1
/// tolerance 1e-9, capped at 200 iterations. Dangling mass (nodes with no
/// incident weight) is redistributed uniformly.
fn pagerank(g: &WeightedGraph) -> Vec<f64> {
    let n = g.num_nodes();
    let out_weight: Vec<f64> = (0..n)
        .map(|u| g.neighbors(u).iter().map(|&(_, w)| w.abs()).sum())
        .collect();
    let mut pr = vec![1.0 / n as f64; n];
    for _ in 0..PAGERANK_MAX_ITERS {
        let mut next = vec![(1.0 - PAGERANK_DAMPING) / n as f64; n];
        let mut dangling = 0.0;
        for u in 0..n {
            if out_weight[u] <= 0.0 {
                dangling += pr[u];
                continue;
            }
            for &(v, w) in g.neighbors(u) {
                next[v] += PAGERANK_DAMPING * pr[u] * w.abs() / out_weight[u];
            }
        }
        for x in next.iter_mut() {
            *x += PAGERANK_DAMPING * dangling / n as f64;
        }
        let delta: f64 = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pr = next;
        if delta < PAGERANK_TOL {
            break;
        }
    }
    pr
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, tie-break by node id for determinism
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Brandes betweenness with Dijkstra over |w| distance costs. Raw
/// unordered-pair counts, unnormalized.
pub fn betweenness_centrality(g: &WeightedGraph) -> Vec<f64> {
    let n = g.num_nodes();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        let mut sigma = vec![0.0f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut settled = vec![false; n];
        dist[s] = 0.0;
        sigma[s] = 1.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { dist: 0.0, node: s });
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            order.push(u);
            for &(v, w) in g.neighbors(u) {
                let nd = d + w.abs();
                if nd < dist[v] - 1e-14 {
                    dist[v] = nd;
                    sigma[v] = sigma[u];
                    preds[v] = vec![u];
                    heap.push(HeapEntry { dist: nd, node: v });
                } else if (nd - dist[v]).abs() <= 1e-14 && !settled[v] {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    // each unordered pair was counted from both endpoints
    for x in bc.iter_mut() {
        *x /= 2.0;
    }
    bc
}

/// Per-column standardization to zero mean, unit variance. Constant
/// columns become all-zero.
pub fn standardize_columns(raw: &[f64], num_nodes: usize) -> Vec<f64> {
    let n = num_nodes;
    let mut out = raw.to_vec();
    for c in 0..NUM_FEATURES {
        let mean = (0..n).map(|i| raw[i * NUM_FEATURES + c]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| {
                let d = raw[i * NUM_FEATURES + c] - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        if var < VARIANCE_GUARD {
            for i in 0..n {
                out[i * NUM_FEATURES + c] = 0.0;
            }
        } else {
            let std = var.sqrt();
            for i in 0..n {
                out[i * NUM_FEATURES + c] = (raw[i * NUM_FEATURES + c] - mean) / std;
            }
        }
    }
    out
}
