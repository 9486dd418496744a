//! Offline training: MSE regression for the surrogate evaluator and
//! surrogate-ascent training of the generator against a frozen evaluator.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::nn::layers::accumulate_grads;
use crate::nn::tape::{Matrix, Tape};
use crate::nn::{AdamW, PlateauSchedule};
use crate::partition::PartitionMatrix;

use super::dataset::OfflineSample;
use super::evaluator::{angles_to_matrix, partition_to_matrix, EvaluatorNet};
use super::generator::{candidate_ks, features_matrix, GeneratorNet};

#[derive(Debug, Clone)]
pub struct EvalTrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for EvalTrainConfig {
    fn default() -> Self {
        EvalTrainConfig {
            batch: 32,
            lr: 1e-3,
            weight_decay: 5e-4,
            epochs: 100,
            plateau_factor: 0.5,
            plateau_patience: 3,
            min_lr: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenTrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub max_nodes: usize,
    pub seed: u64,
}

impl Default for GenTrainConfig {
    fn default() -> Self {
        GenTrainConfig {
            batch: 16,
            lr: 4e-3,
            weight_decay: 5e-4,
            epochs: 1500,
            plateau_factor: 0.8,
            plateau_patience: 100,
            min_lr: 1e-5,
            max_nodes: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    /// Training metric (MSE for the evaluator, mean rho-hat for the
    /// generator).
    pub train: f64,
    /// Validation metric where a holdout exists, else the training value.
    pub val: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_metric: f64,
}

/// Decoded (graph index, S, P, label) tuple ready for the evaluator.
struct PreparedSample {
    graph: usize,
    s: Matrix,
    p_mat: Matrix,
    rho: f64,
}

fn prepare_samples(
    graphs: &[(String, WeightedGraph)],
    samples: &[OfflineSample],
) -> Result<Vec<PreparedSample>> {
    let index: BTreeMap<&str, usize> =
        graphs.iter().enumerate().map(|(i, (name, _))| (name.as_str(), i)).collect();
    samples
        .iter()
        .map(|s| {
            let gi = *index
                .get(s.graph.as_str())
                .ok_or_else(|| Error::Model(format!("sample references unknown graph {:?}", s.graph)))?;
            let part = PartitionMatrix::new(s.assignment.clone(), s.capacity)?;
            Ok(PreparedSample {
                graph: gi,
                s: partition_to_matrix(&part),
                p_mat: angles_to_matrix(&s.angle_sets()?)?,
                rho: s.rho,
            })
        })
        .collect()
}

/// Mean squared prediction error of the evaluator over a sample set.
pub fn evaluator_dataset_mse(
    net: &EvaluatorNet,
    graphs: &[(String, WeightedGraph)],
    samples: &[OfflineSample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Model("empty sample set".into()));
    }
    let prepared = prepare_samples(graphs, samples)?;
    let mut total = 0.0;
    for s in &prepared {
        let rho_hat = net.predict(&graphs[s.graph].1, &s.s, &s.p_mat)?;
        total += (rho_hat - s.rho).powi(2);
    }
    Ok(total / prepared.len() as f64)
}

/// MSE training with per-sample gradient accumulation to the configured
/// batch size, plateau LR decay on validation MSE, best checkpoint kept.
pub fn train_evaluator(
    net: &mut EvaluatorNet,
    graphs: &[(String, WeightedGraph)],
    samples: &[OfflineSample],
    cfg: &EvalTrainConfig,
) -> Result<TrainLog> {
    if samples.is_empty() {
        return Err(Error::Model("training dataset is empty".into()));
    }
    let prepared = prepare_samples(graphs, samples)?;
    let features: Vec<Matrix> = graphs.iter().map(|(_, g)| features_matrix(g)).collect::<Result<_>>()?;

    // deterministic holdout: ~10% once the set is big enough
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.shuffle(&mut rng);
    let val_count = if prepared.len() >= 10 { prepared.len() / 10 } else { 0 };
    let (val_idx, train_idx) = order.split_at(val_count);
    let train_idx: Vec<usize> = train_idx.to_vec();
    let val_idx: Vec<usize> = val_idx.to_vec();

    let mut optimizer = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut schedule = PlateauSchedule::new(cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    let mut log = TrainLog { epochs: Vec::new(), best_epoch: 0, best_metric: f64::INFINITY };
    let mut best_params = net.store.params.clone();

    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut grads = net.store.zero_grads();
            let scale = 1.0 / chunk.len() as f64;
            for &si in chunk {
                let s = &prepared[si];
                let g = &graphs[s.graph].1;
                let mut tape = Tape::new();
                let ids = net.store.leaves(&mut tape);
                let s_id = tape.leaf(s.s.clone());
                let p_id = tape.leaf(s.p_mat.clone());
                let out = net.forward(&mut tape, &ids, g, &features[s.graph], s_id, p_id)?;
                let diff = tape.add_scalar(out, -s.rho);
                let sq = tape.mul(diff, diff);
                let loss = tape.scale(sq, scale);
                train_sum += tape.value(sq).data[0];
                let tape_grads = tape.backward(loss);
                accumulate_grads(&mut grads, &ids, &tape_grads);
            }
            optimizer.step(&mut net.store.params, &grads);
        }
        let train_mse = train_sum / train_idx.len() as f64;
        let val_mse = if val_idx.is_empty() {
            train_mse
        } else {
            let mut total = 0.0;
            for &i in &val_idx {
                let s = &prepared[i];
                let rho_hat = net.predict(&graphs[s.graph].1, &s.s, &s.p_mat)?;
                total += (rho_hat - s.rho).powi(2);
            }
            total / val_idx.len() as f64
        };
        optimizer.lr = schedule.step(val_mse, optimizer.lr);
        if val_mse < log.best_metric {
            log.best_metric = val_mse;
            log.best_epoch = epoch;
            best_params = net.store.params.clone();
        }
        log.epochs.push(EpochStats { epoch, train: train_mse, val: val_mse, lr: optimizer.lr });
    }
    net.store.params = best_params;
    Ok(log)
}

/// One generator forward + frozen-evaluator score on a shared tape.
/// Returns the rho-hat node id; only generator leaves receive updates.
fn generator_score(
    tape: &mut Tape,
    gen: &GeneratorNet,
    evaluator: &EvaluatorNet,
    gen_ids: &BTreeMap<String, crate::nn::Id>,
    eval_ids: &BTreeMap<String, crate::nn::Id>,
    g: &WeightedGraph,
    x: &Matrix,
    max_nodes: usize,
    rng: &mut ChaCha20Rng,
) -> Result<crate::nn::Id> {
    let c_max = max_nodes.min(g.num_nodes());
    // sample across the inference-time candidate range so the net learns
    // finer splits too, not just the coarsest feasible one
    let candidates = candidate_ks(g.num_nodes(), c_max)?;
    let k = candidates[rng.gen_range(0..candidates.len())];
    let fwd = gen.forward(tape, gen_ids, g, x, k, c_max)?;
    evaluator.forward(tape, eval_ids, g, x, fwd.s_ste, fwd.p_out)
}

/// Surrogate ascent: maximize mean rho-hat of generated configurations
/// under the frozen evaluator. Only generator parameters move.
pub fn train_generator(
    gen: &mut GeneratorNet,
    evaluator: &EvaluatorNet,
    graphs: &[(String, WeightedGraph)],
    cfg: &GenTrainConfig,
) -> Result<TrainLog> {
    if graphs.is_empty() {
        return Err(Error::Model("no training graphs".into()));
    }
    if evaluator.p != gen.p {
        return Err(Error::Model(format!("depth mismatch: evaluator p={}, generator p={}", evaluator.p, gen.p)));
    }
    let features: Vec<Matrix> = graphs.iter().map(|(_, g)| features_matrix(g)).collect::<Result<_>>()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut optimizer = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut schedule = PlateauSchedule::new(cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    let mut log = TrainLog { epochs: Vec::new(), best_epoch: 0, best_metric: f64::NEG_INFINITY };
    let mut best_params = gen.store.params.clone();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..graphs.len()).collect();
        order.shuffle(&mut rng);
        let mut rho_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut grads = gen.store.zero_grads();
            let scale = -1.0 / chunk.len() as f64; // ascent via negated loss
            for &gi in chunk {
                let g = &graphs[gi].1;
                let mut tape = Tape::new();
                let gen_ids = gen.store.leaves(&mut tape);
                let eval_ids = evaluator.store.leaves(&mut tape);
                let rho_hat = generator_score(
                    &mut tape,
                    gen,
                    evaluator,
                    &gen_ids,
                    &eval_ids,
                    g,
                    &features[gi],
                    cfg.max_nodes,
                    &mut rng,
                )?;
                rho_sum += tape.value(rho_hat).data[0];
                let loss = tape.scale(rho_hat, scale);
                let tape_grads = tape.backward(loss);
                accumulate_grads(&mut grads, &gen_ids, &tape_grads);
            }
            optimizer.step(&mut gen.store.params, &grads);
        }
        let mean_rho = rho_sum / graphs.len() as f64;
        optimizer.lr = schedule.step(-mean_rho, optimizer.lr);
        if mean_rho > log.best_metric {
            log.best_metric = mean_rho;
            log.best_epoch = epoch;
            best_params = gen.store.params.clone();
        }
        log.epochs.push(EpochStats { epoch, train: mean_rho, val: mean_rho, lr: optimizer.lr });
    }
    gen.store.params = best_params;
    Ok(log)
}
