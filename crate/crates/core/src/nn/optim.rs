//! AdamW with decoupled weight decay and a reduce-on-plateau learning
//! rate schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tape::Matrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// AdamW optimizer state over a named parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub step_count: u64,
    moments: BTreeMap<String, (Matrix, Matrix)>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, weight_decay, step_count: 0, moments: BTreeMap::new() }
    }

    /// One update over all parameters. Decay is decoupled: applied to the
    /// parameter directly, not folded into the gradient.
    pub fn step(&mut self, params: &mut BTreeMap<String, Matrix>, grads: &BTreeMap<String, Matrix>) {
        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name).unwrap_or_else(|| panic!("missing gradient for {name:?}"));
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Matrix::zeros(p.rows, p.cols), Matrix::zeros(p.rows, p.cols)));
            for i in 0..p.data.len() {
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * g.data[i];
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * g.data[i] * g.data[i];
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                p.data[i] -= self.lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + self.weight_decay * p.data[i]);
            }
        }
    }
}

/// Reduce-on-plateau schedule over a minimized metric. When the metric
/// fails to improve the best seen value for more than `patience`
/// consecutive calls, the learning rate is multiplied by `factor`
/// (floored at `min_lr`) and the stale counter resets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauSchedule { factor, patience, min_lr, best: f64::INFINITY, stale: 0 }
    }

    /// Record a metric observation; returns the (possibly decayed) lr.
    pub fn step(&mut self, metric: f64, lr: f64) -> f64 {
        if metric < self.best - 1e-12 {
            self.best = metric;
            self.stale = 0;
            return lr;
        }
        self.stale += 1;
        if self.stale > self.patience {
            self.stale = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: f64) -> BTreeMap<String, Matrix> {
        let mut p = BTreeMap::new();
        p.insert("w".to_string(), Matrix::scalar(value));
        p
    }

    #[test]
    fn zero_gradient_zero_decay_keeps_params() {
        let mut params = single_param(1.25);
        let grads = single_param(0.0);
        let mut opt = AdamW::new(0.1, 0.0);
        for _ in 0..5 {
            opt.step(&mut params, &grads);
        }
        assert_eq!(params["w"].data[0], 1.25);
    }

    #[test]
    fn zero_lr_keeps_params() {
        let mut params = single_param(1.25);
        let grads = single_param(0.7);
        let mut opt = AdamW::new(0.0, 0.01);
        opt.step(&mut params, &grads);
        assert_eq!(params["w"].data[0], 1.25);
    }

    #[test]
    fn quadratic_descends_monotonically_after_warmup() {
        // f(w) = w^2, grad = 2w
        let mut params = single_param(3.0);
        let mut opt = AdamW::new(0.05, 0.0);
        let mut prev = f64::INFINITY;
        for step in 0..100 {
            let w = params["w"].data[0];
            let f = w * w;
            if step >= 5 {
                assert!(f <= prev + 1e-12, "step {step}: {f} > {prev}");
            }
            prev = f;
            let grads = single_param(2.0 * w);
            opt.step(&mut params, &grads);
        }
        assert!(params["w"].data[0].abs() < 0.5);
    }

    #[test]
    fn decoupled_decay_shrinks_without_gradient() {
        let mut params = single_param(1.0);
        let grads = single_param(0.0);
        let mut opt = AdamW::new(0.1, 0.5);
        opt.step(&mut params, &grads);
        assert!((params["w"].data[0] - (1.0 - 0.1 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn plateau_improving_stream_keeps_lr() {
        let mut sched = PlateauSchedule::new(0.5, 3, 1e-4);
        let mut lr = 1e-3;
        for i in 0..10 {
            lr = sched.step(1.0 / (i + 1) as f64, lr);
        }
        assert_eq!(lr, 1e-3);
    }

    #[test]
    fn plateau_four_stale_calls_one_decay() {
        let mut sched = PlateauSchedule::new(0.5, 3, 1e-6);
        let mut lr = 1e-3;
        lr = sched.step(1.0, lr); // sets best
        for _ in 0..4 {
            lr = sched.step(1.0, lr);
        }
        assert!((lr - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn plateau_respects_min_lr() {
        let mut sched = PlateauSchedule::new(0.1, 0, 1e-4);
        let mut lr = 1e-3;
        sched.step(1.0, lr);
        for _ in 0..10 {
            lr = sched.step(1.0, lr);
        }
        assert_eq!(lr, 1e-4);
    }
}
