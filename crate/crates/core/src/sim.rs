//! Dense statevector simulation of depth-p QAOA circuits: exact
//! expectation, adjoint-style reverse-sweep gradients, gradient-ascent
//! parameter optimization, bitstring sampling and readout noise.
//!
//! Qubit i of basis index b is bit i; bit 0 encodes spin +1, bit 1 spin -1.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SpinAssignment, WeightedGraph};

pub const DEFAULT_QUBIT_CAP: usize = 16;
pub const DEFAULT_OPT_STEPS: usize = 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_SHOTS: usize = 1000;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Complex amplitudes over 2^m basis states, unit L2 norm.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub num_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Variational angles for a depth-p circuit, stored reduced into [0, 2pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaAngles {
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl QaoaAngles {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != beta.len() {
            return Err(Error::Sim("gamma and beta must have equal length p >= 1".into()));
        }
        Ok(QaoaAngles {
            gamma: gamma.into_iter().map(reduce_angle).collect(),
            beta: beta.into_iter().map(reduce_angle).collect(),
        })
    }

    pub fn zeros(p: usize) -> Self {
        QaoaAngles { gamma: vec![0.0; p], beta: vec![0.0; p] }
    }

    pub fn random(p: usize, rng: &mut impl Rng) -> Self {
        QaoaAngles {
            gamma: (0..p).map(|_| rng.gen_range(0.0..TAU)).collect(),
            beta: (0..p).map(|_| rng.gen_range(0.0..TAU)).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Noise configuration: optional shot-based expectation estimation during
/// optimization, and a readout bit-phase flip probability applied at
/// sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    pub shots: Option<usize>,
    pub readout_bitphase_p: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.readout_bitphase_p) {
            return Err(Error::Sim("readout probability must lie in [0,1]".into()));
        }
        Ok(())
    }
}

/// Uniform superposition |+>^m.
pub fn init_plus_state(m: usize, cap: usize) -> Result<StateVector> {
    if m == 0 || m > cap {
        return Err(Error::Sim(format!("qubit count {m} outside 1..={cap}")));
    }
    let dim = 1usize << m;
    let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    Ok(StateVector { num_qubits: m, amplitudes: vec![amp; dim] })
}

/// Per-basis-state cost values H_C(z).
pub fn cost_diagonal(g: &WeightedGraph) -> Vec<f64> {
    let n = g.num_nodes();
    let dim = 1usize << n;
    let mut h = vec![0.0; dim];
    for e in g.edges() {
        let mask_u = 1usize << e.u;
        let mask_v = 1usize << e.v;
        for (b, hb) in h.iter_mut().enumerate() {
            if ((b & mask_u) == 0) != ((b & mask_v) == 0) {
                *hb += e.w;
            }
        }
    }
    h
}

/// Diagonal phase layer exp(-i gamma H_C).
pub fn apply_cost_layer(state: &mut StateVector, cost_diag: &[f64], gamma: f64) {
    for (a, &h) in state.amplitudes.iter_mut().zip(cost_diag) {
        let phase = Complex64::from_polar(1.0, -gamma * h);
        *a *= phase;
    }
}

/// Mixer layer: Rx(2 beta) on every qubit.
pub fn apply_mixer_layer(state: &mut StateVector, beta: f64) {
    let (c, s) = (beta.cos(), beta.sin());
    let m = state.num_qubits;
    let amps = &mut state.amplitudes;
    for q in 0..m {
        let bit = 1usize << q;
        for b in 0..amps.len() {
            if b & bit == 0 {
                let a0 = amps[b];
                let a1 = amps[b | bit];
                amps[b] = a0 * c - Complex64::i() * s * a1;
                amps[b | bit] = a1 * c - Complex64::i() * s * a0;
            }
        }
    }
}

/// Apply sum_j X_j to a state (used by the mixer gradient).
fn apply_x_sum(state: &StateVector) -> Vec<Complex64> {
    let m = state.num_qubits;
    let mut out = vec![Complex64::default(); state.amplitudes.len()];
    for q in 0..m {
        let bit = 1usize << q;
        for (b, amp) in state.amplitudes.iter().enumerate() {
            out[b ^ bit] += amp;
        }
    }
    out
}

fn run_circuit(g: &WeightedGraph, angles: &QaoaAngles, cap: usize) -> Result<(StateVector, Vec<f64>)> {
    let m = g.num_nodes();
    let mut state = init_plus_state(m, cap)?;
    let h = cost_diagonal(g);
    for l in 0..angles.depth() {
        apply_cost_layer(&mut state, &h, angles.gamma[l]);
        apply_mixer_layer(&mut state, angles.beta[l]);
    }
    Ok((state, h))
}

/// <psi| H_C |psi> from the exact final statevector.
pub fn qaoa_expectation(g: &WeightedGraph, angles: &QaoaAngles, cap: usize) -> Result<f64> {
    let (state, h) = run_circuit(g, angles, cap)?;
    Ok(state
        .amplitudes
        .iter()
        .zip(&h)
        .map(|(a, &hb)| a.norm_sqr() * hb)
        .sum())
}

/// Exact gradient of the expectation via an adjoint-style reverse sweep.
/// Returns (d/dgamma, d/dbeta).
pub fn qaoa_gradient(g: &WeightedGraph, angles: &QaoaAngles, cap: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = angles.depth();
    let (final_state, h) = run_circuit(g, angles, cap)?;
    let mut psi = final_state.clone();
    // lambda = H |psi>
    let mut lam = StateVector {
        num_qubits: psi.num_qubits,
        amplitudes: psi
            .amplitudes
            .iter()
            .zip(&h)
            .map(|(a, &hb)| a * hb)
            .collect(),
    };
    let mut dgamma = vec![0.0; p];
    let mut dbeta = vec![0.0; p];
    for l in (0..p).rev() {
        // beta_l: psi currently holds the state after layer l's mixer.
        // dU_B/dbeta |prev> = -i (sum_j X_j) |after>, so the gradient is
        // 2 Re <lam| -i X_sum |psi>.
        let x_psi = apply_x_sum(&psi);
        let mut acc = Complex64::default();
        for (lb, xp) in lam.amplitudes.iter().zip(&x_psi) {
            acc += lb.conj() * (-Complex64::i()) * xp;
        }
        dbeta[l] = 2.0 * acc.re;
        // undo mixer on both vectors
        apply_mixer_layer(&mut psi, -angles.beta[l]);
        apply_mixer_layer(&mut lam, -angles.beta[l]);
        // gamma_l: psi now holds the state after layer l's cost phase.
        let mut acc = Complex64::default();
        for ((lb, pb), &hb) in lam.amplitudes.iter().zip(&psi.amplitudes).zip(&h) {
            acc += lb.conj() * (-Complex64::i() * hb) * pb;
        }
        dgamma[l] = 2.0 * acc.re;
        apply_cost_layer(&mut psi, &h, -angles.gamma[l]);
        apply_cost_layer(&mut lam, &h, -angles.gamma[l]);
    }
    Ok((dgamma, dbeta))
}

/// Shot-based expectation estimate: empirical mean of H_C over sampled
/// bitstrings.
pub fn shot_expectation(
    g: &WeightedGraph,
    angles: &QaoaAngles,
    shots: usize,
    cap: usize,
    rng: &mut ChaCha20Rng,
) -> Result<f64> {
    let (state, h) = run_circuit(g, angles, cap)?;
    let cdf = cumulative_probs(&state);
    let mut total = 0.0;
    for _ in 0..shots {
        let b = sample_index(&cdf, rng);
        total += h[b];
    }
    Ok(total / shots as f64)
}

/// Gradient-ascent optimization of the angles. Noiseless runs use the
/// exact adjoint gradient; with `noise.shots` set, gradients are central
/// finite differences of the shot-based estimator.
pub fn optimize_angles(
    g: &WeightedGraph,
    init: &QaoaAngles,
    steps: usize,
    lr: f64,
    noise: &NoiseSpec,
    cap: usize,
    seed: u64,
) -> Result<QaoaAngles> {
    noise.validate()?;
    let p = init.depth();
    // updates run on unwrapped angles, reduced once at the end
    let mut gamma = init.gamma.clone();
    let mut beta = init.beta.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..steps {
        let current = QaoaAngles { gamma: gamma.iter().map(|&x| reduce_angle(x)).collect(), beta: beta.iter().map(|&x| reduce_angle(x)).collect() };
        let (dg, db) = match noise.shots {
            None => qaoa_gradient(g, &current, cap)?,
            Some(shots) => shot_gradient(g, &current, shots, cap, &mut rng)?,
        };
        for l in 0..p {
            gamma[l] += lr * dg[l];
            beta[l] += lr * db[l];
        }
    }
    QaoaAngles::new(gamma, beta)
}

const SHOT_FD_STEP: f64 = 0.05;

fn shot_gradient(
    g: &WeightedGraph,
    angles: &QaoaAngles,
    shots: usize,
    cap: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = angles.depth();
    let mut dgamma = vec![0.0; p];
    let mut dbeta = vec![0.0; p];
    let estimate = |gamma: Vec<f64>, beta: Vec<f64>, rng: &mut ChaCha20Rng| -> Result<f64> {
        shot_expectation(g, &QaoaAngles::new(gamma, beta)?, shots, cap, rng)
    };
    for l in 0..p {
        let mut gp = angles.gamma.clone();
        let mut gm = angles.gamma.clone();
        gp[l] += SHOT_FD_STEP;
        gm[l] -= SHOT_FD_STEP;
        let plus = estimate(gp, angles.beta.clone(), rng)?;
        let minus = estimate(gm, angles.beta.clone(), rng)?;
        dgamma[l] = (plus - minus) / (2.0 * SHOT_FD_STEP);
        let mut bp = angles.beta.clone();
        let mut bm = angles.beta.clone();
        bp[l] += SHOT_FD_STEP;
        bm[l] -= SHOT_FD_STEP;
        let plus = estimate(angles.gamma.clone(), bp, rng)?;
        let minus = estimate(angles.gamma.clone(), bm, rng)?;
        dbeta[l] = (plus - minus) / (2.0 * SHOT_FD_STEP);
    }
    Ok((dgamma, dbeta))
}

fn cumulative_probs(state: &StateVector) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(state.amplitudes.len());
    let mut acc = 0.0;
    for a in &state.amplitudes {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    // guard against rounding drift at the tail
    if let Some(last) = cdf.last_mut() {
        *last = last.max(1.0);
    }
    cdf
}

fn sample_index(cdf: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let r: f64 = rng.gen();
    cdf.partition_point(|&c| c < r).min(cdf.len() - 1)
}

/// Sample measured bitstrings from |psi|^2. Bit-phase readout flips hit
/// each bit independently with probability `readout_p` (only the bit-flip
/// component is observable in the computational basis).
pub fn sample_bitstrings(
    g: &WeightedGraph,
    angles: &QaoaAngles,
    shots: usize,
    readout_p: f64,
    cap: usize,
    seed: u64,
) -> Result<Vec<SpinAssignment>> {
    if shots == 0 {
        return Err(Error::Sim("shots must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&readout_p) {
        return Err(Error::Sim("readout probability must lie in [0,1]".into()));
    }
    let (state, _) = run_circuit(g, angles, cap)?;
    let cdf = cumulative_probs(&state);
    let m = g.num_nodes();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(shots);
    for _ in 0..shots {
        let mut b = sample_index(&cdf, &mut rng);
        if readout_p > 0.0 {
            for q in 0..m {
                if rng.gen_bool(readout_p) {
                    b ^= 1usize << q;
                }
            }
        }
        let bits: Vec<u8> = (0..m).map(|q| ((b >> q) & 1) as u8).collect();
        out.push(SpinAssignment::from_bits(&bits));
    }
    Ok(out)
}

/// Linear-interpolation expansion from depth p to p+1.
pub fn interp_expand(angles: &QaoaAngles, target_p: usize) -> Result<QaoaAngles> {
    let p = angles.depth();
    if target_p != p + 1 {
        return Err(Error::Sim(format!("interp expansion requires target_p = p+1, got p={p}, target={target_p}")));
    }
    let expand = |a: &[f64]| -> Vec<f64> {
        // a'_i = ((i-1)/p) a_{i-1} + ((p-i+1)/p) a_i, 1-indexed, with
        // a_0 = a_{p+1} = 0.
        (1..=p + 1)
            .map(|i| {
                let left = if i >= 2 { ((i - 1) as f64 / p as f64) * a[i - 2] } else { 0.0 };
                let right = if i <= p { ((p - i + 1) as f64 / p as f64) * a[i - 1] } else { 0.0 };
                left + right
            })
            .collect()
    };
    QaoaAngles::new(expand(&angles.gamma), expand(&angles.beta))
}

/// Repeated single-step expansion up to an arbitrary target depth.
pub fn interp_expand_to(angles: &QaoaAngles, target_p: usize) -> Result<QaoaAngles> {
    if target_p <= angles.depth() {
        return Err(Error::Sim("target depth must exceed current depth".into()));
    }
    let mut a = angles.clone();
    while a.depth() < target_p {
        let next = a.depth() + 1;
        a = interp_expand(&a, next)?;
    }
    Ok(a)
}

#[cfg(test)]
pub mod dense_oracle {
    //! Dense-matrix reference: explicit 2^m x 2^m unitaries for the full
    //! circuit, kept independent of the streaming statevector path.

    use super::*;

    pub type Matrix = Vec<Vec<Complex64>>;

    fn matvec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn kron(a: &Matrix, b: &Matrix) -> Matrix {
        let (ra, ca) = (a.len(), a[0].len());
        let (rb, cb) = (b.len(), b[0].len());
        let mut out = vec![vec![Complex64::default(); ca * cb]; ra * rb];
        for i in 0..ra {
            for j in 0..ca {
                for k in 0..rb {
                    for l in 0..cb {
                        out[k * ra + i][l * ca + j] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn rx(theta: f64) -> Matrix {
        let c = Complex64::new((theta / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, -(theta / 2.0).sin());
        vec![vec![c, s], vec![s, c]]
    }

    pub fn mixer_matrix(m: usize, beta: f64) -> Matrix {
        let single = rx(2.0 * beta);
        let mut out = single.clone();
        for _ in 1..m {
            out = kron(&out, &single);
        }
        out
    }

    pub fn dense_expectation(g: &WeightedGraph, angles: &QaoaAngles) -> f64 {
        let m = g.num_nodes();
        let dim = 1usize << m;
        let h = cost_diagonal(g);
        let mut v = vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim];
        for l in 0..angles.depth() {
            // diagonal cost unitary
            for (b, amp) in v.iter_mut().enumerate() {
                *amp *= Complex64::from_polar(1.0, -angles.gamma()[l] * h[b]);
            }
            let um = mixer_matrix(m, angles.beta()[l]);
            v = matvec(&um, &v);
        }
        v.iter().zip(&h).map(|(a, &hb)| a.norm_sqr() * hb).sum()
    }

    pub fn dense_final_state(g: &WeightedGraph, angles: &QaoaAngles) -> Vec<Complex64> {
        let m = g.num_nodes();
        let dim = 1usize << m;
        let h = cost_diagonal(g);
        let mut v = vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim];
        for l in 0..angles.depth() {
            for (b, amp) in v.iter_mut().enumerate() {
                *amp *= Complex64::from_polar(1.0, -angles.gamma()[l] * h[b]);
            }
            let um = mixer_matrix(m, angles.beta()[l]);
            v = matvec(&um, &v);
        }
        v
    }
}
