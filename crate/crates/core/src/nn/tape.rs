//! Minimal reverse-mode automatic differentiation over dense f64
//! matrices. A tape records one forward pass as a list of nodes; the
//! backward sweep walks it in reverse and accumulates exact gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix. Also usable as a plain math type outside the
/// tape (constants, checkpoints, QR inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn scalar(x: f64) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.cols + j] = x;
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Id(pub usize);

/// Recorded operation (parents by id plus any captured constants). Some
/// captured values are forward-only (e.g. the AddScalar shift) but kept
/// for debuggability.
#[allow(dead_code)]
enum Op {
    Leaf,
    Add(Id, Id),
    Sub(Id, Id),
    Mul(Id, Id),
    Scale(Id, f64),
    AddScalar(Id, f64),
    /// broadcast a 1 x c row vector over every row of a
    AddRowVec(Id, Id),
    MatMul(Id, Id),
    Transpose(Id),
    Relu(Id),
    LeakyRelu(Id, f64),
    Sigmoid(Id),
    Sin(Id),
    Cos(Id),
    /// exact reduction into [0, 2pi); piecewise identity backward
    ModTau(Id),
    /// elementwise atan2(y, x) mapped into [0, 2pi)
    Atan2 { y: Id, x: Id },
    /// row softmax of a / tau over entries where mask != 0; inactive
    /// entries output 0
    SoftmaxRowsMasked { a: Id, mask: Matrix, tau: f64 },
    ConcatCols(Vec<Id>),
    /// column-wise mean over all rows -> 1 x c
    MeanRows(Id),
    /// mean over rows per segment label -> k x c (every segment non-empty)
    SegmentMeanRows { a: Id, segments: Vec<usize>, k: usize },
    /// pairwise attention logits: out_ij = sum_d att_d * lrelu(s_id + t_jd)
    PairLeakyDot { s: Id, t: Id, att: Id, slope: f64 },
    /// forward: the substituted hard value; backward: identity to `soft`
    /// (straight-through estimator)
    HardSubstitute { soft: Id },
    StopGradient(Id),
    MeanAll(Id),
    SumAll(Id),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// One forward pass worth of computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn lrelu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn lrelu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Id {
        assert!(value.is_finite(), "non-finite value produced on tape");
        self.nodes.push(Node { value, op });
        Id(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Id {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: Id) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn binary_shapes(&self, a: Id, b: Id) {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "elementwise shape mismatch");
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        self.binary_shapes(a, b);
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Id, b: Id) -> Id {
        self.binary_shapes(a, b);
        let (va, vb) = (self.value(a), self.value(b));
        let v = Matrix {
            rows: va.rows,
            cols: va.cols,
            data: va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect(),
        };
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Id, b: Id) -> Id {
        self.binary_shapes(a, b);
        let (va, vb) = (self.value(a), self.value(b));
        let v = Matrix {
            rows: va.rows,
            cols: va.cols,
            data: va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect(),
        };
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Id, f: f64) -> Id {
        let v = self.value(a).map(|x| x * f);
        self.push(v, Op::Scale(a, f))
    }

    pub fn add_scalar(&mut self, a: Id, f: f64) -> Id {
        let v = self.value(a).map(|x| x + f);
        self.push(v, Op::AddScalar(a, f))
    }

    pub fn add_row_vec(&mut self, a: Id, row: Id) -> Id {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows, 1, "bias must be a row vector");
        assert_eq!(va.cols, vr.cols, "bias width mismatch");
        let mut v = va.clone();
        for i in 0..v.rows {
            for j in 0..v.cols {
                v.data[i * v.cols + j] += vr.data[j];
            }
        }
        self.push(v, Op::AddRowVec(a, row))
    }

    pub fn matmul(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Id) -> Id {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Id) -> Id {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Id, slope: f64) -> Id {
        let v = self.value(a).map(|x| lrelu(x, slope));
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Id) -> Id {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn sin(&mut self, a: Id) -> Id {
        let v = self.value(a).map(f64::sin);
        self.push(v, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Id) -> Id {
        let v = self.value(a).map(f64::cos);
        self.push(v, Op::Cos(a))
    }

    /// Elementwise reduction into [0, 2pi). fmod-based, so already-reduced
    /// inputs pass through bit-exactly; the backward is the identity (the
    /// reduction is piecewise x - 2pi*n).
    pub fn mod_tau(&mut self, a: Id) -> Id {
        let v = self.value(a).map(|x| {
            let r = x.rem_euclid(std::f64::consts::TAU);
            if r >= std::f64::consts::TAU {
                0.0
            } else {
                r
            }
        });
        self.push(v, Op::ModTau(a))
    }

    /// Elementwise atan2(y, x) shifted into [0, 2pi).
    pub fn atan2(&mut self, y: Id, x: Id) -> Id {
        self.binary_shapes(y, x);
        let (vy, vx) = (self.value(y), self.value(x));
        let v = Matrix {
            rows: vy.rows,
            cols: vy.cols,
            data: vy
                .data
                .iter()
                .zip(&vx.data)
                .map(|(&yy, &xx)| {
                    let a = yy.atan2(xx);
                    if a < 0.0 {
                        a + std::f64::consts::TAU
                    } else {
                        a
                    }
                })
                .collect(),
        };
        self.push(v, Op::Atan2 { y, x })
    }

    /// Row-wise temperature softmax restricted to entries where `mask` is
    /// nonzero; masked-out entries produce 0. Rows with no active entries
    /// are all-zero.
    pub fn softmax_rows_masked(&mut self, a: Id, mask: &Matrix, tau: f64) -> Id {
        let va = self.value(a);
        assert_eq!(va.shape(), mask.shape(), "softmax mask shape mismatch");
        assert!(tau > 0.0, "softmax temperature must be positive");
        let mut v = Matrix::zeros(va.rows, va.cols);
        for i in 0..va.rows {
            let active: Vec<usize> = (0..va.cols).filter(|&j| mask.get(i, j) != 0.0).collect();
            if active.is_empty() {
                continue;
            }
            let max = active.iter().map(|&j| va.get(i, j) / tau).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for &j in &active {
                let e = ((va.get(i, j) / tau) - max).exp();
                v.set(i, j, e);
                total += e;
            }
            for &j in &active {
                v.set(i, j, v.get(i, j) / total);
            }
        }
        self.push(v, Op::SoftmaxRowsMasked { a, mask: mask.clone(), tau })
    }

    pub fn softmax_rows(&mut self, a: Id, tau: f64) -> Id {
        let (r, c) = self.value(a).shape();
        let ones = Matrix { rows: r, cols: c, data: vec![1.0; r * c] };
        self.softmax_rows_masked(a, &ones, tau)
    }

    pub fn concat_cols(&mut self, parts: &[Id]) -> Id {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows, rows, "concat row mismatch");
            for i in 0..rows {
                for j in 0..vp.cols {
                    v.set(i, offset + j, vp.get(i, j));
                }
            }
            offset += vp.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Column-wise mean over all rows (global mean pool) -> 1 x c.
    pub fn mean_rows(&mut self, a: Id) -> Id {
        let va = self.value(a);
        let mut v = Matrix::zeros(1, va.cols);
        for i in 0..va.rows {
            for j in 0..va.cols {
                v.data[j] += va.get(i, j);
            }
        }
        for x in v.data.iter_mut() {
            *x /= va.rows as f64;
        }
        self.push(v, Op::MeanRows(a))
    }

    /// Mean over rows with the same segment label -> k x c. Every label in
    /// 0..k must appear at least once.
    pub fn segment_mean_rows(&mut self, a: Id, segments: &[usize], k: usize) -> Id {
        let va = self.value(a);
        assert_eq!(segments.len(), va.rows, "segment labels per row");
        let mut counts = vec![0usize; k];
        let mut v = Matrix::zeros(k, va.cols);
        for (i, &s) in segments.iter().enumerate() {
            assert!(s < k, "segment label out of range");
            counts[s] += 1;
            for j in 0..va.cols {
                v.data[s * va.cols + j] += va.get(i, j);
            }
        }
        for (s, &cnt) in counts.iter().enumerate() {
            assert!(cnt > 0, "empty segment {s}");
            for j in 0..va.cols {
                v.data[s * va.cols + j] /= cnt as f64;
            }
        }
        self.push(v, Op::SegmentMeanRows { a, segments: segments.to_vec(), k })
    }

    /// GATv2 logits: out_ij = sum_d att_d * leaky_relu(s_id + t_jd, slope).
    /// `att` is a 1 x h row vector.
    pub fn pair_leaky_dot(&mut self, s: Id, t: Id, att: Id, slope: f64) -> Id {
        let (vs, vt, va) = (self.value(s), self.value(t), self.value(att));
        assert_eq!(vs.cols, vt.cols, "pairwise feature width mismatch");
        assert_eq!(va.rows, 1, "attention vector must be 1 x h");
        assert_eq!(va.cols, vs.cols, "attention width mismatch");
        let (n, m, h) = (vs.rows, vt.rows, vs.cols);
        let mut v = Matrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let mut acc = 0.0;
                for d in 0..h {
                    acc += va.data[d] * lrelu(vs.get(i, d) + vt.get(j, d), slope);
                }
                v.set(i, j, acc);
            }
        }
        self.push(v, Op::PairLeakyDot { s, t, att, slope })
    }

    /// Straight-through estimator: forward emits `hard`, backward passes
    /// the upstream gradient to `soft` unchanged.
    pub fn hard_substitute(&mut self, soft: Id, hard: Matrix) -> Id {
        assert_eq!(self.value(soft).shape(), hard.shape(), "STE shape mismatch");
        self.push(hard, Op::HardSubstitute { soft })
    }

    pub fn stop_gradient(&mut self, a: Id) -> Id {
        let v = self.value(a).clone();
        self.push(v, Op::StopGradient(a))
    }

    pub fn mean_all(&mut self, a: Id) -> Id {
        let va = self.value(a);
        let v = Matrix::scalar(va.data.iter().sum::<f64>() / va.data.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    pub fn sum_all(&mut self, a: Id) -> Id {
        let v = Matrix::scalar(self.value(a).data.iter().sum());
        self.push(v, Op::SumAll(a))
    }

    /// Reverse sweep from a scalar root. Returns one gradient matrix per
    /// node (same order as creation).
    pub fn backward(&self, root: Id) -> Vec<Matrix> {
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows, n.value.cols))
            .collect();
        grads[root.0].data[0] = 1.0;
        for idx in (0..=root.0).rev() {
            let up = grads[idx].clone();
            if up.data.iter().all(|&x| x == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    grads[a.0].add_assign(&up);
                    grads[b.0].add_assign(&up);
                }
                Op::Sub(a, b) => {
                    grads[a.0].add_assign(&up);
                    let neg = up.map(|x| -x);
                    grads[b.0].add_assign(&neg);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&vb.data).map(|(u, y)| u * y).collect() };
                    let gb = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&va.data).map(|(u, x)| u * x).collect() };
                    grads[a.0].add_assign(&ga);
                    grads[b.0].add_assign(&gb);
                }
                Op::Scale(a, f) => {
                    let g = up.map(|x| x * f);
                    grads[a.0].add_assign(&g);
                }
                Op::AddScalar(a, _) => grads[a.0].add_assign(&up),
                Op::AddRowVec(a, row) => {
                    grads[a.0].add_assign(&up);
                    let mut g = Matrix::zeros(1, up.cols);
                    for i in 0..up.rows {
                        for j in 0..up.cols {
                            g.data[j] += up.get(i, j);
                        }
                    }
                    grads[row.0].add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = up.matmul(&vb.transpose());
                    let gb = va.transpose().matmul(&up);
                    grads[a.0].add_assign(&ga);
                    grads[b.0].add_assign(&gb);
                }
                Op::Transpose(a) => {
                    let g = up.transpose();
                    grads[a.0].add_assign(&g);
                }
                Op::Relu(a) => {
                    let va = &self.nodes[a.0].value;
                    let g = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&va.data).map(|(u, x)| if *x > 0.0 { *u } else { 0.0 }).collect() };
                    grads[a.0].add_assign(&g);
                }
                Op::LeakyRelu(a, slope) => {
                    let va = &self.nodes[a.0].value;
                    let g = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&va.data).map(|(u, x)| u * lrelu_grad(*x, *slope)).collect() };
                    grads[a.0].add_assign(&g);
                }
                Op::Sigmoid(a) => {
                    let vy = &self.nodes[idx].value;
                    let g = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&vy.data).map(|(u, y)| u * y * (1.0 - y)).collect() };
                    grads[a.0].add_assign(&g);
                }
                Op::Sin(a) => {
                    let va = &self.nodes[a.0].value;
                    let g = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&va.data).map(|(u, x)| u * x.cos()).collect() };
                    grads[a.0].add_assign(&g);
                }
                Op::ModTau(a) => grads[a.0].add_assign(&up),
                Op::Cos(a) => {
                    let va = &self.nodes[a.0].value;
                    let g = Matrix { rows: up.rows, cols: up.cols, data: up.data.iter().zip(&va.data).map(|(u, x)| -u * x.sin()).collect() };
                    grads[a.0].add_assign(&g);
                }
                Op::Atan2 { y, x } => {
                    let (vy, vx) = (&self.nodes[y.0].value, &self.nodes[x.0].value);
                    let mut gy = Matrix::zeros(up.rows, up.cols);
                    let mut gx = Matrix::zeros(up.rows, up.cols);
                    for i in 0..up.data.len() {
                        let denom = vx.data[i] * vx.data[i] + vy.data[i] * vy.data[i];
                        if denom > 0.0 {
                            gy.data[i] = up.data[i] * vx.data[i] / denom;
                            gx.data[i] = -up.data[i] * vy.data[i] / denom;
                        }
                    }
                    grads[y.0].add_assign(&gy);
                    grads[x.0].add_assign(&gx);
                }
                Op::SoftmaxRowsMasked { a, mask, tau } => {
                    let vy = &self.nodes[idx].value;
                    let mut g = Matrix::zeros(up.rows, up.cols);
                    for i in 0..up.rows {
                        let mut dot = 0.0;
                        for j in 0..up.cols {
                            if mask.get(i, j) != 0.0 {
                                dot += up.get(i, j) * vy.get(i, j);
                            }
                        }
                        for j in 0..up.cols {
                            if mask.get(i, j) != 0.0 {
                                g.set(i, j, vy.get(i, j) * (up.get(i, j) - dot) / tau);
                            }
                        }
                    }
                    grads[a.0].add_assign(&g);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.nodes[p.0].value.cols;
                        let mut g = Matrix::zeros(up.rows, cols);
                        for i in 0..up.rows {
                            for j in 0..cols {
                                g.set(i, j, up.get(i, offset + j));
                            }
                        }
                        grads[p.0].add_assign(&g);
                        offset += cols;
                    }
                }
                Op::MeanRows(a) => {
                    let rows = self.nodes[a.0].value.rows;
                    let mut g = Matrix::zeros(rows, up.cols);
                    for i in 0..rows {
                        for j in 0..up.cols {
                            g.set(i, j, up.data[j] / rows as f64);
                        }
                    }
                    grads[a.0].add_assign(&g);
                }
                Op::SegmentMeanRows { a, segments, k } => {
                    let mut counts = vec![0usize; *k];
                    for &s in segments {
                        counts[s] += 1;
                    }
                    let cols = up.cols;
                    let rows = self.nodes[a.0].value.rows;
                    let mut g = Matrix::zeros(rows, cols);
                    for (i, &s) in segments.iter().enumerate() {
                        for j in 0..cols {
                            g.set(i, j, up.get(s, j) / counts[s] as f64);
                        }
                    }
                    grads[a.0].add_assign(&g);
                }
                Op::PairLeakyDot { s, t, att, slope } => {
                    let (vs, vt, va) = (&self.nodes[s.0].value, &self.nodes[t.0].value, &self.nodes[att.0].value);
                    let (n, m, h) = (vs.rows, vt.rows, vs.cols);
                    let mut gs = Matrix::zeros(n, h);
                    let mut gt = Matrix::zeros(m, h);
                    let mut ga = Matrix::zeros(1, h);
                    for i in 0..n {
                        for j in 0..m {
                            let u = up.get(i, j);
                            if u == 0.0 {
                                continue;
                            }
                            for d in 0..h {
                                let z = vs.get(i, d) + vt.get(j, d);
                                let dz = u * va.data[d] * lrelu_grad(z, *slope);
                                gs.data[i * h + d] += dz;
                                gt.data[j * h + d] += dz;
                                ga.data[d] += u * lrelu(z, *slope);
                            }
                        }
                    }
                    grads[s.0].add_assign(&gs);
                    grads[t.0].add_assign(&gt);
                    grads[att.0].add_assign(&ga);
                }
                Op::HardSubstitute { soft } => grads[soft.0].add_assign(&up),
                Op::StopGradient(_) => {}
                Op::MeanAll(a) => {
                    let va = &self.nodes[a.0].value;
                    let g = va.map(|_| up.data[0] / va.data.len() as f64);
                    grads[a.0].add_assign(&g);
                }
                Op::SumAll(a) => {
                    let va = &self.nodes[a.0].value;
                    let g = va.map(|_| up.data[0]);
                    grads[a.0].add_assign(&g);
                }
            }
        }
        grads
    }
}
