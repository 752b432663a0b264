//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A `Tape` records every operation in execution order; `backward` walks it
//! in reverse. Build a fresh tape for every forward pass and copy trainable
//! weights in with `param`, then read their gradients back out.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{gemm, DenseMatrix};

/// Handle to a value recorded on a `Tape`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Transpose(Var),
    Sigmoid(Var),
    Relu(Var),
    Log(Var),
    MeanRows(Var),
    ConcatCols(Var, Var),
    ScalarMul(Var, f64),
    SumAll(Var),
    Mul(Var, Var),
    Bilinear(Var, Var, Var),
    BceLogits {
        logits: Var,
        targets: Arc<DenseMatrix>,
        pos_weight: f64,
    },
}

struct Node {
    value: Arc<DenseMatrix>,
    op: Op,
    requires_grad: bool,
}

pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<DenseMatrix>>,
    faults: usize,
}

fn shape_err(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Error {
    Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn accumulate(slot: &mut Option<DenseMatrix>, g: DenseMatrix) {
    match slot {
        Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: DenseMatrix, op: Op, requires_grad: bool, name: &str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NumericFault(format!("{name} produced a non-finite value")));
        }
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Arc<DenseMatrix>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; its gradient is available after `backward`.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        self.leaf(Arc::new(value), true)
    }

    /// Leaf that no gradient flows into.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.leaf(Arc::new(value), false)
    }

    /// Constant shared with the caller without copying.
    pub fn constant_shared(&mut self, value: Arc<DenseMatrix>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    pub fn grad(&self, v: Var) -> Option<&DenseMatrix> {
        self.grads[v.0].as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Entries clamped by `log` so far.
    pub fn faults(&self) -> usize {
        self.faults
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = gemm(self.value(a), false, self.value(b), false)?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::Add(a, b), rg, "add")
    }

    /// `A + 𝟙 b` for a 1×d row `b`.
    pub fn add_row_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(shape_err("add_row_broadcast", av, bv));
        }
        let value = DenseMatrix::from_fn(av.rows(), av.cols(), |i, j| av[(i, j)] + bv[(0, j)]);
        let rg = self.rg(&[a, b]);
        self.push(value, Op::AddRow(a, b), rg, "add_row_broadcast")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(value, Op::Transpose(a), rg, "transpose")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(value, Op::Sigmoid(a), rg, "sigmoid")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push(value, Op::Relu(a), rg, "relu")
    }

    /// Natural log; entries below `LOG_CLAMP` are clamped and counted.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let clamped = av.data().iter().filter(|&&x| !(x >= LOG_CLAMP)).count();
        let value = av.map(|x| if x >= LOG_CLAMP { x.ln() } else { LOG_CLAMP.ln() });
        self.faults += clamped;
        let rg = self.rg(&[a]);
        self.push(value, Op::Log(a), rg, "log")
    }

    /// Column means as a 1×d row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let n = av.rows().max(1) as f64;
        let mut value = DenseMatrix::zeros(1, av.cols());
        for i in 0..av.rows() {
            for (acc, x) in value.data_mut().iter_mut().zip(av.row(i)) {
                *acc += x;
            }
        }
        value.data_mut().iter_mut().for_each(|x| *x /= n);
        let rg = self.rg(&[a]);
        self.push(value, Op::MeanRows(a), rg, "mean_rows")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(shape_err("concat_cols", av, bv));
        }
        let ca = av.cols();
        let value = DenseMatrix::from_fn(av.rows(), ca + bv.cols(), |i, j| if j < ca { av[(i, j)] } else { bv[(i, j - ca)] });
        let rg = self.rg(&[a, b]);
        self.push(value, Op::ConcatCols(a, b), rg, "concat_cols")
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).scale(c);
        let rg = self.rg(&[a]);
        self.push(value, Op::ScalarMul(a, c), rg, "scalar_mul")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let value = DenseMatrix::filled(1, 1, self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::SumAll(a), rg, "sum_all")
    }

    pub fn elementwise_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "elementwise_mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::Mul(a, b), rg, "elementwise_mul")
    }

    /// `X W Yᵀ`: row `i`, column `j` holds `x_iᵀ W y_j`.
    pub fn bilinear(&mut self, x: Var, w: Var, y: Var) -> Result<Var> {
        let xw = gemm(self.value(x), false, self.value(w), false)?;
        let value = gemm(&xw, false, self.value(y), true)?;
        let rg = self.rg(&[x, w, y]);
        self.push(value, Op::Bilinear(x, w, y), rg, "bilinear")
    }

    /// Mean binary cross-entropy of `σ(logits)` against `targets`, with
    /// positive entries weighted by `pos_weight`. Evaluated through
    /// log-sigmoid so saturated logits stay finite.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Arc<DenseMatrix>, pos_weight: f64) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape() != targets.shape() {
            return Err(shape_err("bce_with_logits", lv, &targets));
        }
        let n = lv.data().len().max(1) as f64;
        let total: f64 = lv
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&x, &y)| pos_weight * y * softplus(-x) + (1.0 - y) * softplus(x))
            .sum();
        let value = DenseMatrix::filled(1, 1, total / n);
        let rg = self.rg(&[logits]);
        self.push(
            value,
            Op::BceLogits {
                logits,
                targets,
                pos_weight,
            },
            rg,
            "bce_with_logits",
        )
    }

    /// Accumulates `∂loss/∂v` into every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a 1×1 loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut local: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        local[loss.0] = Some(DenseMatrix::filled(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = local[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            let out = self.nodes[idx].value.clone();
            for (v, dv) in self.local_grads(&op, &out, &g)? {
                if self.nodes[v.0].requires_grad {
                    accumulate(&mut local[v.0], dv);
                }
            }
            accumulate(&mut self.grads[idx], g);
        }
        Ok(())
    }

    fn local_grads(&self, op: &Op, out: &DenseMatrix, g: &DenseMatrix) -> Result<Vec<(Var, DenseMatrix)>> {
        let val = |v: &Var| self.value(*v);
        let need = |v: &Var| self.nodes[v.0].requires_grad;
        Ok(match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                // Skipping constant operands matters: a dense n×n propagation
                // matrix would otherwise get an n×n gradient every step.
                let mut out = Vec::with_capacity(2);
                if need(a) {
                    out.push((*a, gemm(g, false, val(b), true)?));
                }
                if need(b) {
                    out.push((*b, gemm(val(a), true, g, false)?));
                }
                out
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::AddRow(a, b) => {
                let mut db = DenseMatrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (acc, x) in db.data_mut().iter_mut().zip(g.row(i)) {
                        *acc += x;
                    }
                }
                vec![(*a, g.clone()), (*b, db)]
            }
            Op::Transpose(a) => vec![(*a, g.transpose())],
            Op::Sigmoid(a) => vec![(*a, out.zip_map(g, "sigmoid", |s, d| d * s * (1.0 - s))?)],
            Op::Relu(a) => vec![(*a, val(a).zip_map(g, "relu", |x, d| if x > 0.0 { d } else { 0.0 })?)],
            Op::Log(a) => vec![(*a, val(a).zip_map(g, "log", |x, d| if x >= LOG_CLAMP { d / x } else { 0.0 })?)],
            Op::MeanRows(a) => {
                let av = val(a);
                let n = av.rows().max(1) as f64;
                vec![(*a, DenseMatrix::from_fn(av.rows(), av.cols(), |_, j| g[(0, j)] / n))]
            }
            Op::ConcatCols(a, b) => {
                let ca = val(a).cols();
                let da = DenseMatrix::from_fn(g.rows(), ca, |i, j| g[(i, j)]);
                let db = DenseMatrix::from_fn(g.rows(), val(b).cols(), |i, j| g[(i, ca + j)]);
                vec![(*a, da), (*b, db)]
            }
            Op::ScalarMul(a, c) => vec![(*a, g.scale(*c))],
            Op::SumAll(a) => {
                let (r, c) = val(a).shape();
                vec![(*a, DenseMatrix::filled(r, c, g[(0, 0)]))]
            }
            Op::Mul(a, b) => vec![
                (*a, g.zip_map(val(b), "elementwise_mul", |d, y| d * y)?),
                (*b, g.zip_map(val(a), "elementwise_mul", |d, x| d * x)?),
            ],
            Op::Bilinear(x, w, y) => {
                let (xv, wv, yv) = (val(x), val(w), val(y));
                let gy = gemm(g, false, yv, false)?;
                let mut out = Vec::with_capacity(3);
                if need(x) {
                    out.push((*x, gemm(&gy, false, wv, true)?));
                }
                if need(w) {
                    out.push((*w, gemm(xv, true, &gy, false)?));
                }
                if need(y) {
                    let xw = gemm(xv, false, wv, false)?;
                    out.push((*y, gemm(g, true, &xw, false)?));
                }
                out
            }
            Op::BceLogits {
                logits,
                targets,
                pos_weight,
            } => {
                let lv = val(logits);
                let scale = g[(0, 0)] / lv.data().len().max(1) as f64;
                let d = lv.zip_map(targets, "bce_with_logits", |x, y| {
                    let s = sigmoid(x);
                    scale * ((1.0 - y) * s - pos_weight * y * (1.0 - s))
                })?;
                vec![(*logits, d)]
            }
        })
    }
}

/// Glorot-uniform initialisation, `U(−√(6/(r+c)), √(6/(r+c)))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    pub fn new(lr: f64, params: &[DenseMatrix]) -> Self {
        let zeros = || params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update; a missing gradient counts as zero.
    pub fn step(&mut self, params: &mut [DenseMatrix], grads: &[Option<&DenseMatrix>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::InvalidArgument("parameter and gradient counts differ".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, p) in params.iter_mut().enumerate() {
            let Some(g) = grads[k] else { continue };
            if g.shape() != p.shape() {
                return Err(shape_err("adam", p, g));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((x, &d), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * d;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * d * d;
                *x -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        let mut t = Tape::new();
        let z = t.constant(DenseMatrix::zeros(2, 3));
        let s = t.sigmoid(z).unwrap();
        assert!(t.value(s).data().iter().all(|&x| x == 0.5));
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let id = t.constant(DenseMatrix::identity(3));
        let xv = t.constant(x.clone());
        let p = t.matmul(id, xv).unwrap();
        assert_eq!(t.value(p), &x);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::new();
        let a = t.param(DenseMatrix::zeros(2, 2));
        let s = t.sigmoid(a).unwrap();
        let l = t.sum_all(s).unwrap();
        t.backward(l).unwrap();
        assert!(t.grad(a).unwrap().data().iter().all(|&g| g == 0.25));
    }

    #[test]
    fn linear_gradients() {
        let mut t = Tape::new();
        let w = t.param(DenseMatrix::from_fn(2, 3, |i, j| (i + j) as f64));
        let l = t.sum_all(w).unwrap();
        t.backward(l).unwrap();
        assert!(t.grad(w).unwrap().data().iter().all(|&g| g == 1.0));

        let mut t = Tape::new();
        let xm = DenseMatrix::from_fn(4, 2, |i, j| (i as f64) - (j as f64) * 0.5);
        let x = t.constant(xm.clone());
        let w = t.param(DenseMatrix::filled(2, 3, 0.1));
        let p = t.matmul(x, w).unwrap();
        let l = t.sum_all(p).unwrap();
        t.backward(l).unwrap();
        let want = DenseMatrix::from_fn(2, 3, |r, _| (0..4).map(|i| xm[(i, r)]).sum());
        assert_eq!(t.grad(w).unwrap(), &want);
        assert!(t.grad(x).is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let a = t.param(DenseMatrix::zeros(2, 2));
        assert!(t.backward(a).is_err());
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.param(DenseMatrix::zeros(2, 3));
        let b = t.param(DenseMatrix::zeros(2, 3));
        match t.matmul(a, b) {
            Err(Error::Shape { op, .. }) => assert_eq!(op, "matmul"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn log_clamps_and_counts() {
        let mut t = Tape::new();
        let a = t.param(DenseMatrix::from_vec(1, 3, vec![0.0, -1.0, 1.0]).unwrap());
        let l = t.log(a).unwrap();
        assert_eq!(t.faults(), 2);
        assert_eq!(t.value(l)[(0, 0)], LOG_CLAMP.ln());
        assert_eq!(t.value(l)[(0, 2)], 0.0);
    }

    #[test]
    fn non_finite_values_fault() {
        let mut t = Tape::new();
        let a = t.param(DenseMatrix::filled(1, 1, 1e308));
        assert!(matches!(t.scalar_mul(a, 10.0), Err(Error::NumericFault(_))));
    }

    #[test]
    fn bce_saturates_gracefully() {
        let mut t = Tape::new();
        let x = t.param(DenseMatrix::from_vec(1, 2, vec![800.0, -800.0]).unwrap());
        let y = Arc::new(DenseMatrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap());
        let l = t.bce_with_logits(x, y, 1.0).unwrap();
        assert!((t.scalar(l) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn adam_basics() {
        let mut p = vec![DenseMatrix::filled(1, 2, 1.0)];
        let mut opt = Adam::new(0.01, &p);
        let zero = DenseMatrix::zeros(1, 2);
        opt.step(&mut p, &[Some(&zero)]).unwrap();
        assert_eq!(p[0].data(), &[1.0, 1.0]);
        let g = DenseMatrix::from_vec(1, 2, vec![3.0, -2.0]).unwrap();
        for _ in 0..50 {
            opt.step(&mut p, &[Some(&g)]).unwrap();
        }
        assert!(p[0][(0, 0)] < 1.0 && p[0][(0, 1)] > 1.0);
    }
}
