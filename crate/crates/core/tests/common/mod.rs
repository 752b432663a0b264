//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use graphclust::autodiff::{Tape, Var};
use graphclust::graph::{Graph, Partition};
use graphclust::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

pub const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over every relabeling of predicted ids into `0..k`.
pub fn brute_force_acc(y: &[usize], yhat: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| y.iter().zip(yhat).filter(|&(&a, &b)| perm[b] == a).count())
        .max()
        .unwrap() as f64
        / y.len() as f64
}

/// ARI from explicit enumeration of node pairs.
pub fn pair_ari(y: &[usize], yhat: &[usize]) -> Option<f64> {
    let n = y.len();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sy = y[i] == y[j];
            let sh = yhat[i] == yhat[j];
            a += sy as u8 as f64;
            b += sh as u8 as f64;
            c += (sy && sh) as u8 as f64;
        }
    }
    let total = (n * (n - 1) / 2) as f64;
    let e = a * b / total;
    let denom = 0.5 * (a + b) - e;
    (denom != 0.0).then(|| (c - e) / denom)
}

/// Modularity as the double sum over node pairs.
pub fn modularity_direct(g: &Graph, p: &Partition) -> f64 {
    let n = g.num_nodes();
    let m = g.total_weight();
    let k: Vec<f64> = (0..n).map(|v| g.weighted_degree(v)).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if p.cluster_of(i) == p.cluster_of(j) {
                q += g.edge_weight(i, j).unwrap_or(0.0) - k[i] * k[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(&edges, n).unwrap()
}

/// Every labeling of `n` nodes into `k` blocks, in lexicographic order.
pub fn all_labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let b = code % k;
                    code /= k;
                    b
                })
                .collect()
        })
        .collect()
}

/// Collapsed log posterior by explicit pair enumeration.
pub fn posterior_oracle(g: &Graph, z: &[usize], k: usize, alpha: f64, b1: f64, b2: f64) -> f64 {
    let n = z.len();
    let lbeta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let mut e = vec![vec![0.0; k]; k];
    let mut pairs = vec![vec![0.0; k]; k];
    for i in 0..n {
        for j in i + 1..n {
            let (r, s) = (z[i].min(z[j]), z[i].max(z[j]));
            pairs[r][s] += 1.0;
            if g.has_edge(i, j) {
                e[r][s] += 1.0;
            }
        }
    }
    let mut lp = 0.0;
    for r in 0..k {
        for s in r..k {
            lp += lbeta(e[r][s] + b1, pairs[r][s] - e[r][s] + b2) - lbeta(b1, b2);
        }
    }
    let mut sizes = vec![0.0; k];
    for &b in z {
        sizes[b] += 1.0;
    }
    lp += ln_gamma(k as f64 * alpha) - ln_gamma(n as f64 + k as f64 * alpha);
    for s in sizes {
        lp += ln_gamma(s + alpha) - ln_gamma(alpha);
    }
    lp
}

pub type Build = dyn Fn(&mut Tape, &[Var]) -> Var;

/// `Σ (f(inputs) ⊙ R)` for a fixed random weight matrix `R`.
pub fn loss_value(inputs: &[DenseMatrix], weights: &DenseMatrix, f: &Build) -> f64 {
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| t.param(m.clone())).collect();
    let out = f(&mut t, &vars);
    t.value(out).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

/// Largest relative disagreement between tape gradients and central
/// differences, scaled by `max(|analytic|, |numeric|, 1)`.
pub fn gradcheck(inputs: &[DenseMatrix], f: &Build, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| t.param(m.clone())).collect();
    let out = f(&mut t, &vars);
    let (r, c) = t.value(out).shape();
    let weights = DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let w = t.constant(weights.clone());
    let prod = t.elementwise_mul(out, w).unwrap();
    let loss = t.sum_all(prod).unwrap();
    t.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (k, m) in inputs.iter().enumerate() {
        let analytic = t.grad(vars[k]).cloned().unwrap_or_else(|| DenseMatrix::zeros(m.rows(), m.cols()));
        for idx in 0..m.data().len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[idx] += H;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[idx] -= H;
            let numeric = (loss_value(&plus, &weights, f) - loss_value(&minus, &weights, f)) / (2.0 * H);
            let a = analytic.data()[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0));
        }
    }
    worst
}

pub fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.5..1.5))
}

/// Entries kept away from the ReLU kink.
pub fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| {
        let x: f64 = rng.random_range(0.05..1.5);
        if rng.random::<bool>() {
            x
        } else {
            -x
        }
    })
}

pub fn positive(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.random_range(0.3..2.0))
}

/// Every registered op, with inputs drawn for shapes `(n, d, e)`.
pub fn op_cases(n: usize, d: usize, e: usize, rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<DenseMatrix>, Box<Build>)> {
    let targets = Arc::new(DenseMatrix::from_fn(n, d, |i, j| ((i + 2 * j) % 3 == 0) as u8 as f64));
    vec![
        ("matmul", vec![random(rng, n, d), random(rng, d, e)], Box::new(|t: &mut Tape, v: &[Var]| t.matmul(v[0], v[1]).unwrap())),
        ("add", vec![random(rng, n, d), random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.add(v[0], v[1]).unwrap())),
        ("add_row_broadcast", vec![random(rng, n, d), random(rng, 1, d)], Box::new(|t: &mut Tape, v: &[Var]| t.add_row_broadcast(v[0], v[1]).unwrap())),
        ("transpose", vec![random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.transpose(v[0]).unwrap())),
        ("sigmoid", vec![random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.sigmoid(v[0]).unwrap())),
        ("relu", vec![away_from_zero(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.relu(v[0]).unwrap())),
        ("log", vec![positive(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.log(v[0]).unwrap())),
        ("mean_rows", vec![random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.mean_rows(v[0]).unwrap())),
        ("concat_cols", vec![random(rng, n, d), random(rng, n, e)], Box::new(|t: &mut Tape, v: &[Var]| t.concat_cols(v[0], v[1]).unwrap())),
        ("scalar_mul", vec![random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.scalar_mul(v[0], -1.7).unwrap())),
        ("sum_all", vec![random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.sum_all(v[0]).unwrap())),
        ("elementwise_mul", vec![random(rng, n, d), random(rng, n, d)], Box::new(|t: &mut Tape, v: &[Var]| t.elementwise_mul(v[0], v[1]).unwrap())),
        ("bilinear", vec![random(rng, n, d), random(rng, d, e), random(rng, 2, e)], Box::new(|t: &mut Tape, v: &[Var]| t.bilinear(v[0], v[1], v[2]).unwrap())),
        (
            "bce_with_logits",
            vec![random(rng, n, d)],
            Box::new(move |t: &mut Tape, v: &[Var]| t.bce_with_logits(v[0], targets.clone(), 2.5).unwrap()),
        ),
    ]
}

