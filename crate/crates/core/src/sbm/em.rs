//! Variational EM for the standard SBM.
//!
//! The E-step is the mean-field expansion over neighbours and non-neighbours,
//! swept node by node in log space. The M-step re-estimates `B` and the block
//! weights from the responsibilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::{sbm_log_likelihood, SbmParams, B_EPS};
use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no responsibility moves by more than this.
    pub tol: f64,
    pub restarts: usize,
}

impl EmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 200,
            tol: 1e-6,
            restarts: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmResult {
    pub params: SbmParams,
    /// Log-likelihood at the hardened memberships after the final iteration.
    pub log_likelihood: f64,
    /// Hardened log-likelihood after initialisation and after every accepted
    /// iteration; non-decreasing.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when an iteration would have lowered the hardened likelihood; that
    /// iteration was discarded and the run stopped.
    pub stopped_on_decrease: bool,
}

const MONOTONE_SLACK: f64 = 1e-6;

/// Best of `cfg.restarts` independent EM runs by final hardened likelihood.
pub fn sbm_em(g: &Graph, cfg: &EmConfig) -> Result<EmResult> {
    let n = g.num_nodes();
    if cfg.k == 0 || cfg.k > n {
        return invalid(format!("EM with K = {} on {n} nodes", cfg.k));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.restarts.max(1)).map(|_| seeder.random()).collect();
    let runs: Vec<Result<EmResult>> = seeds.par_iter().map(|&s| em_single(g, cfg, s)).collect();
    let mut best: Option<EmResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.log_likelihood > b.log_likelihood) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

struct State {
    gamma: DenseMatrix,
    b: DenseMatrix,
    log_pi: Vec<f64>,
}

fn harden(gamma: &DenseMatrix) -> Vec<usize> {
    (0..gamma.rows())
        .map(|i| {
            let row = gamma.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn em_single(g: &Graph, cfg: &EmConfig, seed: u64) -> Result<EmResult> {
    let n = g.num_nodes();
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let row = gamma.row_mut(i);
        for x in row.iter_mut() {
            *x = rng.sample::<f64, _>(Exp1);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }

    let (b, log_pi) = m_step(g, &gamma);
    let z = harden(&gamma);
    let mut ll = sbm_log_likelihood(g, &b, &z)?;
    let mut trace = vec![ll];
    // Near uniform responsibilities the M-step block matrix is flat to second
    // order and the sweep would settle on the symmetric fixed point, so the
    // first E-step runs against an assortative seed matrix instead.
    let mut state = State {
        gamma,
        b: seed_block_matrix(g, k),
        log_pi,
    };
    let mut z = z;
    let mut converged = false;
    let mut stopped_on_decrease = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let mut gamma = state.gamma.clone();
        let delta = e_step(g, &mut gamma, &state.b, &state.log_pi);
        let (b, log_pi) = m_step(g, &gamma);
        let z_next = harden(&gamma);
        let ll_next = sbm_log_likelihood(g, &b, &z_next)?;
        if ll_next < ll - MONOTONE_SLACK {
            stopped_on_decrease = true;
            break;
        }
        iterations += 1;
        state = State { gamma, b, log_pi };
        z = z_next;
        ll = ll_next;
        trace.push(ll);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(EmResult {
        params: SbmParams {
            block_matrix: state.b,
            memberships: z,
            responsibilities: state.gamma,
        },
        log_likelihood: ll,
        trace,
        iterations,
        converged,
        stopped_on_decrease,
    })
}

/// Assortative starting point: twice the graph density inside blocks and
/// half of it across.
fn seed_block_matrix(g: &Graph, k: usize) -> DenseMatrix {
    let n = g.num_nodes() as f64;
    let density = if n > 1.0 { 2.0 * g.num_edges() as f64 / (n * (n - 1.0)) } else { 0.0 };
    DenseMatrix::from_fn(k, k, |r, s| {
        let p = if r == s { 2.0 * density } else { 0.5 * density };
        p.clamp(B_EPS, 1.0 - B_EPS)
    })
}

/// One sequential mean-field sweep; returns the largest change in any γ_ik.
fn e_step(g: &Graph, gamma: &mut DenseMatrix, b: &DenseMatrix, log_pi: &[f64]) -> f64 {
    let (n, k) = gamma.shape();
    let log_b = b.map(f64::ln);
    let log_1mb = b.map(|p| (-p).ln_1p());
    let mut totals = vec![0.0; k];
    for i in 0..n {
        for (t, &x) in totals.iter_mut().zip(gamma.row(i)) {
            *t += x;
        }
    }
    let mut nb = vec![0.0; k];
    let mut score = vec![0.0; k];
    let mut max_delta: f64 = 0.0;
    for i in 0..n {
        nb.iter_mut().for_each(|x| *x = 0.0);
        for &j in g.neighbors(i) {
            for (acc, &x) in nb.iter_mut().zip(gamma.row(j)) {
                *acc += x;
            }
        }
        let own = gamma.row(i).to_vec();
        for c in 0..k {
            let mut s = log_pi[c];
            for l in 0..k {
                s += nb[l] * (log_b[(c, l)] - log_1mb[(c, l)]) + (totals[l] - own[l]) * log_1mb[(c, l)];
            }
            score[c] = s;
        }
        let mx = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = score.iter().map(|s| (s - mx).exp()).sum();
        let row = gamma.row_mut(i);
        for c in 0..k {
            let v = (score[c] - mx).exp() / z;
            max_delta = max_delta.max((v - own[c]).abs());
            totals[c] += v - own[c];
            row[c] = v;
        }
    }
    max_delta
}

/// `B_kl = Σ_{i≠j} γ_ik γ_jl A_ij / Σ_{i≠j} γ_ik γ_jl`, plus log block weights.
pub fn m_step(g: &Graph, gamma: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let (n, k) = gamma.shape();
    let mut num = DenseMatrix::zeros(k, k);
    for &(i, j, _) in g.edges() {
        let (gi, gj) = (gamma.row(i), gamma.row(j));
        for a in 0..k {
            for c in 0..k {
                num[(a, c)] += gi[a] * gj[c] + gj[a] * gi[c];
            }
        }
    }
    let mut totals = vec![0.0; k];
    let mut self_pairs = DenseMatrix::zeros(k, k);
    for i in 0..n {
        let gi = gamma.row(i);
        for a in 0..k {
            totals[a] += gi[a];
            for c in 0..k {
                self_pairs[(a, c)] += gi[a] * gi[c];
            }
        }
    }
    let b = DenseMatrix::from_fn(k, k, |a, c| {
        let den = totals[a] * totals[c] - self_pairs[(a, c)];
        let p = if den > 0.0 { num[(a, c)] / den } else { 0.0 };
        p.clamp(B_EPS, 1.0 - B_EPS)
    });
    let log_pi = totals.iter().map(|&t| (t / n as f64).max(B_EPS).ln()).collect();
    (b, log_pi)
}

/// Expected complete-data log-likelihood `Σ_{i<j} Σ_kl γ_ik γ_jl [A ln B + (1−A) ln(1−B)]`.
pub fn expected_log_likelihood(g: &Graph, gamma: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let (n, k) = gamma.shape();
    let mut q = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let a = g.has_edge(i, j);
            for c in 0..k {
                for l in 0..k {
                    let p = b[(c, l)];
                    let term = if a { p.ln() } else { (-p).ln_1p() };
                    q += gamma[(i, c)] * gamma[(j, l)] * term;
                }
            }
        }
    }
    q
}
