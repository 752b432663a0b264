//! Degree-corrected SBM: likelihoods, edge probability and parameter fit.
//!
//! Block edge counts follow the degree-sum convention: `e_rs` counts edges
//! between `r != s` and `e_rr` is twice the internal edge count, so that
//! `e_r = Σ_s e_rs` is the total degree of block `r`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::likelihood::check_memberships;
use crate::error::Result;
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DcVariant {
    /// `Σ_rs e_rs ln(e_rs / (e_r e_s))`.
    KarrerNewman,
    /// `M + Σ_k N_k ln k! + ½ Σ_rs e_rs ln(e_rs / (e_r e_s))`.
    Microcanonical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcSbmParams {
    pub memberships: Vec<usize>,
    /// Degree propensities, summing to 1 within every non-empty block.
    pub theta: Vec<f64>,
    pub omega: DenseMatrix,
}

/// `1 − exp(−θ_i θ_j ω_rs)`.
pub fn dcsbm_edge_probability(theta_i: f64, theta_j: f64, omega_rs: f64) -> f64 {
    -(-(theta_i * theta_j * omega_rs)).exp_m1()
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Degree-sum block matrix `e_rs` for memberships over `k` blocks.
pub fn block_degree_matrix(g: &Graph, z: &[usize], k: usize) -> Result<DenseMatrix> {
    check_memberships(g, z, k)?;
    let mut e = DenseMatrix::zeros(k, k);
    for &(u, v, _) in g.edges() {
        e[(z[u], z[v])] += 1.0;
        e[(z[v], z[u])] += 1.0;
    }
    Ok(e)
}

fn kn_from_blocks(e: &DenseMatrix) -> f64 {
    let k = e.rows();
    let totals: Vec<f64> = (0..k).map(|r| e.row(r).iter().sum()).collect();
    let mut s = 0.0;
    for r in 0..k {
        for t in 0..k {
            let x = e[(r, t)];
            if x > 0.0 {
                s += x * (x / (totals[r] * totals[t])).ln();
            }
        }
    }
    s
}

/// DC-SBM log-likelihood of memberships `z`; the block count is `max(z) + 1`.
pub fn dcsbm_log_likelihood(g: &Graph, z: &[usize], variant: DcVariant) -> Result<f64> {
    let k = z.iter().max().map_or(1, |m| m + 1);
    let kn = kn_from_blocks(&block_degree_matrix(g, z, k)?);
    Ok(match variant {
        DcVariant::KarrerNewman => kn,
        DcVariant::Microcanonical => {
            let degree_term: f64 = (0..g.num_nodes()).map(|v| ln_gamma(g.degree(v) as f64 + 1.0)).sum();
            g.num_edges() as f64 + degree_term + 0.5 * kn
        }
    })
}

/// Maximum-likelihood `θ` and `ω` for fixed memberships: `θ_i = k_i / e_{z_i}`
/// and `ω_rs = e_rs`.
pub fn dcsbm_params(g: &Graph, z: &[usize], k: usize) -> Result<DcSbmParams> {
    let omega = block_degree_matrix(g, z, k)?;
    let totals: Vec<f64> = (0..k).map(|r| omega.row(r).iter().sum()).collect();
    let mut sizes = vec![0usize; k];
    for &b in z {
        sizes[b] += 1;
    }
    let theta = (0..g.num_nodes())
        .map(|v| {
            let t = totals[z[v]];
            if t > 0.0 {
                g.degree(v) as f64 / t
            } else {
                1.0 / sizes[z[v]] as f64
            }
        })
        .collect();
    Ok(DcSbmParams {
        memberships: z.to_vec(),
        theta,
        omega,
    })
}

/// Incremental Karrer–Newman objective, written as
/// `Σ_rs e_rs ln e_rs − 2 Σ_r e_r ln e_r`.
pub(crate) struct KnState<'a> {
    g: &'a Graph,
    z: Vec<usize>,
    k: usize,
    e: Vec<f64>,
    totals: Vec<f64>,
    nb: Vec<f64>,
}

impl<'a> KnState<'a> {
    pub(crate) fn new(g: &'a Graph, z: Vec<usize>, k: usize) -> Result<Self> {
        let m = block_degree_matrix(g, &z, k)?;
        let totals = (0..k).map(|r| m.row(r).iter().sum()).collect();
        Ok(Self {
            g,
            z,
            k,
            e: m.into_data(),
            totals,
            nb: vec![0.0; k],
        })
    }

    pub(crate) fn value(&self) -> f64 {
        let body: f64 = self.e.iter().map(|&x| xlnx(x)).sum();
        body - 2.0 * self.totals.iter().map(|&t| xlnx(t)).sum::<f64>()
    }

    fn local(&self, r: usize, s: usize) -> f64 {
        let k = self.k;
        let mut acc = 0.0;
        for t in 0..k {
            acc += xlnx(self.e[r * k + t]) + xlnx(self.e[s * k + t]);
            if t != r && t != s {
                acc += xlnx(self.e[t * k + r]) + xlnx(self.e[t * k + s]);
            }
        }
        acc - 2.0 * (xlnx(self.totals[r]) + xlnx(self.totals[s]))
    }

    pub(crate) fn apply(&mut self, v: usize, to: usize) {
        let from = self.z[v];
        let k = self.k;
        self.nb.iter_mut().for_each(|x| *x = 0.0);
        for &u in self.g.neighbors(v) {
            self.nb[self.z[u]] += 1.0;
        }
        let deg = self.g.degree(v) as f64;
        for t in 0..k {
            let c = self.nb[t];
            if c == 0.0 {
                continue;
            }
            self.e[from * k + t] -= c;
            self.e[t * k + from] -= c;
        }
        self.z[v] = to;
        for t in 0..k {
            let c = self.nb[t];
            if c == 0.0 {
                continue;
            }
            self.e[to * k + t] += c;
            self.e[t * k + to] += c;
        }
        self.totals[from] -= deg;
        self.totals[to] += deg;
    }

    pub(crate) fn delta(&mut self, v: usize, to: usize) -> f64 {
        let from = self.z[v];
        let before = self.local(from, to);
        self.apply(v, to);
        let after = self.local(from, to);
        self.apply(v, from);
        after - before
    }
}
