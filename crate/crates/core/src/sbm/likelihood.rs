use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

/// Lower and upper clamp applied to every block probability.
pub const B_EPS: f64 = 1e-9;

/// Fitted standard SBM: block matrix, hard memberships and soft responsibilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_matrix: DenseMatrix,
    pub memberships: Vec<usize>,
    pub responsibilities: DenseMatrix,
}

/// Edge and pair counts per block pair for a hard assignment over `k` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCounts {
    pub k: usize,
    pub sizes: Vec<usize>,
    /// `edges[r*k+s]`: edges between blocks `r != s`, internal edges when `r == s`.
    pub edges: Vec<u64>,
}

impl BlockCounts {
    pub fn new(g: &Graph, z: &[usize], k: usize) -> Result<Self> {
        check_memberships(g, z, k)?;
        let mut sizes = vec![0usize; k];
        for &b in z {
            sizes[b] += 1;
        }
        let mut edges = vec![0u64; k * k];
        for &(u, v, _) in g.edges() {
            let (r, s) = (z[u], z[v]);
            edges[r * k + s] += 1;
            if r != s {
                edges[s * k + r] += 1;
            }
        }
        Ok(Self { k, sizes, edges })
    }

    #[inline]
    pub fn edges_between(&self, r: usize, s: usize) -> u64 {
        self.edges[r * self.k + s]
    }

    /// Unordered node pairs with one endpoint in `r` and the other in `s`.
    pub fn pairs_between(&self, r: usize, s: usize) -> u64 {
        let (a, b) = (self.sizes[r] as u64, self.sizes[s] as u64);
        if r == s {
            a * a.saturating_sub(1) / 2
        } else {
            a * b
        }
    }
}

pub(crate) fn check_memberships(g: &Graph, z: &[usize], k: usize) -> Result<()> {
    if z.len() != g.num_nodes() {
        return invalid(format!("{} memberships for {} nodes", z.len(), g.num_nodes()));
    }
    if let Some(&b) = z.iter().find(|&&b| b >= k) {
        return invalid(format!("block id {b} outside [0, {k})"));
    }
    Ok(())
}

fn clamped(b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::NumericFault(format!("block probability {b} outside [0, 1]")));
    }
    Ok(b.clamp(B_EPS, 1.0 - B_EPS))
}

/// Bernoulli log-likelihood `Σ_{i<j} A_ij ln B + (1 − A_ij) ln(1 − B)` under
/// hard memberships, computed from block counts in O(m + K²).
pub fn sbm_log_likelihood(g: &Graph, block_matrix: &DenseMatrix, z: &[usize]) -> Result<f64> {
    let k = block_matrix.rows();
    if !block_matrix.is_square() {
        return invalid("block matrix must be square");
    }
    let counts = BlockCounts::new(g, z, k)?;
    let mut ll = 0.0;
    for r in 0..k {
        for s in r..k {
            let e = counts.edges_between(r, s) as f64;
            let pairs = counts.pairs_between(r, s) as f64;
            if pairs == 0.0 {
                continue;
            }
            let b = clamped(block_matrix.get(r, s))?;
            ll += e * b.ln() + (pairs - e) * (-b).ln_1p();
        }
    }
    Ok(ll)
}

/// Maximum-likelihood block matrix for hard memberships, clamped.
pub fn block_matrix_mle(g: &Graph, z: &[usize], k: usize) -> Result<DenseMatrix> {
    let counts = BlockCounts::new(g, z, k)?;
    Ok(DenseMatrix::from_fn(k, k, |r, s| {
        let pairs = counts.pairs_between(r, s);
        let p = if pairs == 0 {
            0.0
        } else {
            counts.edges_between(r, s) as f64 / pairs as f64
        };
        p.clamp(B_EPS, 1.0 - B_EPS)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_same_block() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        let b = DenseMatrix::filled(1, 1, 0.5);
        assert!((sbm_log_likelihood(&g, &b, &[0, 0]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_graph_three_non_edges() {
        let g = Graph::empty(3);
        let b = DenseMatrix::filled(1, 1, 0.5);
        assert!((sbm_log_likelihood(&g, &b, &[0, 0, 0]).unwrap() - 3.0 * 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        let b = DenseMatrix::filled(1, 1, 1.5);
        assert!(sbm_log_likelihood(&g, &b, &[0, 0]).is_err());
    }
}
