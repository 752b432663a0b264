use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

/// Samples a graph where each pair `i < j` is an edge with probability
/// `B[z_i][z_j]`, independently.
pub fn generate_sbm(n: usize, z: &[usize], block_matrix: &DenseMatrix, seed: u64) -> Result<Graph> {
    if z.len() != n {
        return invalid(format!("{} memberships for {n} nodes", z.len()));
    }
    let k = block_matrix.rows();
    if !block_matrix.is_square() || block_matrix.asymmetry() > 0.0 {
        return invalid("block matrix must be square and symmetric");
    }
    if block_matrix.data().iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("block probabilities must lie in [0, 1]");
    }
    if let Some(&b) = z.iter().find(|&&b| b >= k) {
        return invalid(format!("block id {b} outside [0, {k})"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < block_matrix.get(z[i], z[j]) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(&edges, n)
}

/// Two-parameter planted partition: `k` equal blocks (the last absorbs the
/// remainder), `p_in` inside blocks and `p_out` across.
pub fn planted_partition(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Vec<usize>)> {
    if k == 0 || k > n {
        return invalid(format!("cannot plant {k} blocks in {n} nodes"));
    }
    let z: Vec<usize> = (0..n).map(|i| (i / (n / k)).min(k - 1)).collect();
    let b = DenseMatrix::from_fn(k, k, |r, s| if r == s { p_in } else { p_out });
    Ok((generate_sbm(n, &z, &b, seed)?, z))
}

/// Degree-corrected sampler: pair `i < j` is an edge with probability
/// `1 − exp(−θ_i θ_j ω_{z_i z_j})`.
pub fn generate_dcsbm(z: &[usize], theta: &[f64], omega: &DenseMatrix, seed: u64) -> Result<Graph> {
    let n = z.len();
    if theta.len() != n {
        return invalid("theta length differs from membership length");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = super::dcsbm_edge_probability(theta[i], theta[j], omega.get(z[i], z[j]));
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(&edges, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_block_matrices() {
        let z = vec![0, 0, 1, 1, 1];
        let zeros = DenseMatrix::zeros(2, 2);
        assert_eq!(generate_sbm(5, &z, &zeros, 1).unwrap().num_edges(), 0);
        let ones = DenseMatrix::filled(2, 2, 1.0);
        assert_eq!(generate_sbm(5, &z, &ones, 1).unwrap().num_edges(), 10);
    }

    #[test]
    fn planted_density_within_three_sigma() {
        let (g, z) = planted_partition(200, 2, 0.3, 0.02, 7).unwrap();
        let inside = g.edges().iter().filter(|e| z[e.0] == z[e.1]).count() as f64;
        let pairs: f64 = 2.0 * 100.0 * 99.0 / 2.0;
        let sigma = (pairs * 0.3 * 0.7).sqrt();
        assert!((inside - 0.3 * pairs).abs() < 3.0 * sigma);
    }
}
