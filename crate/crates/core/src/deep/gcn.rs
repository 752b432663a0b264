use rand::Rng;

use crate::autodiff::{glorot_uniform, Tape, Var};
use crate::error::{invalid, Result};
use crate::graph::{matrix_view, Graph, MatrixKind};
use crate::numerics::{gemm, inverse, DenseMatrix};

/// Graph convolutional encoder: `H_{l+1} = act(P H_l Θ_l)` with ReLU on
/// hidden layers and identity on the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnEncoder {
    pub weights: Vec<DenseMatrix>,
}

impl GcnEncoder {
    /// Glorot-initialised layers chaining `dims[0] → dims[1] → …`.
    pub fn glorot<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        let weights = dims.windows(2).map(|w| glorot_uniform(w[0], w[1], rng)).collect();
        Self { weights }
    }

    pub fn from_weights(weights: Vec<DenseMatrix>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("encoder needs at least one layer");
        }
        for pair in weights.windows(2) {
            if pair[0].cols() != pair[1].rows() {
                return invalid(format!(
                    "layer dims do not chain: {:?} then {:?}",
                    pair[0].shape(),
                    pair[1].shape()
                ));
            }
        }
        Ok(Self { weights })
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.cols())
    }

    /// Records the weights on `tape` as trainable leaves.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.weights.iter().map(|w| tape.param(w.clone())).collect()
    }

    /// Forward pass on the tape; returns every layer's output, the last one
    /// being the embedding.
    pub fn forward_tape(tape: &mut Tape, weights: &[Var], x: Var, prop: Var) -> Result<Vec<Var>> {
        let mut h = x;
        let mut outs = Vec::with_capacity(weights.len());
        for (l, &w) in weights.iter().enumerate() {
            let xw = tape.matmul(h, w)?;
            h = tape.matmul(prop, xw)?;
            if l + 1 < weights.len() {
                h = tape.relu(h)?;
            }
            outs.push(h);
        }
        Ok(outs)
    }
}

/// Embedding `Z` for features `x` under propagation matrix `prop`.
pub fn gcn_forward(enc: &GcnEncoder, x: &DenseMatrix, prop: &DenseMatrix) -> Result<DenseMatrix> {
    let mut h = x.clone();
    for (l, w) in enc.weights.iter().enumerate() {
        let xw = gemm(&h, false, w, false)?;
        h = gemm(prop, false, &xw, false)?;
        if l + 1 < enc.weights.len() {
            h = h.map(|v| v.max(0.0));
        }
    }
    Ok(h)
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn propagation_matrix(g: &Graph) -> Result<DenseMatrix> {
    matrix_view(g, MatrixKind::NormalizedAdjacencyWithSelfLoops)
}

/// Personalised-PageRank diffusion `α (I − (1−α) D^{-1/2} A D^{-1/2})^{-1}`.
pub fn ppr_diffusion(g: &Graph, alpha: f64) -> Result<DenseMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("PPR alpha must lie in (0, 1), got {alpha}"));
    }
    diffusion_of(g, alpha, MatrixKind::NormalizedAdjacency)
}

/// PPR over `D̃^{-1/2}(A+I)D̃^{-1/2}`, defined on graphs with isolated nodes.
pub(crate) fn ppr_diffusion_self_loops(g: &Graph, alpha: f64) -> Result<DenseMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("PPR alpha must lie in (0, 1), got {alpha}"));
    }
    diffusion_of(g, alpha, MatrixKind::NormalizedAdjacencyWithSelfLoops)
}

fn diffusion_of(g: &Graph, alpha: f64, kind: MatrixKind) -> Result<DenseMatrix> {
    let t = matrix_view(g, kind)?;
    let n = g.num_nodes();
    let m = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - (1.0 - alpha) * t[(i, j)]);
    Ok(inverse(&m)?.scale(alpha))
}

/// Scales each row to unit Euclidean norm; zero rows stay zero.
pub fn normalize_rows_l2(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_embedding() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let p = propagation_matrix(&g).unwrap();
        let enc = GcnEncoder::from_weights(vec![DenseMatrix::zeros(2, 4), DenseMatrix::zeros(4, 3)]).unwrap();
        let z = gcn_forward(&enc, &DenseMatrix::filled(3, 2, 1.0), &p).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_dims_must_chain() {
        assert!(GcnEncoder::from_weights(vec![DenseMatrix::zeros(2, 4), DenseMatrix::zeros(3, 3)]).is_err());
    }

    #[test]
    fn ppr_alpha_range() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert!(ppr_diffusion(&g, 1.0).is_err());
        assert!(ppr_diffusion(&g, 0.0).is_err());
    }

    #[test]
    fn l2_rows() {
        let x = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let y = normalize_rows_l2(&x);
        assert_eq!(y.row(0), &[0.6, 0.8]);
        assert_eq!(y.row(1), &[0.0, 0.0]);
    }
}
