//! Spectral clustering on the normalized Laplacian with multiple eigenvectors.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{connected_components, matrix_view, Graph, MatrixKind, Partition};
use crate::numerics::{kmeans_restarts, sym_eigs_smallest, DenseMatrix, EigenPairs};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub k: usize,
    pub seed: u64,
    /// Scale every embedding row to unit length before k-means.
    pub normalize_rows: bool,
    /// Handle disconnected graphs component-wise instead of failing.
    pub component_fallback: bool,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl SpectralConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            normalize_rows: false,
            component_fallback: true,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub partition: Partition,
    /// Eigenvalues used for the embedding (empty when every cluster came from
    /// whole-component assignment).
    pub eigenvalues: Vec<f64>,
    pub components: usize,
}

/// Rows of the `k` smallest eigenvectors of the normalized Laplacian.
///
/// Works on disconnected graphs as long as no node is isolated.
pub fn spectral_embedding(g: &Graph, k: usize, normalize_rows: bool) -> Result<(DenseMatrix, EigenPairs)> {
    let lap = matrix_view(g, MatrixKind::NormalizedLaplacian)?;
    let pairs = sym_eigs_smallest(&lap, k)?;
    let mut u = pairs.vectors.clone();
    if normalize_rows {
        for i in 0..u.rows() {
            let row = u.row_mut(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }
    Ok((u, pairs))
}

pub fn spectral_clustering(g: &Graph, cfg: &SpectralConfig) -> Result<SpectralResult> {
    let n = g.num_nodes();
    if cfg.k < 2 {
        return invalid("spectral clustering needs k >= 2");
    }
    if cfg.k > n {
        return invalid(format!("k = {} exceeds node count {n}", cfg.k));
    }
    let comps = connected_components(g);
    let c = comps.num_clusters();
    if c == 1 {
        let (u, pairs) = spectral_embedding(g, cfg.k, cfg.normalize_rows)?;
        let km = kmeans_restarts(&u, cfg.k, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iters)?;
        return Ok(SpectralResult {
            partition: km.partition,
            eigenvalues: pairs.values,
            components: 1,
        });
    }
    if !cfg.component_fallback {
        return Err(Error::Disconnected(comps.clusters()));
    }
    let members = comps.clusters();
    if c >= cfg.k {
        return Ok(SpectralResult {
            partition: assign_components(&members, n, cfg.k),
            eigenvalues: Vec::new(),
            components: c,
        });
    }

    let quota = allocate(&members.iter().map(Vec::len).collect::<Vec<_>>(), cfg.k);
    let mut labels = vec![0usize; n];
    let mut offset = 0;
    let mut eigenvalues = Vec::new();
    for (ci, nodes) in members.iter().enumerate() {
        let kc = quota[ci];
        if kc >= 2 {
            let sub = g.subgraph(nodes);
            let sub_cfg = SpectralConfig {
                k: kc,
                seed: cfg.seed.wrapping_add(ci as u64),
                ..cfg.clone()
            };
            let r = spectral_clustering(&sub, &sub_cfg)?;
            eigenvalues.extend(r.eigenvalues);
            for (local, &v) in nodes.iter().enumerate() {
                labels[v] = offset + r.partition.cluster_of(local);
            }
            offset += r.partition.num_clusters();
        } else {
            for &v in nodes {
                labels[v] = offset;
            }
            offset += 1;
        }
    }
    Ok(SpectralResult {
        partition: Partition::from_labels(&labels),
        eigenvalues,
        components: c,
    })
}

/// Whole components onto `k` clusters: the `k` largest components seed the
/// clusters, every remaining component joins the currently smallest cluster.
fn assign_components(members: &[Vec<usize>], n: usize, k: usize) -> Partition {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(members[i].len()), i));
    let mut labels = vec![0usize; n];
    let mut sizes = vec![0usize; k];
    for (rank, &ci) in order.iter().enumerate() {
        let target = if rank < k {
            rank
        } else {
            (0..k).min_by_key(|&c| (sizes[c], c)).expect("k >= 1")
        };
        sizes[target] += members[ci].len();
        for &v in &members[ci] {
            labels[v] = target;
        }
    }
    Partition::new(labels).expect("the k largest components occupy every cluster id")
}

/// Splits `k` clusters over components: one each, the remainder proportional
/// to size by largest remainder, never more than a component's node count.
fn allocate(sizes: &[usize], k: usize) -> Vec<usize> {
    let mut quota = vec![1usize; sizes.len()];
    let total: usize = sizes.iter().sum();
    let extra = k - sizes.len();
    let mut given = 0;
    let mut remainders = Vec::with_capacity(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        let share = extra as f64 * s as f64 / total as f64;
        let whole = (share.floor() as usize).min(s - 1);
        quota[i] += whole;
        given += whole;
        remainders.push((share - share.floor(), i));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    while given < extra {
        let before = given;
        for &(_, i) in &remainders {
            if given == extra {
                break;
            }
            if quota[i] < sizes[i] {
                quota[i] += 1;
                given += 1;
            }
        }
        if given == before {
            break;
        }
    }
    quota
}
