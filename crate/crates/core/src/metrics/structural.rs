//! Graph-based scores that need no ground truth.
//!
//! Modularity, cut, volume and CPM use stored edge weights; internal density
//! counts edges.

use super::supervised::Score;
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, Partition};

fn check(g: &Graph, p: &Partition) -> Result<()> {
    if p.num_nodes() != g.num_nodes() {
        return invalid(format!(
            "partition covers {} nodes, graph has {}",
            p.num_nodes(),
            g.num_nodes()
        ));
    }
    Ok(())
}

/// Per-cluster internal weight and volume.
fn cluster_totals(g: &Graph, p: &Partition) -> (Vec<f64>, Vec<f64>) {
    let k = p.num_clusters();
    let mut internal = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for &(u, v, w) in g.edges() {
        let (cu, cv) = (p.cluster_of(u), p.cluster_of(v));
        vol[cu] += w;
        vol[cv] += w;
        if cu == cv {
            internal[cu] += w;
        }
    }
    (internal, vol)
}

/// Newman modularity, `Σ_C [e_C/m − (vol_C/2m)²]`.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    check(g, p)?;
    let m = g.total_weight();
    if g.num_edges() == 0 || m <= 0.0 {
        return invalid("modularity is undefined on an edgeless graph");
    }
    let (internal, vol) = cluster_totals(g, p);
    Ok(internal
        .iter()
        .zip(&vol)
        .map(|(&e, &v)| e / m - (v / (2.0 * m)).powi(2))
        .sum())
}

/// Constant Potts Model quality, `Σ_C [e_C − γ·n_C(n_C−1)/2]`.
pub fn cpm(g: &Graph, p: &Partition, gamma: f64) -> Result<f64> {
    check(g, p)?;
    let (internal, _) = cluster_totals(g, p);
    Ok(internal
        .iter()
        .zip(p.sizes())
        .map(|(&e, n)| e - gamma * (n as f64) * (n as f64 - 1.0) / 2.0)
        .sum())
}

fn membership(g: &Graph, cluster: &[usize]) -> Result<Vec<bool>> {
    let n = g.num_nodes();
    let mut inside = vec![false; n];
    for &v in cluster {
        if v >= n {
            return Err(Error::NodeOutOfRange { node: v, num_nodes: n });
        }
        inside[v] = true;
    }
    Ok(inside)
}

fn proper(g: &Graph, inside: &[bool]) -> Result<()> {
    let size = inside.iter().filter(|&&b| b).count();
    if size == 0 || size == g.num_nodes() {
        return invalid("cluster must be a nonempty proper subset of the nodes");
    }
    Ok(())
}

/// Total weight of edges with exactly one endpoint in `cluster`.
pub fn cut(g: &Graph, cluster: &[usize]) -> Result<f64> {
    let inside = membership(g, cluster)?;
    proper(g, &inside)?;
    Ok(g.edges()
        .iter()
        .filter(|&&(u, v, _)| inside[u] != inside[v])
        .map(|e| e.2)
        .sum())
}

/// Sum of weighted degrees over `cluster`.
pub fn volume(g: &Graph, cluster: &[usize]) -> Result<f64> {
    let inside = membership(g, cluster)?;
    Ok((0..g.num_nodes())
        .filter(|&v| inside[v])
        .map(|v| g.weighted_degree(v))
        .sum())
}

/// `cut(A) / min(vol(A), vol(V∖A))`; 0 when both cut and the smaller volume
/// vanish.
pub fn conductance(g: &Graph, cluster: &[usize]) -> Result<f64> {
    let inside = membership(g, cluster)?;
    proper(g, &inside)?;
    let mut cut = 0.0;
    let mut vol_in = 0.0;
    let mut vol_out = 0.0;
    for &(u, v, w) in g.edges() {
        for x in [u, v] {
            if inside[x] {
                vol_in += w;
            } else {
                vol_out += w;
            }
        }
        if inside[u] != inside[v] {
            cut += w;
        }
    }
    let denom: f64 = f64::min(vol_in, vol_out);
    Ok(if denom > 0.0 { cut / denom } else { 0.0 })
}

/// Mean conductance over the clusters of `p`. NaN when `p` has a single
/// cluster, which leaves no proper subset to score.
pub fn conductance_mean(g: &Graph, p: &Partition) -> Result<f64> {
    check(g, p)?;
    if p.num_clusters() < 2 {
        return Ok(f64::NAN);
    }
    let (internal, vol) = cluster_totals(g, p);
    let total: f64 = vol.iter().sum();
    let sum: f64 = internal
        .iter()
        .zip(&vol)
        .map(|(&e, &v)| {
            let cut = v - 2.0 * e;
            let denom = v.min(total - v);
            if denom > 0.0 {
                cut / denom
            } else {
                0.0
            }
        })
        .sum();
    Ok(sum / p.num_clusters() as f64)
}

/// Node-weighted mean of `ρ(C) = m_C / (n_C(n_C−1)/2)`. Singleton clusters
/// contribute ρ = 0 and set the degenerate flag.
pub fn internal_density(g: &Graph, p: &Partition) -> Result<Score> {
    check(g, p)?;
    let mut edges = vec![0usize; p.num_clusters()];
    for &(u, v, _) in g.edges() {
        if p.cluster_of(u) == p.cluster_of(v) {
            edges[p.cluster_of(u)] += 1;
        }
    }
    let sizes = p.sizes();
    let mut degenerate = false;
    let mut acc = 0.0;
    for (c, &n) in sizes.iter().enumerate() {
        if n < 2 {
            degenerate = true;
            continue;
        }
        let rho = edges[c] as f64 / (n as f64 * (n as f64 - 1.0) / 2.0);
        acc += n as f64 * rho;
    }
    let total: usize = sizes.iter().sum();
    let value = if total > 0 { acc / total as f64 } else { 0.0 };
    Ok(Score { value, degenerate })
}
