//! Markov clustering: alternate expansion (matrix power) and inflation
//! (entrywise power, then column normalisation) until the flow matrix stops
//! changing, then read clusters off the attractor rows.
//!
//! The iteration runs on a column-sparse matrix so pruned entries cost
//! nothing; `transition_matrix` returns the dense starting point for callers
//! that want to inspect it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, Partition};
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MclConfig {
    pub expansion: u32,
    pub inflation: f64,
    pub epsilon: f64,
    pub max_rounds: usize,
    /// Entries below this are dropped after each inflation; 0 keeps everything.
    pub prune_threshold: f64,
    pub add_self_loops: bool,
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            expansion: 2,
            inflation: 2.0,
            epsilon: 1e-4,
            max_rounds: 100,
            prune_threshold: 1e-8,
            add_self_loops: true,
        }
    }
}

impl MclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.expansion < 2 {
            return invalid(format!("expansion must be at least 2, got {}", self.expansion));
        }
        if !(self.inflation > 1.0) || !self.inflation.is_finite() {
            return invalid(format!("inflation must exceed 1, got {}", self.inflation));
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.prune_threshold >= 0.0) {
            return invalid("prune threshold must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MclResult {
    pub partition: Partition,
    pub converged: bool,
    pub rounds: usize,
    /// Largest `|Σ_i P_ij − 1|` over columns, recorded after every inflation.
    pub column_sum_errors: Vec<f64>,
    /// Final flow matrix.
    pub flow: SparseColumns,
}

/// Column-major sparse matrix; every column is sorted by row index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseColumns {
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let n = m.rows();
        let cols = (0..m.cols())
            .map(|j| (0..n).filter_map(|i| (m[(i, j)] != 0.0).then(|| (i, m[(i, j)]))).collect())
            .collect();
        Self { n, cols }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let col = &self.cols[j];
        col.binary_search_by_key(&i, |e| e.0).map_or(0.0, |p| col[p].1)
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    fn multiply(&self, rhs: &SparseColumns) -> SparseColumns {
        let n = self.n;
        let cols = rhs
            .cols
            .par_iter()
            .map_init(
                || (vec![0.0; n], vec![false; n], Vec::new()),
                |(acc, seen, touched), col| {
                    for &(k, w) in col {
                        for &(i, v) in &self.cols[k] {
                            if !seen[i] {
                                seen[i] = true;
                                touched.push(i);
                            }
                            acc[i] += v * w;
                        }
                    }
                    touched.sort_unstable();
                    let out: Vec<(usize, f64)> = touched.iter().map(|&i| (i, acc[i])).collect();
                    for &i in touched.iter() {
                        acc[i] = 0.0;
                        seen[i] = false;
                    }
                    touched.clear();
                    out
                },
            )
            .collect();
        SparseColumns { n, cols }
    }

    fn power(&self, e: u32) -> SparseColumns {
        let mut out = self.multiply(self);
        for _ in 2..e {
            out = out.multiply(self);
        }
        out
    }

    /// Raises entries to `r`, normalises, prunes and renormalises each column.
    fn inflate(&mut self, r: f64, prune: f64) {
        self.cols.par_iter_mut().for_each(|col| {
            for e in col.iter_mut() {
                e.1 = e.1.powf(r);
            }
            normalize(col);
            if prune > 0.0 {
                let before = col.len();
                col.retain(|e| e.1 >= prune);
                if col.len() != before {
                    normalize(col);
                }
            }
        });
    }

    fn max_column_error(&self) -> f64 {
        self.cols
            .iter()
            .map(|c| (c.iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn max_abs_diff(&self, other: &SparseColumns) -> f64 {
        self.cols
            .par_iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let (mut p, mut q, mut d) = (0, 0, 0.0f64);
                while p < a.len() || q < b.len() {
                    let ia = a.get(p).map_or(usize::MAX, |e| e.0);
                    let ib = b.get(q).map_or(usize::MAX, |e| e.0);
                    if ia == ib {
                        d = d.max((a[p].1 - b[q].1).abs());
                        p += 1;
                        q += 1;
                    } else if ia < ib {
                        d = d.max(a[p].1.abs());
                        p += 1;
                    } else {
                        d = d.max(b[q].1.abs());
                        q += 1;
                    }
                }
                d
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn normalize(col: &mut [(usize, f64)]) {
    let s: f64 = col.iter().map(|e| e.1).sum();
    if s > 0.0 {
        col.iter_mut().for_each(|e| e.1 /= s);
    }
}

fn transition_columns(g: &Graph, add_self_loops: bool) -> Result<SparseColumns> {
    let n = g.num_nodes();
    let mut cols = Vec::with_capacity(n);
    for u in 0..n {
        let deg = g.degree(u) + usize::from(add_self_loops);
        if deg == 0 {
            return Err(Error::IsolatedNode(u));
        }
        let w = 1.0 / deg as f64;
        let mut col: Vec<(usize, f64)> = g.neighbors(u).iter().map(|&v| (v, w)).collect();
        if add_self_loops {
            col.push((u, w));
        }
        col.sort_unstable_by_key(|e| e.0);
        cols.push(col);
    }
    Ok(SparseColumns { n, cols })
}

/// Column-stochastic random-walk matrix: `M_vu = 1/deg(u)` for every edge,
/// with an extra unit self-loop per node when requested.
pub fn transition_matrix(g: &Graph, add_self_loops: bool) -> Result<DenseMatrix> {
    Ok(transition_columns(g, add_self_loops)?.to_dense())
}

pub fn mcl(g: &Graph, cfg: &MclConfig) -> Result<MclResult> {
    cfg.validate()?;
    let mut p = transition_columns(g, cfg.add_self_loops)?;
    let mut converged = false;
    let mut rounds = 0;
    let mut column_sum_errors = Vec::new();
    while rounds < cfg.max_rounds {
        let mut next = p.power(cfg.expansion);
        next.inflate(cfg.inflation, cfg.prune_threshold);
        column_sum_errors.push(next.max_column_error());
        rounds += 1;
        let change = next.max_abs_diff(&p);
        p = next;
        if change <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    let partition = extract_clusters(&p, cfg.epsilon);
    Ok(MclResult {
        partition,
        converged,
        rounds,
        column_sum_errors,
        flow: p,
    })
}

/// Attractors are nodes with diagonal flow above `eps`; each node joins the
/// lowest-index attractor whose row holds more than `eps` in its column.
/// Nodes nobody attracts become singletons.
pub fn extract_clusters(p: &SparseColumns, eps: f64) -> Partition {
    let n = p.size();
    let mut owner = vec![usize::MAX; n];
    for j in 0..n {
        for &(i, v) in p.column(j) {
            if v > eps && p.get(i, i) > eps {
                owner[j] = i;
                break;
            }
        }
    }
    let labels: Vec<usize> = owner.iter().enumerate().map(|(j, &a)| if a == usize::MAX { j } else { a }).collect();
    Partition::from_labels(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_examples() {
        let path = Graph::from_edges(&[(0, 1)], 2).unwrap();
        let m = transition_matrix(&path, false).unwrap();
        assert_eq!(m.data(), &[0.0, 1.0, 1.0, 0.0]);
        let tri = Graph::from_edges(&[(0, 1), (1, 2), (0, 2)], 3).unwrap();
        let m = transition_matrix(&tri, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }
        let m = transition_matrix(&tri, true).unwrap();
        assert!(m.data().iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn isolated_node_needs_self_loops() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        assert!(matches!(transition_matrix(&g, false), Err(Error::IsolatedNode(2))));
        let r = mcl(&g, &MclConfig::default()).unwrap();
        assert_eq!(r.partition.num_clusters(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        let cfg = MclConfig {
            inflation: 1.0,
            ..MclConfig::default()
        };
        assert!(mcl(&g, &cfg).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], 6).unwrap();
        let cfg = MclConfig {
            max_rounds: 1,
            ..MclConfig::default()
        };
        let r = mcl(&g, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.rounds, 1);
    }
}
