//! Immutable undirected graphs, their matrix views and connected components.
//!
//! Storage is compressed sparse rows: node `u`'s neighbours live in
//! `targets[offsets[u]..offsets[u + 1]]`, sorted ascending, with parallel edge
//! weights. Self-loops are dropped at construction and only reappear through
//! the explicit `*WithSelfLoops` matrix views.

mod partition;

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

pub use partition::Partition;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    /// Canonical `(u, v, w)` with `u < v`, in first-seen order.
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    duplicate_edges: usize,
    self_loops_dropped: usize,
}

impl Graph {
    /// Builds a graph from a weighted edge list over nodes `0..n`.
    ///
    /// Edges are undirected; `(u, v)` and `(v, u)` denote the same edge. A
    /// repeated edge keeps its first weight and bumps the duplicate counter.
    /// Self-loops are dropped and counted.
    pub fn build(edge_list: &[(usize, usize, f64)], n: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edge_list.len());
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut duplicate_edges = 0;
        let mut self_loops_dropped = 0;
        for &(u, v, w) in edge_list {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, num_nodes: n });
                }
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument(format!("edge ({u}, {v}) has non-finite weight {w}")));
            }
            if u == v {
                self_loops_dropped += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                edges.push((key.0, key.1, w));
            } else {
                duplicate_edges += 1;
            }
        }

        let mut deg = vec![0usize; n];
        for &(u, v, _) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for u in 0..n {
            offsets[u + 1] = offsets[u] + deg[u];
        }
        let mut fill = offsets[..n].to_vec();
        let mut adj = vec![(0usize, 0.0f64); offsets[n]];
        for &(u, v, w) in &edges {
            adj[fill[u]] = (v, w);
            fill[u] += 1;
            adj[fill[v]] = (u, w);
            fill[v] += 1;
        }
        for u in 0..n {
            adj[offsets[u]..offsets[u + 1]].sort_by_key(|&(t, _)| t);
        }
        let (targets, weights) = adj.into_iter().unzip();

        Ok(Self {
            num_nodes: n,
            edges,
            offsets,
            targets,
            weights,
            duplicate_edges,
            self_loops_dropped,
        })
    }

    /// Unit-weight convenience constructor.
    pub fn from_edges(edge_list: &[(usize, usize)], n: usize) -> Result<Self> {
        let weighted: Vec<_> = edge_list.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::build(&weighted, n)
    }

    pub fn empty(n: usize) -> Self {
        Self::build(&[], n).expect("edgeless graph is always valid")
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn neighbor_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Number of incident edges.
    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.neighbor_weights(u).iter().sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|u| self.degree(u)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|i| self.neighbor_weights(u)[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Repeated edges seen (and ignored) during construction.
    pub fn duplicate_edges(&self) -> usize {
        self.duplicate_edges
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&u| self.degree(u) == 0).collect()
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).num_clusters() <= 1
    }

    /// Induced subgraph on `nodes`; node `i` of the result is `nodes[i]`.
    pub fn subgraph(&self, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.num_nodes];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|&&(u, v, _)| local[u] != usize::MAX && local[v] != usize::MAX)
            .map(|&(u, v, w)| (local[u], local[v], w))
            .collect();
        Self::build(&edges, nodes.len()).expect("local ids are in range")
    }

    /// Relabels node `u` as `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::InvalidArgument("permutation length differs from node count".into()));
        }
        let edges: Vec<_> = self.edges.iter().map(|&(u, v, w)| (perm[u], perm[v], w)).collect();
        Self::build(&edges, self.num_nodes)
    }
}

/// The matrix representations available through [`matrix_view`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Adjacency,
    Degree,
    NormalizedAdjacency,
    Laplacian,
    NormalizedLaplacian,
    AdjacencyWithSelfLoops,
    NormalizedAdjacencyWithSelfLoops,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 7] = [
        MatrixKind::Adjacency,
        MatrixKind::Degree,
        MatrixKind::NormalizedAdjacency,
        MatrixKind::Laplacian,
        MatrixKind::NormalizedLaplacian,
        MatrixKind::AdjacencyWithSelfLoops,
        MatrixKind::NormalizedAdjacencyWithSelfLoops,
    ];

    fn name(self) -> &'static str {
        match self {
            MatrixKind::Adjacency => "adjacency",
            MatrixKind::Degree => "degree",
            MatrixKind::NormalizedAdjacency => "normalized-adjacency",
            MatrixKind::Laplacian => "laplacian",
            MatrixKind::NormalizedLaplacian => "normalized-laplacian",
            MatrixKind::AdjacencyWithSelfLoops => "adjacency-with-self-loops",
            MatrixKind::NormalizedAdjacencyWithSelfLoops => "normalized-adjacency-with-self-loops",
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatrixKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown matrix kind `{s}`")))
    }
}

/// Dense matrix view of `g`. Edges count as 1 regardless of stored weight.
///
/// The normalized kinds fail with [`Error::IsolatedNode`] for the first node
/// whose (possibly self-loop-augmented) degree is zero.
pub fn matrix_view(g: &Graph, kind: MatrixKind) -> Result<DenseMatrix> {
    let n = g.num_nodes();
    let loops = matches!(
        kind,
        MatrixKind::AdjacencyWithSelfLoops | MatrixKind::NormalizedAdjacencyWithSelfLoops
    );
    let deg: Vec<f64> = (0..n).map(|u| g.degree(u) as f64 + if loops { 1.0 } else { 0.0 }).collect();

    let adjacency = || {
        let mut a = DenseMatrix::zeros(n, n);
        for &(u, v, _) in g.edges() {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        if loops {
            for u in 0..n {
                a.set(u, u, 1.0);
            }
        }
        a
    };
    let inv_sqrt = || -> Result<Vec<f64>> {
        deg.iter()
            .enumerate()
            .map(|(u, &d)| if d > 0.0 { Ok(1.0 / d.sqrt()) } else { Err(Error::IsolatedNode(u)) })
            .collect()
    };
    let normalize = |a: &mut DenseMatrix, s: &[f64]| {
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                if v != 0.0 {
                    a.set(i, j, v * s[i] * s[j]);
                }
            }
        }
    };

    Ok(match kind {
        MatrixKind::Adjacency | MatrixKind::AdjacencyWithSelfLoops => adjacency(),
        MatrixKind::Degree => DenseMatrix::from_diagonal(&deg),
        MatrixKind::NormalizedAdjacency | MatrixKind::NormalizedAdjacencyWithSelfLoops => {
            let s = inv_sqrt()?;
            let mut a = adjacency();
            normalize(&mut a, &s);
            a
        }
        MatrixKind::Laplacian => {
            let mut l = adjacency().scale(-1.0);
            for u in 0..n {
                l.set(u, u, deg[u]);
            }
            l
        }
        MatrixKind::NormalizedLaplacian => {
            let s = inv_sqrt()?;
            let mut a = adjacency();
            normalize(&mut a, &s);
            let mut l = a.scale(-1.0);
            for u in 0..n {
                l.set(u, u, 1.0);
            }
            l
        }
    })
}

/// Connected components; component ids follow the smallest node they contain.
pub fn connected_components(g: &Graph) -> Partition {
    let n = g.num_nodes();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    Partition::new(label).expect("component labels are dense")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(&[(0, 1), (1, 2), (0, 2)], 3).unwrap()
    }

    #[test]
    fn triangle_degrees() {
        assert_eq!(triangle().degrees(), vec![2, 2, 2]);
    }

    #[test]
    fn path_degrees() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn reversed_duplicate_is_counted() {
        let g = Graph::from_edges(&[(0, 1), (1, 0)], 2).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.duplicate_edges(), 1);
    }

    #[test]
    fn duplicate_keeps_first_weight() {
        let g = Graph::build(&[(0, 1, 2.5), (1, 0, 7.0)], 2).unwrap();
        assert_eq!(g.edge_weight(1, 0), Some(2.5));
    }

    #[test]
    fn out_of_range_and_self_loops() {
        assert!(matches!(
            Graph::from_edges(&[(0, 3)], 3),
            Err(Error::NodeOutOfRange { node: 3, num_nodes: 3 })
        ));
        let g = Graph::from_edges(&[(0, 0), (0, 1)], 2).unwrap();
        assert_eq!(g.self_loops_dropped(), 1);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn neighbour_lists_are_symmetric_and_sorted() {
        let g = Graph::build(&[(3, 0, 1.0), (2, 0, 2.0), (1, 0, 3.0), (3, 1, 4.0)], 4).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        for u in 0..4 {
            for (&v, &w) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
                assert_eq!(g.edge_weight(v, u), Some(w));
            }
        }
    }

    #[test]
    fn path_views() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        let l = matrix_view(&g, MatrixKind::Laplacian).unwrap();
        assert_eq!(l, DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap());
        let na = matrix_view(&g, MatrixKind::NormalizedAdjacency).unwrap();
        assert_eq!(na, DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
    }

    #[test]
    fn isolated_node_is_named() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        assert!(matches!(
            matrix_view(&g, MatrixKind::NormalizedLaplacian),
            Err(Error::IsolatedNode(2))
        ));
        // self-loops make every degree positive
        let s = matrix_view(&g, MatrixKind::NormalizedAdjacencyWithSelfLoops).unwrap();
        assert_eq!(s.get(2, 2), 1.0);
    }

    #[test]
    fn kinds_parse_from_names() {
        for k in MatrixKind::ALL {
            assert_eq!(k.to_string().parse::<MatrixKind>().unwrap(), k);
        }
        assert!("lapl".parse::<MatrixKind>().is_err());
    }

    #[test]
    fn component_counts() {
        let two = Graph::from_edges(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6).unwrap();
        assert_eq!(connected_components(&two).num_clusters(), 2);
        let path = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert_eq!(connected_components(&path).num_clusters(), 1);
        assert_eq!(connected_components(&Graph::empty(4)).num_clusters(), 4);
    }

    #[test]
    fn subgraph_keeps_internal_edges() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3)], 4).unwrap();
        let s = g.subgraph(&[1, 2, 3]);
        assert_eq!(s.num_edges(), 2);
        assert!(s.has_edge(0, 1) && s.has_edge(1, 2));
    }
}
