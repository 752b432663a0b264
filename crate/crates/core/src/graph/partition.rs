use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard assignment of every node to exactly one cluster.
///
/// Cluster ids are dense: every id in `[0, num_clusters)` is used and
/// `num_clusters == 1 + max(assignment)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    /// Validates an assignment whose ids are already dense.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let num_clusters = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_clusters];
        for &c in &assignment {
            seen[c] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "cluster id {gap} is unused; ids must be dense in [0, {num_clusters})"
            )));
        }
        Ok(Self {
            assignment,
            num_clusters,
        })
    }

    /// Relabels arbitrary ids densely in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            num_clusters: map.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            num_clusters: usize::from(n > 0),
        }
    }

    #[inline]
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn cluster_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    /// Members of every cluster, each list ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_clusters];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    /// Canonical form: ids renumbered by first appearance. Two partitions are
    /// equal up to relabeling iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        Self::from_labels(&self.assignment)
    }

    pub fn same_clustering(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Self) -> bool {
        if self.num_nodes() != coarser.num_nodes() {
            return false;
        }
        let mut parent = vec![usize::MAX; self.num_clusters];
        for (v, &c) in self.assignment.iter().enumerate() {
            let p = coarser.assignment[v];
            if parent[c] == usize::MAX {
                parent[c] = p;
            } else if parent[c] != p {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_ids_required() {
        assert!(Partition::new(vec![0, 2, 2]).is_err());
        let p = Partition::new(vec![1, 0, 1]).unwrap();
        assert_eq!(p.num_clusters(), 2);
        assert_eq!(p.clusters(), vec![vec![1], vec![0, 2]]);
    }

    #[test]
    fn relabel_and_compare() {
        let a = Partition::from_labels(&[7, 7, 3, 9]);
        assert_eq!(a.assignment(), &[0, 0, 1, 2]);
        let b = Partition::new(vec![2, 2, 0, 1]).unwrap();
        assert!(a.same_clustering(&b));
        assert!(!a.same_clustering(&Partition::single_cluster(4)));
    }

    #[test]
    fn refinement_check() {
        let coarse = Partition::new(vec![0, 0, 1, 1]).unwrap();
        assert!(Partition::singletons(4).refines(&coarse));
        assert!(!Partition::new(vec![0, 1, 1, 2]).unwrap().refines(&coarse));
    }
}
