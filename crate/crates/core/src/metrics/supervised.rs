//! Label-based scores: matched accuracy, NMI and ARI.

use serde::{Deserialize, Serialize};

use super::hungarian::max_weight_assignment;
use crate::error::{invalid, Result};

/// A metric value plus a flag set when the formula is undefined for the input
/// and a conventional value was substituted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ok(value: f64) -> Self {
        Self { value, degenerate: false }
    }

    fn degenerate(value: f64) -> Self {
        Self { value, degenerate: true }
    }
}

/// Cross-tabulation of two labelings. Rows follow `y`, columns follow `yhat`,
/// both relabeled densely in first-appearance order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<u64>,
    rows: usize,
    cols: usize,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(y: &[usize], yhat: &[usize]) -> Result<Self> {
        if y.len() != yhat.len() {
            return invalid(format!("label vectors differ in length ({} vs {})", y.len(), yhat.len()));
        }
        if y.is_empty() {
            return invalid("empty labeling");
        }
        let (ry, rows) = dense(y);
        let (rh, cols) = dense(yhat);
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&i, &j) in ry.iter().zip(&rh) {
            counts[i * cols + j] += 1;
            row_sums[i] += 1;
            col_sums[j] += 1;
        }
        Ok(Self {
            counts,
            rows,
            cols,
            row_sums,
            col_sums,
            total: y.len() as u64,
        })
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccMode {
    /// One-to-one matching of clusters to classes.
    Assignment,
    /// Every cluster maps to its most frequent class.
    Majority,
}

/// Fraction of nodes whose class agrees with the class matched to their cluster.
pub fn accuracy_matched(y: &[usize], yhat: &[usize], mode: AccMode) -> Result<f64> {
    let t = ContingencyTable::new(y, yhat)?;
    let hits = match mode {
        AccMode::Assignment => {
            let k = t.rows.max(t.cols);
            let mut w = vec![0i64; k * k];
            for j in 0..t.cols {
                for i in 0..t.rows {
                    w[j * k + i] = t.count(i, j) as i64;
                }
            }
            max_weight_assignment(&w, k).0 as u64
        }
        AccMode::Majority => (0..t.cols)
            .map(|j| (0..t.rows).map(|i| t.count(i, j)).max().unwrap_or(0))
            .sum(),
    };
    Ok(hits as f64 / t.total as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with geometric-mean normalization.
///
/// A labeling with a single group has zero entropy; the score is then 0 and
/// flagged degenerate.
pub fn nmi(y: &[usize], yhat: &[usize]) -> Result<Score> {
    let t = ContingencyTable::new(y, yhat)?;
    let n = t.total as f64;
    let hy = entropy(&t.row_sums, n);
    let hh = entropy(&t.col_sums, n);
    if hy <= 0.0 || hh <= 0.0 {
        return Ok(Score::degenerate(0.0));
    }
    let mut mi = 0.0;
    for i in 0..t.rows {
        for j in 0..t.cols {
            let c = t.count(i, j);
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok(Score::ok((mi / (hy * hh).sqrt()).clamp(0.0, 1.0)))
}

fn pairs(c: u64) -> f64 {
    (c as f64) * (c.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index.
///
/// When the expected index equals its maximum (for example two all-singleton
/// labelings) the ratio is 0/0; the score is then 0 and flagged degenerate.
pub fn ari(y: &[usize], yhat: &[usize]) -> Result<Score> {
    if y.len() < 2 {
        return invalid("ARI needs at least two nodes");
    }
    let t = ContingencyTable::new(y, yhat)?;
    let a: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let b: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let c: f64 = t.counts.iter().map(|&c| pairs(c)).sum();
    let expected = a * b / pairs(t.total);
    let denom = 0.5 * (a + b) - expected;
    if denom.abs() <= 1e-12 * (0.5 * (a + b)).max(1.0) {
        return Ok(Score::degenerate(0.0));
    }
    Ok(Score::ok((c - expected) / denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_mismatch_scores_full_accuracy() {
        let y = [1, 0, 0];
        let yhat = [0, 1, 1];
        assert_eq!(accuracy_matched(&y, &yhat, AccMode::Assignment).unwrap(), 1.0);
    }

    #[test]
    fn majority_allows_many_to_one() {
        let y = [0, 0, 0, 1, 1, 1];
        let yhat = [0, 1, 2, 3, 3, 3];
        assert_eq!(accuracy_matched(&y, &yhat, AccMode::Majority).unwrap(), 1.0);
        assert!((accuracy_matched(&y, &yhat, AccMode::Assignment).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(accuracy_matched(&[], &[], AccMode::Assignment).is_err());
        assert!(nmi(&[0, 1], &[0]).is_err());
        assert!(ari(&[0], &[0]).is_err());
    }

    #[test]
    fn nmi_identity_and_independence() {
        let y = [0, 0, 1, 1];
        assert!((nmi(&y, &y).unwrap().value - 1.0).abs() < 1e-15);
        let block = [0, 0, 0, 0, 1, 1, 1, 1];
        let alt = [0, 1, 0, 1, 0, 1, 0, 1];
        assert!(nmi(&block, &alt).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn nmi_single_cluster_is_flagged() {
        let s = nmi(&[0, 1, 2], &[0, 0, 0]).unwrap();
        assert_eq!(s, Score { value: 0.0, degenerate: true });
    }

    #[test]
    fn ari_identity_relabel_and_degenerate() {
        let y = [0, 0, 1, 1, 2];
        assert!((ari(&y, &y).unwrap().value - 1.0).abs() < 1e-15);
        assert!((ari(&y, &[4, 4, 9, 9, 0]).unwrap().value - 1.0).abs() < 1e-15);
        let s = ari(&[0, 1, 2], &[2, 1, 0]).unwrap();
        assert!(s.degenerate);
    }
}
