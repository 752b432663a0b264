use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

/// Inverse through LU factorization with partial pivoting.
///
/// A pivot whose magnitude falls below `1e-12 · max(1, max|m_ij|)` is reported
/// as [`Error::Singular`] carrying the pivot index.
pub fn inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Shape {
            op: "inverse",
            left: m.shape(),
            right: (m.cols(), m.rows()),
        });
    }
    let n = m.rows();
    let tol = PIVOT_TOL * m.max_abs().max(1.0);
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, lu.get(r, col).abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > tol) {
            return Err(Error::Singular(col));
        }
        if pivot_row != col {
            swap_rows(&mut lu, col, pivot_row);
            perm.swap(col, pivot_row);
        }
        let pivot = lu.get(col, col);
        let (upper, lower) = lu.data_mut().split_at_mut((col + 1) * n);
        let prow = &upper[col * n..];
        for r in lower.chunks_exact_mut(n) {
            let factor = r[col] / pivot;
            r[col] = factor;
            if factor != 0.0 {
                for (x, &p) in r[col + 1..].iter_mut().zip(&prow[col + 1..]) {
                    *x -= factor * p;
                }
            }
        }
    }

    // Solve L·U·X = P·I one block of rows at a time; every update is a row axpy.
    let mut x = DenseMatrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        x.set(i, p, 1.0);
    }
    for i in 0..n {
        let (done, rest) = x.data_mut().split_at_mut(i * n);
        let xi = &mut rest[..n];
        for k in 0..i {
            let l = lu.get(i, k);
            if l != 0.0 {
                for (a, &b) in xi.iter_mut().zip(&done[k * n..(k + 1) * n]) {
                    *a -= l * b;
                }
            }
        }
    }
    for i in (0..n).rev() {
        let (head, tail) = x.data_mut().split_at_mut((i + 1) * n);
        let xi = &mut head[i * n..];
        for k in (i + 1)..n {
            let u = lu.get(i, k);
            if u != 0.0 {
                for (a, &b) in xi.iter_mut().zip(&tail[(k - i - 1) * n..(k - i) * n]) {
                    *a -= u * b;
                }
            }
        }
        let d = lu.get(i, i);
        for a in xi.iter_mut() {
            *a /= d;
        }
    }
    if !x.all_finite() {
        return Err(Error::NumericFault("non-finite entry in inverse".into()));
    }
    Ok(x)
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    let n = m.cols();
    let (lo, hi) = (a.min(b), a.max(b));
    let (head, tail) = m.data_mut().split_at_mut(hi * n);
    head[lo * n..(lo + 1) * n].swap_with_slice(&mut tail[..n]);
}
