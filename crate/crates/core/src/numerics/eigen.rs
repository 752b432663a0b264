//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL iterations (the EISPACK `tred2`/`tql2` pair).
//!
//! The working matrix is kept transposed relative to the textbook layout so
//! that the O(n³) inner loops walk contiguous rows; eigenvector `j` ends up in
//! row `j` of the workspace.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Eigenpairs sorted by ascending eigenvalue; column `i` of `vectors` pairs
/// with `values[i]`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_QL_SWEEPS: usize = 60;

/// The `k` algebraically smallest eigenpairs of a symmetric matrix.
///
/// Each eigenvector is unit-norm and its largest-magnitude entry is positive
/// (first such entry on ties), which pins the sign deterministically.
pub fn sym_eigs_smallest(m: &DenseMatrix, k: usize) -> Result<EigenPairs> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::Shape {
            op: "sym_eigs_smallest",
            left: m.shape(),
            right: (m.cols(), m.rows()),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let (values, rows) = decompose(m)?;
    let mut vectors = DenseMatrix::zeros(n, k);
    for j in 0..k {
        let v = &rows[j * n..(j + 1) * n];
        let sign = pinned_sign(v);
        for i in 0..n {
            vectors.set(i, j, sign * v[i]);
        }
    }
    Ok(EigenPairs {
        values: values[..k].to_vec(),
        vectors,
    })
}

/// Full spectrum, ascending.
pub fn sym_eigen(m: &DenseMatrix) -> Result<EigenPairs> {
    sym_eigs_smallest(m, m.rows())
}

fn pinned_sign(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

/// Returns ascending eigenvalues and a row-major buffer whose row `j` is the
/// unit eigenvector of eigenvalue `j`.
fn decompose(m: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.rows();
    // Symmetrize exactly so the transposed workspace equals the input.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 1 {
        return Ok((vec![w[0]], vec![1.0]));
    }
    tridiagonalize(n, &mut w, &mut d, &mut e);
    ql_implicit(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut rows = Vec::with_capacity(n * n);
    for &i in &order {
        rows.extend_from_slice(&w[i * n..(i + 1) * n]);
    }
    Ok((values, rows))
}

// `w[j * n + k]` plays the role of V[k][j] in the column-oriented original.
fn tridiagonalize(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |j: usize, k: usize| j * n + k;
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
                w[at(i, j)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                w[at(i, j)] = f;
                g = e[j] + w[at(j, j)] * f;
                let col = &w[at(j, j + 1)..at(j, i)];
                for (off, &v) in col.iter().enumerate() {
                    let k = j + 1 + off;
                    g += v * d[k];
                    e[k] += v * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut w[at(j, j)..at(j, i)];
                for (off, v) in col.iter_mut().enumerate() {
                    let k = j + off;
                    *v -= f * e[k] + g * d[k];
                }
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    let mut g_row = vec![0.0; n];
    for i in 0..n - 1 {
        w[at(i, n - 1)] = w[at(i, i)];
        w[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            let (head, tail) = w.split_at_mut(at(i + 1, 0));
            let next = &tail[..=i];
            for k in 0..=i {
                d[k] = next[k] / h;
            }
            for (j, gj) in g_row.iter_mut().enumerate().take(i + 1) {
                let col = &head[at(j, 0)..=at(j, i)];
                *gj = next.iter().zip(col).map(|(a, b)| a * b).sum();
            }
            for j in 0..=i {
                let g = g_row[j];
                let col = &mut head[at(j, 0)..=at(j, i)];
                for (v, &dk) in col.iter_mut().zip(d.iter()) {
                    *v -= g * dk;
                }
            }
        }
        for k in 0..=i {
            w[at(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
        w[at(j, n - 1)] = 0.0;
    }
    w[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is zero, so m < n always holds here.
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence(l));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFault("non-finite eigenvalue".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn diagonal_matrix_spectrum() {
        let m = DenseMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        let ep = sym_eigen(&m).unwrap();
        assert_eq!(ep.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(ep.vector(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn residuals_and_orthogonality() {
        for seed in 0..5 {
            let n = 3 + seed as usize * 7;
            let m = random_symmetric(n, seed);
            let ep = sym_eigen(&m).unwrap();
            for w in ep.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
            for i in 0..n {
                let v = ep.vector(i);
                let mv = m.mat_vec(&v);
                let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - ep.values[i] * b).powi(2)).sum::<f64>().sqrt();
                assert!(res < 1e-10, "residual {res}");
                for j in 0..i {
                    let dot: f64 = v.iter().zip(ep.vector(j)).map(|(a, b)| a * b).sum();
                    assert!(dot.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sign_convention_pins_largest_entry_positive() {
        let m = random_symmetric(6, 11);
        let ep = sym_eigs_smallest(&m, 3).unwrap();
        for j in 0..3 {
            let v = ep.vector(j);
            let big = v.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_and_bad_k() {
        let m = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(sym_eigs_smallest(&m, 1), Err(Error::NotSymmetric(_))));
        let s = DenseMatrix::identity(2);
        assert!(sym_eigs_smallest(&s, 0).is_err());
        assert!(sym_eigs_smallest(&s, 3).is_err());
    }

    #[test]
    fn one_by_one() {
        let m = DenseMatrix::from_rows(&[[4.5]]).unwrap();
        let ep = sym_eigen(&m).unwrap();
        assert_eq!(ep.values, vec![4.5]);
        assert_eq!(ep.vector(0), vec![1.0]);
    }
}
