//! Kuhn–Munkres assignment on integer weights.

/// Maximum-weight perfect matching on a square matrix given row-major.
///
/// Returns `(total, assignment)` where `assignment[row] = column`. Runs the
/// shortest-augmenting-path formulation with row and column potentials in
/// O(n³). Weights are negated into costs so the algorithm minimises.
pub fn max_weight_assignment(weights: &[i64], n: usize) -> (i64, Vec<usize>) {
    assert_eq!(weights.len(), n * n, "weight matrix must be n × n");
    if n == 0 {
        return (0, Vec::new());
    }
    let cost = |i: usize, j: usize| -weights[i * n + j];
    const INF: i64 = i64::MAX / 4;

    // 1-based bookkeeping; column 0 is a virtual source.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| weights[i * n + j]).sum();
    (total, assignment)
}
