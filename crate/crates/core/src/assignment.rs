//! Maximum-weight bipartite assignment (rectangular Hungarian algorithm).
//!
//! Used by the entity-based CEAF metric, which needs the best one-to-one
//! alignment between key and response clusters under a non-negative
//! similarity. The implementation is the O(n²·m) shortest-augmenting-path
//! formulation with dual potentials (Jonker–Volgenant style), run on negated
//! weights so it maximizes.

use alloc::vec;
use alloc::vec::Vec;

/// Find a maximum-total-weight one-to-one assignment for a rectangular
/// weight matrix (`weights[i][j]` = weight of pairing row `i` with column
/// `j`). The smaller side is matched completely, which is optimal whenever
/// weights are non-negative (as they are for cluster similarities).
///
/// Returns the total weight and, for each row, the matched column (or
/// `None` when there are more rows than columns and the row lost out).
///
/// An empty matrix (no rows or no columns) yields weight 0 and no matches.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let n = weights.len();
    let m = weights.first().map_or(0, Vec::len);
    debug_assert!(weights.iter().all(|r| r.len() == m), "weight matrix must be rectangular");
    if n == 0 || m == 0 {
        return (0.0, vec![None; n]);
    }
    if n <= m {
        let cols = solve_min_cost(n, m, &|i, j| -weights[i][j]);
        let total = cols.iter().enumerate().map(|(i, &j)| weights[i][j]).sum();
        (total, cols.into_iter().map(Some).collect())
    } else {
        // more rows than columns: solve the transpose, then invert the map
        let rows_for_col = solve_min_cost(m, n, &|j, i| -weights[i][j]);
        let mut out = vec![None; n];
        let mut total = 0.0;
        for (j, &i) in rows_for_col.iter().enumerate() {
            out[i] = Some(j);
            total += weights[i][j];
        }
        (total, out)
    }
}

/// Minimum-cost complete assignment of `n` rows to `m` columns, `n <= m`.
/// Returns the column chosen for each row.
fn solve_min_cost(n: usize, m: usize, cost: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; p[j] is the row matched to column j (0 = unmatched).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the recorded path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            cols[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(cols.iter().all(|&c| c != usize::MAX));
    cols
}
