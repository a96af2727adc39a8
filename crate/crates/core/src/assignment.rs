//! Maximum-weight bipartite assignment on integer matrices.
//!
//! Kuhn–Munkres with row/column potentials, O(n^3). Weights must be
//! nonnegative; a zero-weight pairing is equivalent to leaving both sides
//! unassigned, which makes zero-padding to a square matrix harmless.

/// Solves the max-weight assignment problem for a rectangular nonnegative
/// matrix. Returns the maximal total weight and, per row, the assigned
/// column. Rows whose best use is a zero-weight cell come back as `None`.
pub fn max_assignment(weights: &[Vec<i64>]) -> (i64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0, vec![None; rows]);
    }
    debug_assert!(weights.iter().all(|r| r.len() == cols));
    debug_assert!(weights.iter().flatten().all(|&w| w >= 0));

    let dim = rows.max(cols);
    // Minimize negated weights over the zero-padded square matrix.
    let cost = |r: usize, c: usize| -> i64 {
        if r < rows && c < cols {
            -weights[r][c]
        } else {
            0
        }
    };

    const INF: i64 = i64::MAX / 4;
    // 1-based arrays with column 0 as the virtual root of each
    // augmenting-path search.
    let mut row_potential = vec![0i64; dim + 1];
    let mut col_potential = vec![0i64; dim + 1];
    let mut row_for_col = vec![0usize; dim + 1];
    let mut prev_col = vec![0usize; dim + 1];

    for row in 1..=dim {
        row_for_col[0] = row;
        let mut j0 = 0usize;
        let mut min_reduced = vec![INF; dim + 1];
        let mut visited = vec![false; dim + 1];
        loop {
            visited[j0] = true;
            let i0 = row_for_col[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=dim {
                if visited[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - row_potential[i0] - col_potential[j];
                if reduced < min_reduced[j] {
                    min_reduced[j] = reduced;
                    prev_col[j] = j0;
                }
                if min_reduced[j] < delta {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for j in 0..=dim {
                if visited[j] {
                    row_potential[row_for_col[j]] += delta;
                    col_potential[j] -= delta;
                } else {
                    min_reduced[j] -= delta;
                }
            }
            j0 = j1;
            if row_for_col[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path back to the root, flipping matches.
        loop {
            let j1 = prev_col[j0];
            row_for_col[j0] = row_for_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assigned = vec![None; rows];
    let mut total = 0i64;
    for j in 1..=dim {
        let i = row_for_col[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols && weights[i - 1][j - 1] > 0 {
            total += weights[i - 1][j - 1];
            assigned[i - 1] = Some(j - 1);
        }
    }
    (total, assigned)
}

/// The maximal total weight alone.
pub fn max_assignment_value(weights: &[Vec<i64>]) -> i64 {
    max_assignment(weights).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over all injective row→column assignments.
    fn brute_force(weights: &[Vec<i64>]) -> i64 {
        fn go(weights: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
            if row == weights.len() {
                return 0;
            }
            // Leave this row unassigned.
            let mut best = go(weights, row + 1, used);
            for col in 0..used.len() {
                if !used[col] {
                    used[col] = true;
                    best = best.max(weights[row][col] + go(weights, row + 1, used));
                    used[col] = false;
                }
            }
            best
        }
        let cols = weights.first().map_or(0, Vec::len);
        go(weights, 0, &mut vec![false; cols])
    }

    #[test]
    fn solves_hand_example() {
        let w = vec![vec![4000, 0], vec![1000, 5000]];
        let (total, assigned) = max_assignment(&w);
        assert_eq!(total, 9000);
        assert_eq!(assigned, vec![Some(0), Some(1)]);
    }

    #[test]
    fn empty_matrix() {
        assert_eq!(max_assignment(&[]), (0, vec![]));
        assert_eq!(max_assignment(&[vec![], vec![]]), (0, vec![None, None]));
    }

    #[test]
    fn all_zero_leaves_everything_unassigned() {
        let w = vec![vec![0, 0], vec![0, 0]];
        let (total, assigned) = max_assignment(&w);
        assert_eq!(total, 0);
        assert_eq!(assigned, vec![None, None]);
    }

    #[test]
    fn matches_brute_force_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let rows = rng.gen_range(0..=6);
            let cols = rng.gen_range(0..=6);
            let w: Vec<Vec<i64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..50)).collect())
                .collect();
            assert_eq!(max_assignment_value(&w), brute_force(&w), "matrix {w:?}");
        }
    }

    #[test]
    fn wide_and_tall_matrices() {
        let wide = vec![vec![3, 7, 2, 9]];
        assert_eq!(max_assignment(&wide), (9, vec![Some(3)]));
        let tall = vec![vec![3], vec![7], vec![2], vec![9]];
        assert_eq!(max_assignment(&tall), (9, vec![None, None, None, Some(0)]));
    }
}
