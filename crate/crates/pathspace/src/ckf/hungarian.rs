//! Minimum-cost bipartite matching (Jonker-Volgenant style shortest
//! augmenting paths, O(n^2 m)).

use nalgebra::DMatrix;

/// Cost used for forbidden pairs (e.g. cross-label assignments).
pub const FORBIDDEN: f64 = 1e15;
/// Padding cost for dummy columns when squaring a rectangular problem.
const PAD: f64 = 1e12;

/// Minimum-total-cost assignment of rows to columns. Every row is matched
/// (the matrix is padded internally when rows exceed columns); returns
/// (row, col) pairs for matches within the real column range.
pub fn hungarian(costs: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let rows = costs.nrows();
    let cols = costs.ncols();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Square the problem with padded columns so every row can match.
    let width = cols.max(rows);
    let cost = |r: usize, c: usize| -> f64 {
        if c < cols {
            costs[(r, c)]
        } else {
            PAD
        }
    };

    // job[c] = row assigned to column c; column `width` is the virtual start.
    let mut job: Vec<Option<usize>> = vec![None; width + 1];
    let mut pot_row = vec![0.0f64; rows];
    let mut pot_col = vec![0.0f64; width + 1];

    for new_row in 0..rows {
        let mut cur_col = width;
        job[cur_col] = Some(new_row);
        let mut min_to = vec![f64::INFINITY; width + 1];
        let mut prev = vec![usize::MAX; width + 1];
        let mut in_tree = vec![false; width + 1];

        while let Some(row) = job[cur_col] {
            in_tree[cur_col] = true;
            let mut delta = f64::INFINITY;
            let mut next_col = 0;
            for c in 0..width {
                if in_tree[c] {
                    continue;
                }
                let reduced = cost(row, c) - pot_row[row] - pot_col[c];
                if reduced < min_to[c] {
                    min_to[c] = reduced;
                    prev[c] = cur_col;
                }
                if min_to[c] < delta {
                    delta = min_to[c];
                    next_col = c;
                }
            }
            for c in 0..=width {
                if in_tree[c] {
                    if let Some(r) = job[c] {
                        pot_row[r] += delta;
                    }
                    pot_col[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            cur_col = next_col;
        }
        // Augment along the alternating path.
        while cur_col != width {
            let p = prev[cur_col];
            job[cur_col] = job[p];
            cur_col = p;
        }
    }

    let mut pairs = Vec::new();
    for c in 0..cols {
        if let Some(r) = job[c] {
            pairs.push((r, c));
        }
    }
    pairs.sort_unstable();
    pairs
}
