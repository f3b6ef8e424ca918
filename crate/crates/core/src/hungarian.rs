//! Minimum-cost one-to-one assignment (Kuhn-Munkres with row/column potentials).
//!
//! Rectangular inputs are padded to square with cost 1 and the padded pairs
//! are dropped from the result. Among all optimal assignments the one whose
//! column sequence (read row by row) is lexicographically smallest is
//! returned, so results do not depend on solver internals.

use crate::error::{Error, Result};

const PAD_COST: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Solve the assignment problem for an `n x m` cost matrix given as rows.
///
/// Rows must all have the same length. Non-finite entries are rejected.
pub fn hungarian_match(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    for (i, row) in cost.iter().enumerate() {
        if row.len() != m {
            return Err(Error::InvalidInput(format!(
                "cost matrix row {i} has {} columns, expected {m}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCost { row: i, col: j });
        }
    }
    if n == 0 || m == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }

    let k = n.max(m);
    let square: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i < n && j < m { cost[i][j] } else { PAD_COST })
                .collect()
        })
        .collect();

    let (mut row_to_col, u, v) = solve_square(&square);
    canonicalize(&square, &u, &v, &mut row_to_col);

    let pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < n && j < m)
        .map(|(i, &j)| (i, j))
        .collect();
    let total_cost = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Shortest-augmenting-path Hungarian method on a square matrix.
/// Returns the row->column assignment and the dual potentials, for which
/// `cost[i][j] - u[i] - v[j] >= 0` with equality on assigned pairs.
fn solve_square(a: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let k = a.len();
    // 1-based internally; index 0 is the virtual source.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut col_owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];

    for i in 1..=k {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; k];
    for j in 1..=k {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Move to the lexicographically smallest optimal assignment.
///
/// With optimal potentials, the optimal assignments are exactly the perfect
/// matchings that use only tight edges. Row by row, try each smaller tight
/// column and keep it if an alternating cycle through unfixed rows exists.
fn canonicalize(a: &[Vec<f64>], u: &[f64], v: &[f64], row_to_col: &mut [usize]) {
    let k = a.len();
    let scale = a.iter().flatten().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-10 * scale;
    let tight = |i: usize, j: usize| a[i][j] - u[i] - v[j] <= eps;

    let mut col_to_row = vec![0usize; k];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }

    for i in 0..k {
        let current = row_to_col[i];
        for j in 0..current {
            if !tight(i, j) {
                continue;
            }
            let holder = col_to_row[j];
            if holder < i {
                continue;
            }
            // Find an alternating path from `holder` to column `current`
            // through rows > i, using tight edges.
            let mut visited_cols = vec![false; k];
            visited_cols[j] = true;
            let mut path = Vec::new();
            if find_path(
                holder,
                current,
                i,
                &tight,
                row_to_col,
                &col_to_row,
                &mut visited_cols,
                &mut path,
            ) {
                // path holds (row, new_col) moves for the cycle.
                for &(r, c) in &path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn find_path(
    row: usize,
    target_col: usize,
    fixed_upto: usize,
    tight: &impl Fn(usize, usize) -> bool,
    row_to_col: &[usize],
    col_to_row: &[usize],
    visited_cols: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    let k = row_to_col.len();
    for c in 0..k {
        if visited_cols[c] || c == row_to_col[row] || !tight(row, c) {
            continue;
        }
        visited_cols[c] = true;
        if c == target_col {
            path.push((row, c));
            return true;
        }
        let next = col_to_row[c];
        if next <= fixed_upto {
            continue;
        }
        path.push((row, c));
        if find_path(
            next,
            target_col,
            fixed_upto,
            tight,
            row_to_col,
            col_to_row,
            visited_cols,
            path,
        ) {
            return true;
        }
        path.pop();
    }
    false
}
