//! Dense tableau simplex for `max c'x s.t. Ax <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is immediately feasible, so no phase-1 is needed. Bland's
//! rule keeps it cycle-free. This is the validation route for the max-flow
//! LP solver; it is exact enough for the small instances it is used on.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("constraint matrix shape mismatch")]
    ShapeMismatch,
    #[error("right-hand side must be nonnegative, got {0}")]
    NegativeRhs(f64),
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
}

const EPS: f64 = 1e-11;

/// Returns `(x, objective)` maximizing `c'x` subject to `Ax <= b, x >= 0`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64), SimplexError> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(SimplexError::ShapeMismatch);
    }
    if let Some(&bad) = b.iter().find(|&&v| v < 0.0) {
        return Err(SimplexError::NegativeRhs(bad));
    }

    // tableau: m rows of [A | I | b], objective row [-c | 0 | 0]
    let width = n + m + 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        tab[i][..n].copy_from_slice(&a[i]);
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = b[i];
    }
    for j in 0..n {
        tab[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iter = 200 * (n + m).max(50);
    for _ in 0..max_iter {
        // Bland: entering = lowest-index column with negative reduced cost
        let Some(pivot_col) = (0..n + m).find(|&j| tab[m][j] < -EPS) else {
            let mut x = vec![0.0; n];
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] = tab[i][width - 1];
                }
            }
            return Ok((x, tab[m][width - 1]));
        };
        // leaving row: min ratio, ties by lowest basis variable index
        let mut pivot_row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if tab[i][pivot_col] > EPS {
                let ratio = tab[i][width - 1] / tab[i][pivot_col];
                let better = ratio < best_ratio - EPS
                    || (ratio < best_ratio + EPS
                        && pivot_row.is_some_and(|r| basis[i] < basis[r]));
                if better {
                    best_ratio = ratio;
                    pivot_row = Some(i);
                }
            }
        }
        let Some(row) = pivot_row else {
            return Err(SimplexError::Unbounded);
        };
        let pivot = tab[row][pivot_col];
        for value in tab[row].iter_mut() {
            *value /= pivot;
        }
        for i in 0..=m {
            if i != row {
                let factor = tab[i][pivot_col];
                if factor.abs() > EPS {
                    for j in 0..width {
                        tab[i][j] -= factor * tab[row][j];
                    }
                }
            }
        }
        basis[row] = pivot_col;
    }
    Err(SimplexError::IterationLimit)
}
