//! Minimum-cost perfect matching on a square cost matrix.
//!
//! Shortest augmenting path formulation with row/column potentials,
//! O(n^3) overall.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("cost matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `row_to_col[j]` is the column assigned to row `j`.
    pub row_to_col: Vec<usize>,
    pub cost: T,
}

/// Solves `min sum c[j,k] a[j,k]` over permutation matrices `a`.
pub fn hungarian<T: Real>(cost: &DMatrix<T>) -> Result<Assignment<T>, AssignmentError> {
    let (rows, cols) = cost.shape();
    if rows != cols {
        return Err(AssignmentError::NotSquare { rows, cols });
    }
    for j in 0..rows {
        for k in 0..cols {
            if !cost[(j, k)].is_finite() {
                return Err(AssignmentError::NonFinite(j, k));
            }
        }
    }
    let n = rows;
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            cost: T::zero(),
        });
    }

    // 1-based with column 0 as the virtual source.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<T>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if minv[j].is_none_or(|m| reduced < m) {
                    minv[j] = Some(reduced);
                    way[j] = j0;
                }
                let m = minv[j].expect("set above");
                if delta.is_none_or(|d| m < d) {
                    delta = Some(m);
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains while augmenting");
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else if let Some(m) = minv[j].as_mut() {
                    *m -= delta;
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (r, &c)| acc + cost[(r, c)]);
    Ok(Assignment {
        row_to_col,
        cost: total,
    })
}
