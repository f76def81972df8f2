//! Minimal dense solves for the exact average-reward oracles. Matrices here
//! are at most a few hundred rows (net sizes), so LU with partial pivoting
//! is plenty.

use crate::error::{Error, Result};

/// Solve `A x = b` for square row-major `a`, destroying nothing the caller
/// owns. Returns an error on (numerically) singular systems.
pub(crate) fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let cols = vec![b.to_vec()];
    Ok(solve_multi(a, &cols)?.pop().unwrap())
}

/// Solve `A X = B` for several right-hand sides sharing one factorization.
pub(crate) fn solve_multi(a: &[f64], rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = rhs.first().map(|c| c.len()).unwrap_or(0);
    if a.len() != n * n {
        return Err(Error::Dimension(format!(
            "matrix has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let (mut pivot_row, mut pivot_abs) = (col, lu[perm[col] * n + col].abs());
        for row in col + 1..n {
            let v = lu[perm[row] * n + col].abs();
            if v > pivot_abs {
                pivot_row = row;
                pivot_abs = v;
            }
        }
        if pivot_abs < 1e-300 {
            return Err(Error::Invalid("singular linear system".into()));
        }
        perm.swap(col, pivot_row);
        let pr = perm[col];
        let pivot = lu[pr * n + col];
        for row in col + 1..n {
            let r = perm[row];
            let factor = lu[r * n + col] / pivot;
            lu[r * n + col] = factor;
            for k in col + 1..n {
                lu[r * n + k] -= factor * lu[pr * n + k];
            }
        }
    }

    let mut out = Vec::with_capacity(rhs.len());
    for b in rhs {
        if b.len() != n {
            return Err(Error::Dimension("rhs length mismatch".into()));
        }
        // forward substitution on the permuted system
        let mut y = vec![0.0; n];
        for row in 0..n {
            let r = perm[row];
            let mut acc = b[r];
            for k in 0..row {
                acc -= lu[r * n + k] * y[k];
            }
            y[row] = acc;
        }
        // back substitution
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let r = perm[row];
            let mut acc = y[row];
            for k in row + 1..n {
                acc -= lu[r * n + k] * x[k];
            }
            x[row] = acc / lu[r * n + row];
        }
        out.push(x);
    }
    Ok(out)
}
