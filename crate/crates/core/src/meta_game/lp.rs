use ndarray::{Array1, Array2};

use super::{MetaSolution, MixedStrategy, PayoffMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exact mixed equilibrium of a zero-sum matrix game.
///
/// Payoffs are shifted so every entry is at least 1, which makes the
/// column player's program
///
/// ```text
/// maximize Σ y_j  s.t.  (U + c) y ≤ 1,  y ≥ 0
/// ```
///
/// feasible at the slack basis and bounded. Its optimum is `1 / (v + c)`;
/// the column mixture is the normalized primal solution and the row
/// mixture is read off the slack reduced costs (the dual). Pivoting follows
/// Bland's rule, so degenerate games terminate and ties resolve to the
/// lowest eligible index.
pub fn solve_zero_sum<T: Scalar>(u: &PayoffMatrix<T>) -> Result<MetaSolution<T>> {
    let (m, n) = u.dim();
    let view = u.view();
    if let Some(v) = view.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("payoff entry {v}")));
    }
    let min = view.iter().copied().fold(T::infinity(), T::min);
    let shift = T::one() - min;

    let width = n + m;
    let rhs = width;
    let mut tab = Array2::<T>::zeros((m, width + 1));
    for i in 0..m {
        for j in 0..n {
            tab[[i, j]] = view[[i, j]] + shift;
        }
        tab[[i, n + i]] = T::one();
        tab[[i, rhs]] = T::one();
    }
    let mut obj = Array1::<T>::zeros(width + 1);
    for j in 0..n {
        obj[j] = -T::one();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let tol = T::pivot_tolerance();

    let max_pivots = 64 * (m + n) * (m + n) + 1024;
    let mut pivots = 0;
    while let Some(enter) = (0..width).find(|&j| obj[j] < -tol) {
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let a = tab[[i, enter]];
            if a <= tol {
                continue;
            }
            let ratio = tab[[i, rhs]] / a;
            leave = match leave {
                None => Some((i, ratio)),
                Some((l, best)) => {
                    let slack = tol * best.abs().max(T::one());
                    if ratio < best - slack || ((ratio - best).abs() <= slack && basis[i] < basis[l])
                    {
                        Some((i, ratio))
                    } else {
                        Some((l, best))
                    }
                }
            };
        }
        let (row, _) = leave.ok_or_else(|| {
            Error::NonFinite("minimax program unbounded; payoff shift failed".into())
        })?;
        pivot(&mut tab, &mut obj, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NonFinite(format!(
                "simplex exceeded {max_pivots} pivots on a {m}x{n} game"
            )));
        }
    }

    let mut y = vec![T::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tab[[i, rhs]];
        }
    }
    let x: Vec<T> = (0..m).map(|i| obj[n + i]).collect();
    let total = obj[rhs];
    if !(total > T::zero()) {
        return Err(Error::NonFinite(format!("degenerate simplex optimum {total}")));
    }
    let sigma_d = MixedStrategy::normalized(y)?;
    let sigma_g = MixedStrategy::normalized(x)?;
    Ok(MetaSolution {
        sigma_g,
        sigma_d,
        value: T::one() / total - shift,
    })
}

fn pivot<T: Scalar>(tab: &mut Array2<T>, obj: &mut Array1<T>, row: usize, col: usize) {
    let p = tab[[row, col]];
    tab.row_mut(row).mapv_inplace(|v| v / p);
    let pivot_row = tab.row(row).to_owned();
    for i in 0..tab.nrows() {
        if i == row {
            continue;
        }
        let f = tab[[i, col]];
        if f != T::zero() {
            tab.row_mut(i).scaled_add(-f, &pivot_row);
        }
    }
    let f = obj[col];
    if f != T::zero() {
        obj.scaled_add(-f, &pivot_row);
    }
}
