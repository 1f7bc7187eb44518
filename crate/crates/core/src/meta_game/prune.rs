use super::{MixedStrategy, PayoffMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Result of pruning: the reduced matrix and the surviving original indices
/// (ascending), so callers can drop the same members from their support
/// sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned<T: Scalar> {
    pub matrix: PayoffMatrix<T>,
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

/// Removes minimum-probability strategies from any player whose support
/// exceeds `capacity`.
///
/// Every index attaining the minimum is a candidate; candidates are dropped
/// oldest first, but never past `max(2, capacity − 1)` survivors.
pub fn prune<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
    capacity: usize,
) -> Result<Pruned<T>> {
    if capacity < 2 {
        return Err(Error::Config(format!(
            "support capacity must be at least 2, got {capacity}"
        )));
    }
    if sigma_g.len() != u.rows() || sigma_d.len() != u.cols() {
        return Err(Error::Dimension(format!(
            "strategies of length ({}, {}) against a {}x{} matrix",
            sigma_g.len(),
            sigma_d.len(),
            u.rows(),
            u.cols()
        )));
    }
    let kept_rows = survivors(sigma_g, capacity);
    let kept_cols = survivors(sigma_d, capacity);
    let matrix = u.select(&kept_rows, &kept_cols)?;
    Ok(Pruned {
        matrix,
        kept_rows,
        kept_cols,
    })
}

fn survivors<T: Scalar>(sigma: &MixedStrategy<T>, capacity: usize) -> Vec<usize> {
    let len = sigma.len();
    if len <= capacity {
        return (0..len).collect();
    }
    let floor = capacity.saturating_sub(1).max(2);
    let min = sigma.probs().iter().copied().fold(T::infinity(), T::min);
    let mut budget = len.saturating_sub(floor);
    let mut keep = Vec::with_capacity(len);
    for (i, &p) in sigma.probs().iter().enumerate() {
        if p == min && budget > 0 {
            budget -= 1;
        } else {
            keep.push(i);
        }
    }
    keep
}
