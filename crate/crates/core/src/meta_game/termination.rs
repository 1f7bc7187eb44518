use serde::{Deserialize, Serialize};

use super::{expected_utility, MixedStrategy, PayoffMatrix};
use crate::error::Result;
use crate::scalar::Scalar;

/// Utility increments of the newest strategies over the equilibrium value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increments<T> {
    /// `U(G[m], σ_d) − U(σ_g, σ_d)`: gain of the newest generator row.
    pub gen_inc: T,
    /// `−U(σ_g, D[n]) + U(σ_g, σ_d)`: gain of the newest discriminator
    /// column, in the discriminator's own (negated) payoff.
    pub dis_inc: T,
}

impl<T: Scalar> Increments<T> {
    /// `genInc < ε && −disInc < ε`, evaluated literally.
    pub fn converged(&self, epsilon: T) -> bool {
        self.gen_inc < epsilon && -self.dis_inc < epsilon
    }
}

/// The increments of the last row and last column of `u` under the given
/// mixtures. Rows/columns `m−1` and `n−1` are taken to be the newest best
/// responses.
pub fn termination_increments<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
) -> Result<Increments<T>> {
    let value = expected_utility(u, sigma_g, sigma_d)?;
    let (m, n) = u.dim();
    let newest_gen = u.row(m - 1).dot(&sigma_d.probs());
    let newest_dis = sigma_g.probs().dot(&u.col(n - 1));
    Ok(Increments {
        gen_inc: newest_gen - value,
        dis_inc: -newest_dis + value,
    })
}

pub fn termination_check<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
    epsilon: T,
) -> Result<bool> {
    Ok(termination_increments(u, sigma_g, sigma_d)?.converged(epsilon))
}
