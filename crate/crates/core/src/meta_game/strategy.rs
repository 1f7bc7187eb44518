use ndarray::{Array1, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PayoffMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability vector over one player's support set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MixedStrategy<T: Scalar> {
    probs: Array1<T>,
}

impl<T: Scalar> MixedStrategy<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStrategy("empty probability vector".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < T::zero())
        {
            return Err(Error::InvalidStrategy(format!("component {i} = {p}")));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::simplex_sum_tolerance() {
            return Err(Error::InvalidStrategy(format!(
                "components sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            probs: Array1::from(probs),
        })
    }

    /// Clips negatives to zero and rescales to unit mass.
    pub fn normalized(weights: Vec<T>) -> Result<Self> {
        let clipped: Vec<T> = weights.into_iter().map(|w| w.max(T::zero())).collect();
        let total: T = clipped.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::InvalidStrategy(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        Self::new(clipped.into_iter().map(|w| w / total).collect())
    }

    pub fn pure(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::Dimension(format!("pure index {index} >= {len}")));
        }
        let mut probs = vec![T::zero(); len];
        probs[index] = T::one();
        Self::new(probs)
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidStrategy("empty support".into()));
        }
        Self::new(vec![T::one() / T::of(len as f64); len])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> ArrayView1<'_, T> {
        self.probs.view()
    }

    pub fn get(&self, i: usize) -> T {
        self.probs[i]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.probs.to_vec()
    }

    /// Appends `extra` zero-probability entries (strategies added after
    /// this mixture was computed).
    pub fn padded(&self, extra: usize) -> Self {
        let mut probs = self.probs.to_vec();
        probs.extend(std::iter::repeat_n(T::zero(), extra));
        Self {
            probs: Array1::from(probs),
        }
    }

    /// Restriction to `keep`, renormalized.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let weights = keep
            .iter()
            .map(|&i| {
                self.probs
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Dimension(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::normalized(weights)
    }

    /// Draws an index with probability proportional to its mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler().sample(rng)
    }

    /// Reusable sampler for repeated draws.
    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.probs.iter().map(|p| p.as_f64()))
            .expect("validated mixed strategy has positive mass")
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for MixedStrategy<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Scalar> From<MixedStrategy<T>> for Vec<T> {
    fn from(s: MixedStrategy<T>) -> Self {
        s.probs.to_vec()
    }
}

/// Equilibrium of a restricted meta-game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MetaSolution<T: Scalar> {
    pub sigma_g: MixedStrategy<T>,
    pub sigma_d: MixedStrategy<T>,
    pub value: T,
}

impl<T: Scalar> MetaSolution<T> {
    /// Guaranteed payoff of `sigma_g`: `min_j σ_gᵀ U e_j`.
    pub fn row_value(&self, u: &PayoffMatrix<T>) -> T {
        u.col_payoffs(self.sigma_g.probs())
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }

    /// Guaranteed ceiling of `sigma_d`: `max_i e_iᵀ U σ_d`.
    pub fn col_value(&self, u: &PayoffMatrix<T>) -> T {
        u.row_payoffs(self.sigma_d.probs())
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max)
    }
}

fn check_dims<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
) -> Result<()> {
    if sigma_g.len() != u.rows() || sigma_d.len() != u.cols() {
        return Err(Error::Dimension(format!(
            "strategies of length ({}, {}) against a {}x{} matrix",
            sigma_g.len(),
            sigma_d.len(),
            u.rows(),
            u.cols()
        )));
    }
    Ok(())
}

/// Generator's expected payoff `σ_gᵀ U σ_d`.
pub fn expected_utility<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
) -> Result<T> {
    check_dims(u, sigma_g, sigma_d)?;
    Ok(sigma_g.probs().dot(&u.row_payoffs(sigma_d.probs())))
}

/// Largest gain either player obtains from a pure deviation.
pub fn exploitability<T: Scalar>(
    u: &PayoffMatrix<T>,
    sigma_g: &MixedStrategy<T>,
    sigma_d: &MixedStrategy<T>,
) -> Result<T> {
    let v = expected_utility(u, sigma_g, sigma_d)?;
    let best_row = u
        .row_payoffs(sigma_d.probs())
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let best_col = u
        .col_payoffs(sigma_g.probs())
        .iter()
        .copied()
        .fold(T::infinity(), T::min);
    Ok((best_row - v).max(v - best_col))
}
