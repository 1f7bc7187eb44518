//! Restricted zero-sum meta-game: payoff storage, exact equilibrium
//! computation, augmentation, the termination test and pruning.
//!
//! Entry `(i, j)` of a [`PayoffMatrix`] is the payoff of the row
//! (generator) player when its `i`-th strategy meets the column
//! (discriminator) player's `j`-th strategy. The column player receives
//! the negation.

mod lp;
mod matrix;
mod prune;
mod strategy;
mod termination;

pub use lp::solve_zero_sum;
pub use matrix::PayoffMatrix;
pub use prune::{prune, Pruned};
pub use strategy::{expected_utility, exploitability, MetaSolution, MixedStrategy};
pub use termination::{termination_check, termination_increments, Increments};
