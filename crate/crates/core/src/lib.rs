//! Double-oracle training for generator/discriminator meta-games.

// `!(x > 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod do_loop;
pub mod error;
pub mod meta_game;
pub mod neural;
pub mod oracles;
pub mod run_dir;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PayoffMatrixF64 = meta_game::PayoffMatrix<f64>;
pub type PayoffMatrixF32 = meta_game::PayoffMatrix<f32>;
pub type MixedStrategyF64 = meta_game::MixedStrategy<f64>;
pub type MixedStrategyF32 = meta_game::MixedStrategy<f32>;
pub type MetaSolutionF64 = meta_game::MetaSolution<f64>;
pub type MetaSolutionF32 = meta_game::MetaSolution<f32>;
pub type MlpF64 = neural::Mlp<f64>;
pub type MlpF32 = neural::Mlp<f32>;
pub type NetworkSnapshotF64 = neural::NetworkSnapshot<f64>;
pub type NetworkSnapshotF32 = neural::NetworkSnapshot<f32>;
pub type RunRecordF64 = do_loop::RunRecord<f64>;
pub type RunRecordF32 = do_loop::RunRecord<f32>;
