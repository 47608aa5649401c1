//! Sliced anti-symmetric decomposition for implicit-feedback recommendation.
//!
//! A user's preference for item `i` over item `j` is
//! `x_uij = sum_h xi_hu (eta_hi tau_hj - eta_hj tau_hi)`, anti-symmetric in
//! `(i, j)` by construction. Freezing `T` at one recovers the classic
//! pairwise dot-product model.
//!
//! Storage is generic over [`Scalar`] (`f32` or `f64`); arithmetic on the
//! hot paths is carried out in `f64`.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gibbs;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sgd;
pub mod simulation;
pub mod truncnorm;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use data::{
    load_interactions, loo_split, loo_split_with, ImplicitFeedback, InputFormat, InteractionDataset,
    LoadOptions, LooSplit,
};
pub use error::{Result, SadError};
pub use evaluation::{consistency_report, evaluate_split, hit_ratio, rank_m1, score_m2, EvalReport};
pub use gibbs::{run_chain, ConditionalSpec, GibbsConfig, ProbitState};
pub use model::{Direction, FactorMatrix, FactorModel, Observation, Preference};
pub use scalar::Scalar;
pub use sgd::{train, train_bpr, train_observations, TrainConfig, TrainingLog};
pub use simulation::{
    frobenius_mse, generate_truth, run_simulation_study, sparsity, SimKind, SimSpec, SimTruth,
};
pub use truncnorm::sample_truncated_normal;

pub type FactorModelF64 = FactorModel<f64>;
pub type FactorModelF32 = FactorModel<f32>;
pub type FactorMatrixF64 = FactorMatrix<f64>;
pub type FactorMatrixF32 = FactorMatrix<f32>;
