//! A small LSTM trained with Adam, used to probe the sensitivity of randomly
//! initialized recurrent networks and how easily they fit functions of a
//! given sensitivity.

mod experiments;
mod lstm;
mod train;

pub use experiments::{
    final_level_spearman, learnability_sweep, random_init_bs_distribution, sweep_csv, InitDistribution, InitTrial,
    SweepRow, FUNCTIONS_PER_LEVEL,
};
pub use lstm::{forward, loss_and_gradient, InitMode, LstmParams, GATES};
pub use train::{
    input_sequence, mse, tabulate, train_fit, CheckpointLoss, LossCurve, TrainConfig, HELD_IN_SAMPLE,
    MAX_EXACT_MSE_ARITY,
};
