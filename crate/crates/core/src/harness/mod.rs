//! Training, evaluation, distillation and ablation sweeps.

mod ablation;
mod config;
mod model;
mod train;

pub use ablation::{mean_stdev, run_ablation, AblationCell, AblationRun, AblationTable};
pub use config::{Ablation, TrainConfig, VARIANTS};
pub use model::{Forward, Head, ModelSpec, Output, Prepared, ShineModel};
pub use train::{distill, evaluate, score, train, EpochLosses, Evaluation, RunReport};
