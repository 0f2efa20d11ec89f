//! Target detectors: the energy baseline and the shallow CNN.

pub mod cnn;
pub mod energy;
pub mod gradcheck;
pub mod model;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::geometry::Hypothesis;

pub use energy::{classify_energy, energy_statistic, fit_energy_threshold, EnergyDetector, GaussianFit};
pub use gradcheck::{gradient_check, GradientCheck};
pub use model::{cnn_forward, CnnModel, InputNorm};
pub use train::{cnn_train, EpochStats, LabeledTensor, TrainConfig, TrainOutcome, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability_h1: f64,
    pub decision: Hypothesis,
}
