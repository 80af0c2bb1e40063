//! Allocation from learned predictions of welfare.

mod learner;
mod predictive;
mod regime;
mod risk;
mod sizing;

pub use learner::{LabeledExample, LearnerSpec, LinearModel, NoisyGradientDescent, PrivateLearner, TrainReport};
pub use predictive::{
    cell_partition, ila_predictive, k_eta_bar, predictive_trial, sample_examples, sample_population,
    ula_baseline_realized, ula_predictive, LearningPopulation, PredictiveSetup, PredictiveTrial,
};
pub use regime::{
    classify_regime_learning, ila_modeling_vs_sampling, modeling_vs_sampling, LearningRegime, Recommendation,
};
pub use risk::{risk_decompose, RiskDecomposition};
pub use sizing::{ila_sample_size, ula_sample_size, SampleSize};
