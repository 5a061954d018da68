//! The repetition-aware transformer: shared encoder, label classifier and
//! label-conditioned decoder, trained on the joint loss.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod params;
pub mod state;
pub mod train;

pub use config::{GammaSchedule, ModelConfig, Variant};
pub use loss::{sample_loss, LossParts, RepetitionLearningMatrix};
pub use network::{Forward, Network, OutputGrads};
pub use params::{Group, Params};
pub use state::ModelState;
pub use train::{classification_accuracy, continue_training, train, LogEntry, TrainOutcome, TrainingExample};
