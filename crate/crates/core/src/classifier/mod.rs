//! Small rectifier MLP classifiers over rendered images.

mod brackets;
mod io;
mod model;
mod train;

pub use brackets::BracketSpec;
pub use io::{from_bytes, load_model, save_model, to_bytes, FORMAT_VERSION};
pub use model::{
    continuous_score_from_logits, sigmoid, softmax, Activation, Architecture, Class,
    ClassifierModel, Dense, Normalization, OutputHead, Prediction,
};
pub use train::{evaluate, train, EpochMetrics, TrainConfig, TrainingReport};
