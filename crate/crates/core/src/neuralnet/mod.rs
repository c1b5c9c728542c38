//! Small convolutional/dense networks with hand-written backpropagation.
//!
//! Parameters are `f32` for training and inference. Gradient checks cast a
//! model to `f64` and compare against central differences.

mod gradcheck;
mod layers;
mod model;
mod predictor;
mod tensor;
mod train;

pub use gradcheck::{grad_check, grad_check_suite, probe, GradCheckReport, Probe, ProbeKind, SuiteRow};
pub use layers::LayerSpec;
pub use model::{build_model, layer_budget, Model, ModelInput, ModelSpec, Trace, RASTER_CHANNELS, RASTER_FEATURES, VECTOR_CHANNELS};
pub use predictor::{Normalization, Predictor, Standardizer, CHECKPOINT_FORMAT};
pub use tensor::{Scalar, Tensor};
pub use train::{evaluate_mse, fit, Example, Examples, FitReport, Optimizer, TrainConfig, Trainer};

use crate::wei::{data_quantity, Step};

/// Input values per receiver for a step.
pub fn count_inputs(step: Step, building_count: usize, raster_dims: (usize, usize)) -> usize {
    data_quantity(step, building_count, raster_dims)
}
