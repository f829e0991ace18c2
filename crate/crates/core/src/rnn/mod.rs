//! Stacked-LSTM one-step-ahead position predictor, trained from scratch.
//!
//! Inputs are estimated positions min-max scaled into the unit square.
//! Each LSTM layer runs the standard gate equations; dropout sits on the
//! last LSTM output; a dense head with `tanh` between layers maps the top
//! hidden state to a 2-D output. With `residual` set the output is an
//! offset added to the current input.

mod adam;
mod io;
mod lstm;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{from_json, load_model, save_model, to_json, MODEL_FORMAT, MODEL_VERSION};
pub use lstm::{lstm_step, Gates, LstmState};
pub use model::{
    backward, batch_loss, mse_loss, predict_next, Mode, Normalization, RnnConfig, RnnModel, RnnPredictor, Sequence,
};
pub use tensor::{DenseLayer, LstmLayerParams, Mat, ParamSet, LSTM_TENSOR_NAMES};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};
