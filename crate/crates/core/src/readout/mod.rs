//! Linear readout training and closed-loop prediction, shared by the
//! delay-feature models and the echo state network baseline.

mod esn;
mod model;
mod ridge;
mod snapshot;

pub use esn::{esn_predict, esn_step, esn_train, esn_train_with, Activation, EsnConfig, EsnState, Reservoir, DENSE_RADIUS_LIMIT};
pub use model::{
    predict_closed_loop, train, Forecast, ModelKind, Normalizer, ReadoutModel, TargetMode, TrainConfig, TrainSummary,
};
pub use ridge::{ridge_from_gram, ridge_solve, GramAccumulator, RidgeSolution};
pub use snapshot::{decode_model, inspect, load_model, model_text, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
