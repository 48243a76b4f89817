//! Experiment driver: sampling, metrics, model files and report output.

mod experiment;
mod metrics;
mod sampling;
mod serialize;

pub use experiment::{
    high_fidelity, run_experiment, sweep, train_models, ExperimentConfig, MethodEntry, MethodRuns, MethodSummary, SweepReport, Trained,
    TIMING_PROTOCOL,
};
pub use metrics::{average_residual, average_residual_curve, break_even, rb_accuracy_curve, residual_spectrum, Bep, Spectrum};
pub use sampling::lhs_sample;
pub use serialize::{load_model, model_from_bytes, model_to_bytes, save_model, Model, ModelKind, FORMAT_VERSION};
