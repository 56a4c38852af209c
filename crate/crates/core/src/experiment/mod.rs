//! End-to-end experiment orchestration: configuration profiles, dataset
//! plumbing, run-directory layout, SVG diagnostics, and the runner
//! functions behind each CLI subcommand.

mod ablation;
mod config;
mod pipeline;
mod plots;
mod rundir;
mod runner;

pub use ablation::{run_ablate, AblationRow};
pub use config::{
    CalibrationMethod, DataConfig, ExperimentConfig, InferenceConfig, WindowConfig,
};
pub use pipeline::{
    flatten_predictions, load_labeled_series, predict_windows, prepare_dataset,
    read_event_sidecar, sidecar_path, to_mw, window_seed, write_event_sidecar, WindowPrediction,
};
pub use plots::{interval_trace_svg, reliability_svg, TracePoint};
pub use rundir::RunDir;
pub use runner::{
    run_calibrate, run_evaluate, run_generate, run_predict, run_report, run_train,
    CalibrateOutcome, GenerateOutcome, TrainRunOutcome,
};
