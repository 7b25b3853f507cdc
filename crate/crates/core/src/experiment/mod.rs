//! Config-driven orchestration. Each stage writes to
//! `<out>/<stage>/<hash>/`, where the hash covers the stage inputs and
//! its upstream hashes; a completed directory holds a `manifest.json`
//! with per-file digests and is reused on identical reruns.

mod config;
pub mod plot;
mod stages;
mod store;

pub use config::{parse_override, AblationSettings, Case, DataSettings, ExperimentConfig, PlantSettings};
pub use stages::{
    ablate_key, control_key, evaluate_key, predict_key, run_ablate, run_control, run_evaluate, run_plot, run_predict,
    run_simulate, run_train, simulate_key, train_key, ControlReport, StageOutcome,
};
pub use store::{is_complete, open_stage, Manifest, StageKey, StageWriter, MANIFEST};
