//! Jansen-Rit neural-mass simulation: the synthetic EEG plant.

mod generate;
mod integrate;
mod model;
mod params;
mod trace;

pub use generate::{generate_trace, peak_to_peak, DriveNoise, Plant, SimulationConfig};
pub use integrate::{integrate, integrate_with, InputSignal, Rk4, Trajectory};
pub use model::{
    double_column_rhs, single_column_rhs, ColumnModel, NmmState, OdeSystem, DOUBLE_DIM, SINGLE_DIM,
};
pub use params::{sigmoid, DoubleColumnParams, JansenRitParams};
pub use trace::{meta_path, SimTrace, TraceMeta};
