//! Prediction metrics, Welch spectra, suppression statistics and
//! mean ± sd comparison tables.

mod metrics;
mod psd;
mod report;
mod suppression;
mod table;

pub use metrics::{mse_r2, mse_r2_traces, Fit, TraceFit};
pub use psd::{band_error, welch, Psd};
pub use report::{EvalConfig, EvalReport, SpectrumPair};
pub use suppression::{suppression_stats, ChannelSuppression, SuppressionStats};
pub use table::{comparison_table, ComparisonTable, RunRecord, TableRow};
