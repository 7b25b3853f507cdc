//! Deep Koopman autoencoder: a learned lifting in which the EEG dynamics
//! evolve (approximately) linearly, `z_{i+1} = K z_i + B u_i`.

mod config;
mod embed;
mod loss;
mod model;
mod operator;
mod predict;
mod spectral;
mod train;

pub use config::LiftingConfig;
pub use embed::{embed_windows, last_sample, window_matrix, window_vector, SnapshotMatrices};
pub use loss::{evaluate_loss, loss_gradient, total_loss, ActiveTerms, LossBreakdown};
pub use model::{KoopmanDoc, KoopmanModel};
pub use operator::{fit_gain_given_operator, fit_input_gain, fit_operator};
pub use predict::{predict, predict_receding, refit_from_history, Prediction};
pub use spectral::{spectral_decomposition, KoopmanMode};
pub use train::{train, train_snapshots, train_with_terms, TrainingHistory};
