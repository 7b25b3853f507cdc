//! Comparison models: a GRU sequence predictor and loss-ablated Koopman variants.

mod ablation;
mod gru;

pub use ablation::{train_ablation, AblationSpec};
pub use gru::{
    build_batch, gru_cell, hard_sigmoid, history_vector, train_gru, training_starts, CellCache, GruCell, GruConfig,
    GruDoc, GruGrad, GruModel, SequenceBatch,
};
