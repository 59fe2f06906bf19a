//! Minimal dense tensor engine: hand-written forward/backward for every
//! operation the hierarchical model needs, plain SGD, and gradient checking.

pub mod gradcheck;
pub mod kernels;
pub mod lstm;
pub mod ops;
pub mod optim;
mod rng;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamSet, REL_ERR_FLOOR};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_cell, lstm_cell_backward, lstm_seq_backward,
    lstm_seq_forward, BiLstmOutput, CellCache, LstmCellParams, LstmSeqCache,
};
pub use ops::{
    affine, affine_backward, avgpool_backward, avgpool_time, dropout, dropout_mask, embed_backward,
    embed_lookup, maxpool_backward, maxpool_time, softmax, softmax_xent, softmax_xent_backward,
    DropoutMask,
};
pub use optim::{sgd_step, SgdGroup, StepStats};
pub use rng::RngState;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("id {id} out of range for size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("dropout rate must be in [0, 1), got {0}")]
    DropoutRate(f64),
    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGrad(String),
}
