//! Dense double-precision building blocks with hand-written gradients:
//! matrices, a named parameter store, LSTM and bidirectional LSTM layers,
//! softmax cross-entropy, SGD with clipping and a newbob schedule, a
//! finite-difference gradient checker and text checkpoints.

mod checkpoint;
mod gradcheck;
mod lstm;
mod matrix;
mod params;
mod sgd;
mod softmax;

pub use checkpoint::{read_params, write_params};
pub use gradcheck::{grad_check, grad_check_against, relative_error, GradCheckOptions, GradCheckReport};
pub use lstm::{BiLstmCache, BiLstmLayer, Direction, Linear, LstmCache, LstmLayer, LstmState};
pub use matrix::{axpy, dot, Matrix};
pub use params::{Gradients, Param, ParamId, ParamStore, INIT_SCALE};
pub use sgd::{sgd_step, ExpDecay, Newbob, CLIP_NORM, NEWBOB_START_RATE, NEWBOB_THRESHOLD};
pub use softmax::{log_softmax, log_sum_exp, softmax, softmax_xent};
