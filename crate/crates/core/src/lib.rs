//! Code-switching speech recognition back-end.
//!
//! The crate covers the full chain from CTC acoustic posteriors to scored
//! word hypotheses:
//!
//! - [`fst`]: semirings and weighted transducers (compose, union, connect,
//!   n-shortest paths, AT&T text I/O).
//! - [`graph`]: token, lexicon and grammar transducers, `T∘L∘G` search
//!   graphs and tagged multi-graph unions.
//! - [`ngram`]: interpolated Kneser-Ney training, ARPA I/O, scoring and
//!   static interpolation.
//! - [`nn`]: dense double-precision tensors with hand-written backprop,
//!   LSTM layers, SGD with a newbob schedule and a gradient checker.
//! - [`ctc`]: CTC loss and gradient, greedy decoding and a bidirectional
//!   LSTM acoustic model.
//! - [`xling`]: orthogonal cross-lingual embedding mapping by self-learning.
//! - [`rnnlm`]: LSTM language model over a frozen embedding layer, with
//!   adaptation, sampling and n-best rescoring.
//! - [`decoder`]: beam search over search graphs, tag routing and WER.
//! - [`pipeline`]: synthetic bilingual data and the experiment runner.

pub mod ctc;
pub mod decoder;
pub mod error;
pub mod fst;
pub mod graph;
pub mod ngram;
pub mod nn;
pub mod pipeline;
pub mod rnnlm;
pub mod xling;

pub use error::{Error, Result};
