//! LSTM language model over a frozen cross-lingual embedding layer, with
//! adaptation, perplexity, sampling and n-best rescoring.

mod model;
mod rescore;

pub use model::{
    adapt_lm, generate_text, lm_perplexity, train_lm, AdaptConfig, LmEpoch, RnnConfig, RnnLm, ADAPT_DECAY,
    ADAPT_EPOCHS,
};
pub use rescore::{rescore_nbest, rescore_nbest_with, RescoreMode, WordScorer};
