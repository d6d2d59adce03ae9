//! Synthetic bilingual data, experiment configuration and the end-to-end
//! experiment runner.

mod config;
mod run;
mod rundir;
mod synth;

pub use config::{
    lm_names, rnn_names, EmbedConfig, EvalSet, ExperimentConfig, NgramSettings, RescoreConfig, RescoreKind,
    SpeechConfig, SystemConfig, BASELINE_RNN, CS_RNN,
};
pub use run::{
    build_embeddings, build_graphs, generate_data, results_table, run_experiment, train_ngrams, train_rnns, write_data,
    EmbedSummary, Embeddings, ExperimentResults, InterpPoint, NgramModels, NgramPerplexity, RnnSummary, SetResult,
    SpeechUtt, SubsetTally, SyntheticData, SystemResult,
};
pub use rundir::{ManifestEntry, RunDir, StageRecord};
pub use synth::{
    gen_corpus, switched_sentence_fraction, token_switch_rate, Corpora, LanguagePair, SyntheticCorpusSpec,
};
