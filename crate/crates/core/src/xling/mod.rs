//! Cross-lingual embedding mapping: two monolingual spaces are rotated
//! into a shared space by alternating orthogonal Procrustes solves with
//! nearest-neighbour dictionary induction.

mod mapping;
mod space;
mod toy;

pub use mapping::{
    induce_dictionary, mapping_objective, procrustes_step, seed_dictionary, self_learn, InductionMode, Mapping,
    SelfLearnConfig, SelfLearnResult, TranslationDictionary,
};
pub use space::{cosine, EmbeddingSpace, Normalization};
pub use toy::train_toy_embeddings;
