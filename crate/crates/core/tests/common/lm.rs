use std::collections::HashMap;

use csasr::pipeline::{gen_corpus, Corpora, LanguagePair, SyntheticCorpusSpec};
use csasr::rnnlm::{adapt_lm, lm_perplexity, train_lm, AdaptConfig, RnnConfig, RnnLm};
use csasr::xling::{train_toy_embeddings, EmbeddingSpace};

pub struct Bilingual {
    pub corpora: Corpora,
    pub word_lang: HashMap<String, String>,
    pub embeddings: EmbeddingSpace,
}

/// Generated bilingual text with 500 sentences per monolingual side and
/// embeddings trained on all of it.
pub fn bilingual(seed: u64) -> Bilingual {
    let spec = SyntheticCorpusSpec {
        concepts: 80,
        shared: 10,
        mono_a_sentences: 500,
        mono_b_sentences: 500,
        mono_b_large_factor: 1,
        cs_sentences: 600,
        ..Default::default()
    };
    let pair = LanguagePair::generate(&spec, seed).unwrap();
    let corpora = gen_corpus(&pair, seed + 1);
    let all: Vec<Vec<String>> =
        corpora.mono_a.iter().chain(&corpora.mono_b).chain(&corpora.cs).cloned().collect();
    let embeddings = train_toy_embeddings(&all, 16, 2).unwrap();
    Bilingual { corpora, word_lang: pair.lexicon().word_languages(), embeddings }
}

pub fn rnn_config() -> RnnConfig {
    RnnConfig { hidden: 24, epochs: 3, learning_rate: 0.5, decay: 0.7, ..Default::default() }
}

pub struct Adaptation {
    pub base: RnnLm,
    pub adapted: RnnLm,
    pub before: f64,
    pub after: f64,
}

/// Trains on monolingual text, adapts on the first 500 code-switched
/// sentences and measures perplexity on the remaining 100.
pub fn adaptation(data: &Bilingual) -> Adaptation {
    let mono: Vec<Vec<String>> = data.corpora.mono_a.iter().chain(&data.corpora.mono_b).cloned().collect();
    let (train, held_out) = data.corpora.cs.split_at(500);
    let (base, _) = train_lm(&mono, &data.embeddings, &rnn_config()).unwrap();
    let cfg = AdaptConfig { epochs: 3, learning_rate: 0.1, ..Default::default() };
    let (adapted, _) = adapt_lm(&base, train, &cfg).unwrap();
    let before = lm_perplexity(&base, held_out).unwrap();
    let after = lm_perplexity(&adapted, held_out).unwrap();
    Adaptation { base, adapted, before, after }
}
