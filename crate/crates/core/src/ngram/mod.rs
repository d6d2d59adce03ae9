//! Backoff n-gram language models.
//!
//! Probabilities are held as log10 values, exactly as they appear in ARPA
//! files. Query results are natural logs.

mod arpa;
mod interp;
mod kn;

pub use arpa::{read_arpa, write_arpa};
pub use interp::interpolate;
pub use kn::{train_kn, KnConfig};

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_10;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// log10 value used for impossible events (ARPA convention).
pub const LOG10_ZERO: f64 = -99.0;

pub type WordId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NgramEntry {
    pub log10_prob: f64,
    /// 0 when the n-gram is not a context.
    pub log10_backoff: f64,
}

#[derive(Clone, Debug)]
pub struct ArpaModel {
    order: usize,
    words: Vec<String>,
    index: HashMap<String, WordId>,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<BTreeMap<Vec<WordId>, NgramEntry>>,
}

impl ArpaModel {
    /// Empty model over `words`; `<s>` and `</s>` are added when missing.
    pub fn new<S: AsRef<str>>(order: usize, words: &[S]) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("n-gram order must be at least 1"));
        }
        let mut m = ArpaModel {
            order,
            words: Vec::new(),
            index: HashMap::new(),
            tables: vec![BTreeMap::new(); order],
        };
        for w in [BOS, EOS] {
            m.add_word(w);
        }
        for w in words {
            m.add_word(w.as_ref());
        }
        Ok(m)
    }

    pub(crate) fn add_word(&mut self, w: &str) -> WordId {
        if let Some(&id) = self.index.get(w) {
            return id;
        }
        let id = self.words.len() as WordId;
        self.words.push(w.to_string());
        self.index.insert(w.to_string(), id);
        id
    }

    pub(crate) fn insert(&mut self, ngram: Vec<WordId>, entry: NgramEntry) {
        let k = ngram.len();
        assert!(k >= 1 && k <= self.order);
        self.tables[k - 1].insert(ngram, entry);
    }

    pub(crate) fn set_backoff(&mut self, ngram: &[WordId], log10_backoff: f64) {
        if let Some(e) = self.tables[ngram.len() - 1].get_mut(ngram) {
            e.log10_backoff = log10_backoff;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_id(&self, w: &str) -> Option<WordId> {
        self.index.get(w).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn has_unk(&self) -> bool {
        self.index.contains_key(UNK)
    }

    /// Every word that can be predicted: the vocabulary minus `<s>`.
    pub fn predictable(&self) -> impl Iterator<Item = WordId> + '_ {
        let bos = self.index[BOS];
        (0..self.words.len() as WordId).filter(move |&w| w != bos)
    }

    pub fn entry(&self, ngram: &[WordId]) -> Option<&NgramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        self.tables[ngram.len() - 1].get(ngram)
    }

    /// The k-grams in deterministic (id-sorted) order.
    pub fn ngrams(&self, k: usize) -> impl Iterator<Item = (&[WordId], &NgramEntry)> {
        self.tables[k - 1].iter().map(|(g, e)| (g.as_slice(), e))
    }

    pub fn num_ngrams(&self, k: usize) -> usize {
        self.tables[k - 1].len()
    }

    /// Maps a token to its id, sending OOVs to `<unk>` when available.
    pub fn lookup(&self, w: &str) -> Option<WordId> {
        self.word_id(w).or_else(|| self.word_id(UNK))
    }

    /// log10 p(w | history) with backoff. Only the last `order - 1`
    /// history words are used.
    pub fn log10_prob(&self, history: &[WordId], w: WordId) -> f64 {
        let keep = self.order - 1;
        let h = &history[history.len().saturating_sub(keep)..];
        let mut acc = 0.0;
        let mut key: Vec<WordId> = Vec::with_capacity(h.len() + 1);
        for start in 0..=h.len() {
            let ctx = &h[start..];
            key.clear();
            key.extend_from_slice(ctx);
            key.push(w);
            if let Some(e) = self.tables[key.len() - 1].get(&key) {
                return acc + e.log10_prob;
            }
            if !ctx.is_empty() {
                if let Some(e) = self.tables[ctx.len() - 1].get(ctx) {
                    acc += e.log10_backoff;
                }
            }
        }
        LOG10_ZERO
    }

    /// Natural-log probability of each word of the sentence followed by
    /// `</s>`; the result has `tokens.len() + 1` entries.
    pub fn sentence_log_probs<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut hist = vec![self.index[BOS]];
        let mut out = Vec::with_capacity(tokens.len() + 1);
        for t in tokens {
            let lp = match self.lookup(t.as_ref()) {
                Some(id) => {
                    let lp = self.log10_prob(&hist, id);
                    hist.push(id);
                    lp
                }
                None => {
                    // Closed vocabulary without <unk>: impossible word, and the
                    // history restarts after it.
                    hist.clear();
                    LOG10_ZERO
                }
            };
            out.push(lp * LN_10);
        }
        out.push(self.log10_prob(&hist, self.index[EOS]) * LN_10);
        out
    }

    /// Total natural-log probability of the sentence including `</s>`.
    pub fn score_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        self.sentence_log_probs(tokens).iter().sum()
    }

    /// `exp(-total log prob / tokens)`, counting one `</s>` per sentence.
    pub fn perplexity<S: AsRef<str>>(&self, text: &[Vec<S>]) -> Result<f64> {
        if text.is_empty() {
            return Err(Error::data("perplexity of empty text"));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for s in text {
            total += self.score_sentence(s);
            count += s.len() + 1;
        }
        Ok((-total / count as f64).exp())
    }
}

/// Splits a corpus into token lines, dropping blank lines.
pub fn tokenize_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|l| !l.is_empty())
        .collect()
}
