use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::{BOS, EOS, UNK};
use crate::nn::{
    log_softmax, read_params, sgd_step, softmax_xent, write_params, Gradients, Linear, LstmLayer, LstmState, Matrix,
    ParamId, ParamStore, CLIP_NORM, INIT_SCALE,
};
use crate::xling::EmbeddingSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-epoch learning-rate multiplier.
    pub decay: f64,
    pub clip: f64,
    pub seed: u64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            hidden: 400,
            epochs: 10,
            learning_rate: 0.1,
            decay: 1.0,
            clip: CLIP_NORM,
            seed: 0,
        }
    }
}

const SPECIAL_ROW_SALT: u64 = 0x5eed_0f_5bec;

pub const ADAPT_EPOCHS: usize = 5;
pub const ADAPT_DECAY: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            epochs: ADAPT_EPOCHS,
            learning_rate: 0.1,
            decay: ADAPT_DECAY,
            seed: 0,
        }
    }
}

/// Frozen embedding lookup, one LSTM layer and a softmax output layer.
///
/// Output vocabulary: the embedding words, then `</s>` and `<unk>` when
/// the space lacks them. `<s>` is an input-only row appended last.
#[derive(Clone, Debug)]
pub struct RnnLm {
    store: ParamStore,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    emb: ParamId,
    lstm: LstmLayer,
    out: Linear,
    bos: usize,
    eos: usize,
    unk: usize,
}

impl RnnLm {
    /// Fresh model over `emb`; special tokens missing from the space get
    /// seeded random rows, frozen together with the ingested ones.
    pub fn new(emb: &EmbeddingSpace, cfg: &RnnConfig) -> Result<Self> {
        if cfg.hidden == 0 {
            return Err(Error::config("hidden size must be positive"));
        }
        let mut vocab: Vec<String> = emb.words().iter().filter(|w| w.as_str() != BOS).cloned().collect();
        for special in [EOS, UNK] {
            if emb.index(special).is_none() {
                vocab.push(special.to_string());
            }
        }
        let d = emb.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SPECIAL_ROW_SALT);
        let mut random_row = || -> Vec<f64> { (0..d).map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE)).collect() };
        let mut rows = Matrix::zeros(vocab.len() + 1, d);
        for (i, w) in vocab.iter().enumerate() {
            let row = match emb.vector(w) {
                Some(v) => v.to_vec(),
                None => random_row(),
            };
            rows.row_mut(i).copy_from_slice(&row);
        }
        let bos_row = emb.vector(BOS).map_or_else(random_row, <[f64]>::to_vec);
        rows.row_mut(vocab.len()).copy_from_slice(&bos_row);

        let mut store = ParamStore::new(cfg.seed);
        store.meta.insert("rnn.vocab".into(), vocab.join(" "));
        let emb_id = store.add("rnn.emb", rows)?;
        store.set_frozen(emb_id, true);
        let lstm = LstmLayer::new(&mut store, "rnn.lstm", d, cfg.hidden)?;
        let out = Linear::new(&mut store, "rnn.out", cfg.hidden, vocab.len())?;
        Self::assemble(store, vocab, emb_id, lstm, out)
    }

    fn assemble(store: ParamStore, vocab: Vec<String>, emb: ParamId, lstm: LstmLayer, out: Linear) -> Result<Self> {
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        if index.len() != vocab.len() {
            return Err(Error::config("duplicate words in RNN LM vocabulary"));
        }
        let eos = index[EOS];
        let unk = index[UNK];
        let bos = vocab.len();
        Ok(RnnLm {
            store,
            vocab,
            index,
            emb,
            lstm,
            out,
            bos,
            eos,
            unk,
        })
    }

    pub fn from_store(store: ParamStore) -> Result<Self> {
        let vocab: Vec<String> = store
            .meta
            .get("rnn.vocab")
            .ok_or_else(|| Error::config("checkpoint is not an RNN LM"))?
            .split(' ')
            .map(str::to_string)
            .collect();
        let emb = store
            .id("rnn.emb")
            .ok_or_else(|| Error::config("missing rnn.emb"))?;
        let lstm = LstmLayer::from_store(&store, "rnn.lstm")?;
        let out = Linear::from_store(&store, "rnn.out")?;
        if out.output_dim(&store) != vocab.len() || store.get(emb).rows() != vocab.len() + 1 {
            return Err(Error::config("RNN LM checkpoint shapes disagree with its vocabulary"));
        }
        Self::assemble(store, vocab, emb, lstm, out)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        write_params(&self.store, w)
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        Self::from_store(read_params(r)?)
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Output vocabulary (words, `</s>`, `<unk>`).
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn embedding(&self) -> &Matrix {
        self.store.get(self.emb)
    }

    pub fn embedding_id(&self) -> ParamId {
        self.emb
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    /// Output index of a word; OOVs map to `<unk>`.
    pub fn word_index(&self, w: &str) -> usize {
        self.index.get(w).copied().unwrap_or(self.unk)
    }

    fn encode<S: AsRef<str>>(&self, sentence: &[S]) -> (Vec<usize>, Vec<usize>) {
        let mut inputs = Vec::with_capacity(sentence.len() + 1);
        let mut targets = Vec::with_capacity(sentence.len() + 1);
        inputs.push(self.bos);
        for w in sentence {
            let i = self.word_index(w.as_ref());
            inputs.push(i);
            targets.push(i);
        }
        targets.push(self.eos);
        (inputs, targets)
    }

    /// Mean cross-entropy of one sentence (with `</s>`) under `store`;
    /// accumulates gradients when asked.
    pub fn loss_with<S: AsRef<str>>(&self, store: &ParamStore, sentence: &[S], grads: Option<&mut Gradients>) -> Result<f64> {
        let (inputs, targets) = self.encode(sentence);
        let emb = store.get(self.emb);
        let xs: Vec<Vec<f64>> = inputs.iter().map(|&i| emb.row(i).to_vec()).collect();
        let (hs, cache) = self.lstm.forward(store, &xs, crate::nn::Direction::Forward)?;
        let logits: Vec<Vec<f64>> = hs.iter().map(|h| self.out.forward(store, h)).collect();
        let (loss, dl) = softmax_xent(&logits, &targets)?;
        if let Some(g) = grads {
            let dh: Vec<Vec<f64>> = hs.iter().zip(&dl).map(|(h, d)| self.out.backward(store, h, d, g)).collect();
            self.lstm.backward(store, &cache, &dh, g, false);
        }
        Ok(loss)
    }

    fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.lstm.hidden_dim())
    }

    /// Consumes one input row and returns the next-word log distribution.
    fn advance(&self, state: &mut LstmState, input: usize) -> Vec<f64> {
        let x = self.store.get(self.emb).row(input);
        *state = self.lstm.step(&self.store, x, state).expect("embedding width matches layer");
        log_softmax(&self.out.forward(&self.store, &state.h))
    }

    /// Natural-log probability of each word then `</s>`.
    pub fn sentence_log_probs<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<f64> {
        let (inputs, targets) = self.encode(sentence);
        let mut state = self.initial_state();
        inputs
            .iter()
            .zip(&targets)
            .map(|(&i, &t)| self.advance(&mut state, i)[t])
            .collect()
    }

    /// Next-word distribution after `<s>` and `history`.
    pub fn next_distribution<S: AsRef<str>>(&self, history: &[S]) -> Vec<f64> {
        let mut state = self.initial_state();
        let mut lp = self.advance(&mut state, self.bos);
        for w in history {
            lp = self.advance(&mut state, self.word_index(w.as_ref()));
        }
        lp.into_iter().map(f64::exp).collect()
    }
}

/// Per-epoch training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LmEpoch {
    pub epoch: usize,
    pub rate: f64,
    pub train_perplexity: f64,
}

fn run_epochs<S: AsRef<str>>(
    model: &mut RnnLm,
    corpus: &[Vec<S>],
    epochs: usize,
    start_rate: f64,
    decay: f64,
    clip: f64,
    seed: u64,
) -> Result<Vec<LmEpoch>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut grads = Gradients::zeros(&model.store);
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let rate = start_rate * decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut nll = 0.0;
        let mut tokens = 0usize;
        for &i in &order {
            grads.clear();
            let s = &corpus[i];
            let loss = model.loss_with(&model.store, s, Some(&mut grads))?;
            nll += loss * (s.len() + 1) as f64;
            tokens += s.len() + 1;
            sgd_step(&mut model.store, &grads, rate, clip)?;
        }
        let ppl = (nll / tokens.max(1) as f64).exp();
        log::info!("rnnlm epoch {epoch}: rate {rate:e} train ppl {ppl:.2}");
        log.push(LmEpoch {
            epoch,
            rate,
            train_perplexity: ppl,
        });
    }
    Ok(log)
}

/// Trains on `corpus` with the embedding layer frozen.
pub fn train_lm<S: AsRef<str>>(corpus: &[Vec<S>], emb: &EmbeddingSpace, cfg: &RnnConfig) -> Result<(RnnLm, Vec<LmEpoch>)> {
    if corpus.is_empty() {
        return Err(Error::data("empty RNN LM training corpus"));
    }
    let mut model = RnnLm::new(emb, cfg)?;
    let log = run_epochs(&mut model, corpus, cfg.epochs, cfg.learning_rate, cfg.decay, cfg.clip, cfg.seed)?;
    Ok((model, log))
}

/// Continues training on `text` with an exponentially decaying rate.
pub fn adapt_lm<S: AsRef<str>>(model: &RnnLm, text: &[Vec<S>], cfg: &AdaptConfig) -> Result<(RnnLm, Vec<LmEpoch>)> {
    let mut adapted = model.clone();
    if text.is_empty() {
        log::warn!("empty adaptation text; model left unchanged");
        return Ok((adapted, Vec::new()));
    }
    let log = run_epochs(&mut adapted, text, cfg.epochs, cfg.learning_rate, cfg.decay, CLIP_NORM, cfg.seed)?;
    Ok((adapted, log))
}

/// `exp` of the mean negative log probability per token, `</s>` included.
pub fn lm_perplexity<S: AsRef<str>>(model: &RnnLm, text: &[Vec<S>]) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::data("perplexity of empty text"));
    }
    let mut nll = 0.0;
    let mut n = 0usize;
    for s in text {
        let lp = model.sentence_log_probs(s);
        nll -= lp.iter().sum::<f64>();
        n += lp.len();
    }
    Ok((nll / n as f64).exp())
}

/// Ancestral sampling at the given temperature until `</s>` or
/// `max_len` words. `<unk>` is never emitted.
pub fn generate_text(model: &RnnLm, n_sentences: usize, seed: u64, temperature: f64, max_len: usize) -> Result<Vec<Vec<String>>> {
    if !(temperature > 0.0) {
        return Err(Error::config("temperature must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let mut state = model.initial_state();
        let mut lp = model.advance(&mut state, model.bos);
        let mut sent = Vec::new();
        while sent.len() < max_len {
            let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = lp
                .iter()
                .enumerate()
                .map(|(i, &l)| if i == model.unk { 0.0 } else { ((l - m) / temperature).exp() })
                .collect();
            let dist = WeightedIndex::new(&weights).map_err(|e| Error::training(format!("sampling failed: {e}")))?;
            let k = dist.sample(&mut rng);
            if k == model.eos {
                break;
            }
            sent.push(model.vocab[k].clone());
            lp = model.advance(&mut state, k);
        }
        out.push(sent);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheckOptions};

    fn space() -> EmbeddingSpace {
        let words: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![(i as f64).sin(), (i as f64).cos(), 0.1 * i as f64]).collect();
        EmbeddingSpace::new(words, Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    fn corpus() -> Vec<Vec<&'static str>> {
        vec![vec!["a", "b", "c"], vec!["b", "c"], vec!["d", "a"], vec!["a", "b", "c", "d"]]
    }

    fn small() -> RnnConfig {
        RnnConfig { hidden: 5, epochs: 3, learning_rate: 0.5, ..Default::default() }
    }

    #[test]
    fn zero_output_layer_gives_vocab_perplexity() {
        let mut m = RnnLm::new(&space(), &small()).unwrap();
        let (w, b) = (m.out.weight(), m.out.bias());
        m.store.get_mut(w).fill(0.0);
        m.store.get_mut(b).fill(0.0);
        let ppl = lm_perplexity(&m, &corpus()).unwrap();
        assert!((ppl - m.vocab().len() as f64).abs() < 1e-9);
    }

    #[test]
    fn embedding_frozen_through_training_and_adaptation() {
        let m0 = RnnLm::new(&space(), &small()).unwrap();
        let before = m0.embedding().clone();
        let (m1, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let (m2, _) = adapt_lm(&m1, &corpus(), &AdaptConfig::default()).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(m1.embedding()), bits(&before));
        assert_eq!(bits(m2.embedding()), bits(&before));
        for (i, w) in ["a", "b", "c", "d"].iter().enumerate() {
            assert_eq!(m2.embedding().row(m2.word_index(w)), space().row(i));
        }
    }

    #[test]
    fn gradient_check_excluding_embeddings() {
        let m = RnnLm::new(&space(), &small()).unwrap();
        let mut store = m.store().clone();
        let sentence = ["a", "c", "b", "zz", "d", "a", "b", "c", "c"];
        let r = grad_check(
            &mut store,
            |s, g| m.loss_with(s, &sentence, g).unwrap(),
            &GradCheckOptions::default(),
        );
        assert!(r.passed(), "{r:?}");
        let emb_entries = m.embedding().len();
        assert_eq!(r.checked, m.store().num_trainable());
        assert!(r.checked > 0 && emb_entries > 0);
    }

    #[test]
    fn adaptation_rates_decay() {
        let (m, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let cfg = AdaptConfig { learning_rate: 0.2, ..Default::default() };
        let (_, log) = adapt_lm(&m, &corpus(), &cfg).unwrap();
        let rates: Vec<f64> = log.iter().map(|e| e.rate).collect();
        assert_eq!(rates.len(), 5);
        for (e, r) in rates.iter().enumerate() {
            assert!((r - 0.2 * 0.8f64.powi(e as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_adaptation_is_noop() {
        let (m, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let empty: Vec<Vec<String>> = Vec::new();
        let (a, log) = adapt_lm(&m, &empty, &AdaptConfig::default()).unwrap();
        assert!(log.is_empty());
        assert_eq!(a.store(), m.store());
    }

    #[test]
    fn distributions_normalized_and_deterministic() {
        let (m, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let p = m.next_distribution(&["a", "b"]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (m2, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        assert_eq!(m.store(), m2.store());
    }

    #[test]
    fn generated_tokens_in_vocab_and_seeded() {
        let (m, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let a = generate_text(&m, 20, 3, 1.0, 10).unwrap();
        assert_eq!(a, generate_text(&m, 20, 3, 1.0, 10).unwrap());
        assert!(a.iter().flatten().all(|w| ["a", "b", "c", "d"].contains(&w.as_str())));
    }

    #[test]
    fn checkpoint_round_trip() {
        let (m, _) = train_lm(&corpus(), &space(), &small()).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = RnnLm::load(buf.as_slice()).unwrap();
        assert_eq!(back.sentence_log_probs(&["a", "b"]), m.sentence_log_probs(&["a", "b"]));
    }
}
