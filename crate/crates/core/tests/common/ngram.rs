use std::collections::BTreeSet;

use csasr::fst::{compose, shortest_path, Arc, Fst, Semiring, SymbolTable};
use csasr::graph::build_grammar_fst;
use csasr::ngram::{read_arpa, train_kn, write_arpa, ArpaModel, KnConfig, WordId, BOS, EOS, UNK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sentences over a small vocabulary with a mild bigram preference so
/// that every order has repeated n-grams.
pub fn random_corpus(seed: u64, sentences: usize, vocab: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let len = rng.random_range(1..=8);
            let mut prev = rng.random_range(0..vocab);
            (0..len)
                .map(|_| {
                    let w = if rng.random_bool(0.5) { (prev + 1) % vocab } else { rng.random_range(0..vocab) };
                    prev = w;
                    format!("w{w}")
                })
                .collect()
        })
        .collect()
}

/// Every history of the model plus the empty one.
pub fn contexts(lm: &ArpaModel) -> Vec<Vec<WordId>> {
    let eos = lm.word_id(EOS).unwrap();
    let mut out = vec![Vec::new()];
    for k in 1..lm.order() {
        out.extend(lm.ngrams(k).map(|(g, _)| g.to_vec()).filter(|g| !g.contains(&eos)));
    }
    out
}

pub fn mass(lm: &ArpaModel, ctx: &[WordId]) -> f64 {
    lm.predictable().map(|w| 10f64.powf(lm.log10_prob(ctx, w))).sum()
}

/// Largest deviation of the hand-computed bigram fixture.
///
/// Corpus `<s> a b </s>` and `<s> b </s>`, discount 0.5 at both orders,
/// vocabulary {a, b, </s>}. Continuation counts a 1, b 2, </s> 1 give
/// unigrams 0.25, 0.5, 0.25.
pub fn bigram_fixture_error() -> f64 {
    let corpus = vec![vec!["a", "b"], vec!["b"]];
    let config = KnConfig { order: 2, discounts: Some(vec![0.5, 0.5]), closed_vocab: true };
    let lm = train_kn(&corpus, &config).unwrap();
    let id = |w: &str| lm.word_id(w).unwrap();
    let p = |h: &[&str], w: &str| {
        let h: Vec<WordId> = h.iter().map(|x| id(x)).collect();
        10f64.powf(lm.log10_prob(&h, id(w)))
    };
    let want = [
        (&[][..], "a", 0.25),
        (&[][..], "b", 0.5),
        (&[][..], EOS, 0.25),
        (&[BOS][..], "a", 0.375),
        (&[BOS][..], "b", 0.5),
        (&[BOS][..], EOS, 0.125),
        (&["a"][..], "b", 0.75),
        (&["a"][..], "a", 0.125),
        (&["a"][..], EOS, 0.125),
        (&["b"][..], EOS, 0.8125),
        (&["b"][..], "a", 0.0625),
        (&["b"][..], "b", 0.125),
    ];
    let mut worst: f64 = 0.0;
    for (h, w, expect) in want {
        worst = worst.max((p(h, w) - expect).abs());
    }
    let bow = |w: &str| 10f64.powf(lm.entry(&[id(w)]).unwrap().log10_backoff);
    worst = worst.max((bow(BOS) - 0.5).abs()).max((bow("b") - 0.25).abs());
    let s = lm.score_sentence(&["a", "b"]);
    worst.max((s - (0.375f64 * 0.75 * 0.8125).ln()).abs())
}

/// Largest `|Σ_w p(w | h) - 1|` over every history of the model.
pub fn normalization_error(lm: &ArpaModel) -> f64 {
    contexts(lm).iter().map(|c| (mass(lm, c) - 1.0).abs()).fold(0.0, f64::max)
}

pub fn round_trip(lm: &ArpaModel) -> ArpaModel {
    let mut buf = Vec::new();
    write_arpa(lm, &mut buf).unwrap();
    read_arpa(buf.as_slice()).unwrap()
}

/// Largest log10 drift of any stored probability or backoff weight after
/// writing and reading the model back.
pub fn arpa_drift(lm: &ArpaModel) -> f64 {
    let back = round_trip(lm);
    let mut worst: f64 = 0.0;
    for k in 1..=lm.order() {
        if back.num_ngrams(k) != lm.num_ngrams(k) {
            return f64::INFINITY;
        }
        for (g, e) in lm.ngrams(k) {
            let words: Option<Vec<WordId>> = g.iter().map(|&w| back.word_id(lm.word(w))).collect();
            let Some(f) = words.and_then(|w| back.entry(&w).copied()) else { return f64::INFINITY };
            worst = worst.max((f.log10_prob - e.log10_prob).abs()).max((f.log10_backoff - e.log10_backoff).abs());
        }
    }
    worst
}

pub fn linear(words: &SymbolTable, sentence: &[String]) -> Fst {
    let mut f = Fst::acceptor(Semiring::Tropical, words.clone());
    let mut s = f.add_state();
    f.set_start(s);
    for w in sentence {
        let l = words.find(w).unwrap();
        let t = f.add_state();
        f.add_arc(s, Arc::new(l, l, 0.0, t));
        s = t;
    }
    f.set_final(s, 0.0);
    f
}

/// True when every word and the sentence end is predicted by an explicit
/// n-gram with the full available history.
pub fn backoff_free(lm: &ArpaModel, sentence: &[String]) -> bool {
    let mut hist = vec![lm.word_id(BOS).unwrap()];
    let targets = sentence.iter().map(|w| lm.word_id(w).unwrap()).chain([lm.word_id(EOS).unwrap()]);
    for w in targets {
        let keep = hist.len().min(lm.order() - 1);
        let mut g = hist[hist.len() - keep..].to_vec();
        g.push(w);
        if lm.entry(&g).is_none() {
            return false;
        }
        hist.push(w);
    }
    true
}

/// Best path cost through the grammar acceptor against `-score_sentence`
/// for every backoff-free sentence of `corpus`: (sentences checked,
/// largest difference).
pub fn grammar_consistency(corpus: &[Vec<String>], order: usize) -> (usize, f64) {
    let lm = train_kn(corpus, &KnConfig::new(order)).unwrap();
    let mut words = SymbolTable::new();
    for w in lm.words() {
        if ![BOS, EOS, UNK].contains(&w.as_str()) {
            words.add(w);
        }
    }
    let g = build_grammar_fst(&lm, &words).unwrap();
    let sentences: BTreeSet<&Vec<String>> = corpus.iter().filter(|s| backoff_free(&lm, s)).collect();
    let mut worst: f64 = 0.0;
    for s in &sentences {
        let c = compose(&linear(&words, s), &g).unwrap();
        let best = shortest_path(&c, 1).unwrap().first().map_or(f64::INFINITY, |p| p.weight);
        worst = worst.max((best + lm.score_sentence(s)).abs());
    }
    (sentences.len(), worst)
}
