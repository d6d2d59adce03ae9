use std::collections::BTreeMap;
use std::sync::Mutex;

use csasr::decoder::{route_rescore, Hypothesis, NBestList, RescoreModels};
use csasr::graph::GraphTag;
use csasr::rnnlm::{rescore_nbest, RescoreMode, WordScorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic pseudo-probabilities derived from the word strings, with a
/// log of every sentence scored.
pub struct Hashed {
    salt: u64,
    calls: Mutex<Vec<String>>,
}

impl Hashed {
    pub fn new(salt: u64) -> Self {
        Hashed { salt, calls: Mutex::new(Vec::new()) }
    }

    pub fn prob(&self, w: &str, pos: usize) -> f64 {
        let mut h = self.salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ pos as u64;
        for b in w.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
        0.05 + 0.9 * ((h >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn calls(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl WordScorer for Hashed {
    fn word_log_probs(&self, words: &[String]) -> Vec<f64> {
        self.calls.lock().unwrap().push(words.join(" "));
        let mut out: Vec<f64> = words.iter().enumerate().map(|(i, w)| self.prob(w, i).ln()).collect();
        out.push(self.prob("</s>", words.len()).ln());
        out
    }
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn hyp(s: &str, ac: f64, lm: f64, tag: Option<&str>) -> Hypothesis {
    Hypothesis { words: words(s), acoustic_cost: ac, lm_cost: lm, tag: tag.map(|t| GraphTag::new(t).unwrap()) }
}

pub fn random_list(rng: &mut ChaCha8Rng, id: usize, tags: &[&str]) -> NBestList {
    let vocab = ["de", "man", "it", "hûs", "ok", "en"];
    let n = rng.random_range(1..6);
    let hyps = (0..n)
        .map(|_| {
            let len = rng.random_range(1..4);
            let s: Vec<&str> = (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect();
            let tag = if tags.is_empty() { None } else { Some(tags[rng.random_range(0..tags.len())]) };
            hyp(&s.join(" "), rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), tag)
        })
        .collect();
    let mut l = NBestList::new(format!("u{id}"), hyps);
    l.sort();
    l.hyps.dedup_by(|a, b| a.words == b.words);
    l
}

/// Fixed per-sentence word probabilities.
pub struct Table(pub Vec<(Vec<String>, Vec<f64>)>);

impl WordScorer for Table {
    fn word_log_probs(&self, words: &[String]) -> Vec<f64> {
        self.0.iter().find(|(w, _)| w == words).map(|(_, p)| p.iter().map(|x| x.ln()).collect()).unwrap()
    }
}

pub fn models<'a>(rnn: &'a [(&str, Hashed)], ng: &'a [(&str, Hashed)]) -> RescoreModels<'a> {
    RescoreModels {
        rnn: rnn.iter().map(|(k, m)| (k.to_string(), m as &dyn WordScorer)).collect(),
        ngram: ng.iter().map(|(k, m)| (k.to_string(), m as &dyn WordScorer)).collect(),
    }
}

/// Two hypotheses differing in one word whose n-gram and RNN
/// probabilities are ordered oppositely flip rank exactly at
/// `w* = (p1 - p2) / ((p1 - p2) + (q2 - q1))`. Returns the rank-1 word
/// sequences just below and just above `w*`, or `None` for a side that
/// falls outside `[0, 1]`.
pub fn crossover(p2: f64, dp: f64, q1: f64, dq: f64, ctx: f64, delta: f64) -> [Option<Vec<String>>; 2] {
    let (p1, q2) = (p2 + dp, q1 + dq);
    let w_star = dp / (dp + dq);
    let ng = Table(vec![(words("x a"), vec![ctx, p1, ctx]), (words("x b"), vec![ctx, p2, ctx])]);
    let rnn = Table(vec![(words("x a"), vec![ctx, q1, ctx]), (words("x b"), vec![ctx, q2, ctx])]);
    let lm = |p: f64| -(ctx * p * ctx).ln();
    let mut l = NBestList::new("u", vec![hyp("x a", 1.0, lm(p1), None), hyp("x b", 1.0, lm(p2), None)]);
    l.sort();
    [w_star - delta, w_star + delta].map(|w| {
        (0.0..=1.0).contains(&w).then(|| {
            rescore_nbest(&l, &rnn, &ng, w, RescoreMode::Probability).unwrap().hyps[0].words.clone()
        })
    })
}

/// Rescored order recomputed directly from the per-word probabilities:
/// the RNN of the rank-1 tag and each hypothesis' own n-gram model.
pub fn replay(
    list: &NBestList,
    by_tag: &BTreeMap<&str, (&Hashed, &Hashed)>,
    w: f64,
) -> Vec<(f64, Vec<String>)> {
    let tag = |h: &Hypothesis| h.tag.as_ref().map_or("cs", |t| t.name()).to_string();
    let top = tag(&list.hyps[0]);
    let rnn = by_tag[top.as_str()].0;
    let mut out: Vec<(f64, Vec<String>)> = list
        .hyps
        .iter()
        .map(|h| {
            let ng = by_tag[tag(h).as_str()].1;
            let mut total = h.acoustic_cost + h.lm_cost;
            for (i, word) in h.words.iter().map(String::as_str).chain(["</s>"]).enumerate() {
                let (q, p) = (rnn.prob(word, i), ng.prob(word, i));
                total += p.ln() - (w * q + (1.0 - w) * p).ln();
            }
            (total, h.words.clone())
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Largest total-cost difference between routed rescoring and the replay
/// oracle over random tagged lists; infinite if any order differs.
pub fn routed_replay_error(seed: u64, lists: usize, w: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rnn = [("cs", Hashed::new(1)), ("nl", Hashed::new(2)), ("fy", Hashed::new(5))];
    let ng = [("cs", Hashed::new(3)), ("nl", Hashed::new(4)), ("fy", Hashed::new(6))];
    let sets: Vec<NBestList> = (0..lists).map(|i| random_list(&mut rng, i, &["cs", "nl", "fy"])).collect();
    let routed = route_rescore(&sets, &models(&rnn, &ng), w, RescoreMode::Probability).unwrap();
    let by: BTreeMap<&str, (&Hashed, &Hashed)> = rnn.iter().zip(&ng).map(|((k, r), (_, g))| (*k, (r, g))).collect();
    let mut worst: f64 = 0.0;
    for (s, r) in sets.iter().zip(&routed) {
        let want = replay(s, &by, w);
        for (h, (t, words)) in r.hyps.iter().zip(&want) {
            if &h.words != words {
                return f64::INFINITY;
            }
            worst = worst.max((h.total() - t).abs());
        }
    }
    worst
}

/// Whether weight-0 rescoring leaves random lists unchanged in both modes.
pub fn weight_zero_invariant(seed: u64, lists: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rnn, ng) = (Hashed::new(1), Hashed::new(2));
    (0..lists).all(|i| {
        let l = random_list(&mut rng, i, &[]);
        let p = rescore_nbest(&l, &rnn, &ng, 0.0, RescoreMode::Probability).unwrap();
        let ll = rescore_nbest(&l, &rnn, &ng, 0.0, RescoreMode::LogLinear).unwrap();
        let order = |x: &NBestList| x.hyps.iter().map(|h| h.words.clone()).collect::<Vec<_>>();
        p == l && order(&ll) == order(&l)
    })
}
