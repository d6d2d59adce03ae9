use serde::{Deserialize, Serialize};

use super::RnnLm;
use crate::decoder::NBestList;
use crate::error::{Error, Result};
use crate::graph::GraphTag;
use crate::ngram::ArpaModel;

/// Anything that assigns per-word probabilities to a sentence.
pub trait WordScorer: Sync {
    /// Natural-log probability of each word followed by `</s>`.
    fn word_log_probs(&self, words: &[String]) -> Vec<f64>;
}

impl WordScorer for RnnLm {
    fn word_log_probs(&self, words: &[String]) -> Vec<f64> {
        self.sentence_log_probs(words)
    }
}

impl WordScorer for ArpaModel {
    fn word_log_probs(&self, words: &[String]) -> Vec<f64> {
        self.sentence_log_probs(words)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescoreMode {
    /// Per-word `p = w p_rnn + (1 - w) p_ngram`.
    #[default]
    Probability,
    /// `cost = (1 - w) cost_ngram + w cost_rnn`.
    LogLinear,
}

fn log_mix(w: f64, a: f64, b: f64) -> f64 {
    let x = if w > 0.0 { w.ln() + a } else { f64::NEG_INFINITY };
    let y = if w < 1.0 { (1.0 - w).ln() + b } else { f64::NEG_INFINITY };
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Re-ranks an n-best list with an RNN LM.
///
/// In probability mode each word's n-gram probability inside the LM cost
/// is swapped for the interpolated one, i.e. the LM cost gains
/// `Σ_i [ln p_ngram,i - ln(w p_rnn,i + (1-w) p_ngram,i)]`. Any other graph
/// cost carried by the hypothesis is kept, so `w = 0` is an exact no-op.
/// The list is re-sorted with a stable sort.
pub fn rescore_nbest(
    nbest: &NBestList,
    rnn: &dyn WordScorer,
    ngram: &dyn WordScorer,
    weight: f64,
    mode: RescoreMode,
) -> Result<NBestList> {
    rescore_nbest_with(nbest, rnn, |_| Ok(ngram), weight, mode)
}

/// [`rescore_nbest`] where each hypothesis' graph tag selects the n-gram
/// model it was decoded with.
pub fn rescore_nbest_with<'a, F>(
    nbest: &NBestList,
    rnn: &dyn WordScorer,
    ngram_for: F,
    weight: f64,
    mode: RescoreMode,
) -> Result<NBestList>
where
    F: Fn(Option<&GraphTag>) -> Result<&'a dyn WordScorer>,
{
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::config(format!("rescoring weight {weight} outside [0, 1]")));
    }
    let mut out = nbest.clone();
    for (rank, h) in out.hyps.iter_mut().enumerate() {
        if !h.acoustic_cost.is_finite() || !h.lm_cost.is_finite() {
            return Err(Error::data(format!(
                "utterance {} rank {}: missing or non-finite score",
                nbest.utt_id,
                rank + 1
            )));
        }
        let r = rnn.word_log_probs(&h.words);
        match mode {
            RescoreMode::Probability => {
                let g = ngram_for(h.tag.as_ref())?.word_log_probs(&h.words);
                let mut delta = 0.0;
                for (&ri, &gi) in r.iter().zip(&g) {
                    let mixed = log_mix(weight, ri, gi);
                    if !mixed.is_finite() || !gi.is_finite() {
                        return Err(Error::data(format!(
                            "utterance {}: zero LM probability in hypothesis {}",
                            nbest.utt_id,
                            rank + 1
                        )));
                    }
                    delta += gi - mixed;
                }
                h.lm_cost += delta;
            }
            RescoreMode::LogLinear => {
                let rnn_cost: f64 = -r.iter().sum::<f64>();
                h.lm_cost = (1.0 - weight) * h.lm_cost + weight * rnn_cost;
            }
        }
    }
    out.sort_stable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::Hypothesis;

    struct Fixed(Vec<(Vec<&'static str>, Vec<f64>)>);

    impl WordScorer for Fixed {
        fn word_log_probs(&self, words: &[String]) -> Vec<f64> {
            self.0
                .iter()
                .find(|(w, _)| w.iter().copied().eq(words.iter().map(String::as_str)))
                .map(|(_, p)| p.iter().map(|x| x.ln()).collect())
                .expect("known sentence")
        }
    }

    fn hyp(words: &[&str], ac: f64, lm: f64) -> Hypothesis {
        Hypothesis {
            words: words.iter().map(|s| s.to_string()).collect(),
            acoustic_cost: ac,
            lm_cost: lm,
            tag: None,
        }
    }

    #[test]
    fn hand_example_at_three_quarters() {
        // n-gram: "a b" p = (0.5, 0.2, 0.5), "a c" p = (0.5, 0.25, 0.5)
        // rnn:    "a b" p = (0.5, 0.6, 0.5), "a c" p = (0.5, 0.1, 0.5)
        let ng = Fixed(vec![(vec!["a", "b"], vec![0.5, 0.2, 0.5]), (vec!["a", "c"], vec![0.5, 0.25, 0.5])]);
        let rnn = Fixed(vec![(vec!["a", "b"], vec![0.5, 0.6, 0.5]), (vec!["a", "c"], vec![0.5, 0.1, 0.5])]);
        let lm_ab = -(0.5f64 * 0.2 * 0.5).ln();
        let lm_ac = -(0.5f64 * 0.25 * 0.5).ln();
        let mut l = NBestList::new("u", vec![hyp(&["a", "c"], 3.0, lm_ac), hyp(&["a", "b"], 3.0, lm_ab)]);
        l.sort();
        assert_eq!(l.hyps[0].words, vec!["a", "c"]);
        let r = rescore_nbest(&l, &rnn, &ng, 0.75, RescoreMode::Probability).unwrap();
        // b: 0.75*0.6 + 0.25*0.2 = 0.5 ; c: 0.75*0.1 + 0.25*0.25 = 0.1375
        assert_eq!(r.hyps[0].words, vec!["a", "b"]);
        let want_b = 3.0 - (0.5f64 * 0.5 * 0.5).ln();
        assert!((r.hyps[0].total() - want_b).abs() < 1e-12);
        let want_c = 3.0 - (0.5f64 * 0.1375 * 0.5).ln();
        assert!((r.hyps[1].total() - want_c).abs() < 1e-12);
    }

    #[test]
    fn weight_range_checked() {
        let f = Fixed(vec![]);
        let l = NBestList::new("u", vec![]);
        assert!(matches!(rescore_nbest(&l, &f, &f, 1.5, RescoreMode::Probability), Err(Error::Config(_))));
    }
}
