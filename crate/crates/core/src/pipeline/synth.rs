use std::collections::{BTreeSet, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Lexicon, LexiconEntry, SHARED_LANG};

/// Two toy languages realizing a common set of concepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub lang_a: String,
    pub lang_b: String,
    pub units_a: Vec<String>,
    pub units_b: Vec<String>,
    /// Concepts in total; `shared` of them have one spelling in both languages.
    pub concepts: usize,
    pub shared: usize,
    pub min_word_units: usize,
    pub max_word_units: usize,
    /// Dimension of the latent concept vectors behind the bigram model
    /// `p(d | c) ∝ f(d) exp(sharpness · z_cᵀ R z_d / √latent_dim)`, where
    /// `f(r) = r^-zipf_exponent` is a frequency prior over concept ranks.
    pub latent_dim: usize,
    pub sharpness: f64,
    pub zipf_exponent: f64,
    /// Mixing weight of a language-specific random matrix into `R`.
    pub divergence: f64,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    pub mono_a_sentences: usize,
    pub mono_b_sentences: usize,
    /// Size of the large monolingual-B sample relative to `mono_b_sentences`.
    pub mono_b_large_factor: usize,
    pub cs_sentences: usize,
    /// Probability that a code-switched sentence changes language.
    pub switch_prob: f64,
    /// Probability that a code-switched sentence starts in language A.
    pub base_a_prob: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        let units = |s: &str| s.split_whitespace().map(str::to_string).collect();
        SyntheticCorpusSpec {
            lang_a: "fy".into(),
            lang_b: "nl".into(),
            units_a: units("a e i k l m n s"),
            units_b: units("o u b d g p r t"),
            concepts: 230,
            shared: 30,
            min_word_units: 2,
            max_word_units: 4,
            latent_dim: 8,
            sharpness: 2.0,
            zipf_exponent: 1.0,
            divergence: 0.3,
            min_sentence_len: 3,
            max_sentence_len: 8,
            mono_a_sentences: 1000,
            mono_b_sentences: 1000,
            mono_b_large_factor: 10,
            cs_sentences: 1000,
            switch_prob: 0.5,
            base_a_prob: 0.6,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lang_a == self.lang_b || self.lang_a == SHARED_LANG || self.lang_b == SHARED_LANG {
            return Err(Error::config("language codes must differ and not be 'shared'"));
        }
        let a: BTreeSet<&String> = self.units_a.iter().collect();
        let b: BTreeSet<&String> = self.units_b.iter().collect();
        if a.len() < 2 || b.len() < 2 || a.len() != self.units_a.len() || b.len() != self.units_b.len() {
            return Err(Error::config("each unit inventory needs at least two distinct units"));
        }
        if let Some(u) = a.intersection(&b).next() {
            return Err(Error::config(format!("unit '{u}' appears in both inventories")));
        }
        if self.shared >= self.concepts {
            return Err(Error::config("shared concepts must be fewer than all concepts"));
        }
        if self.min_word_units < 1 || self.min_word_units > self.max_word_units {
            return Err(Error::config("invalid word length range"));
        }
        if self.min_sentence_len < 1 || self.min_sentence_len > self.max_sentence_len {
            return Err(Error::config("invalid sentence length range"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim must be positive"));
        }
        for (name, x) in [("sharpness", self.sharpness), ("zipf_exponent", self.zipf_exponent)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::config(format!("{name} {x} must be finite and non-negative")));
            }
        }
        for (name, p) in [
            ("switch_prob", self.switch_prob),
            ("base_a_prob", self.base_a_prob),
            ("divergence", self.divergence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.mono_b_large_factor == 0 {
            return Err(Error::config("mono_b_large_factor must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Concept {
    words: [String; 2],
    shared: bool,
}

/// Start and successor distributions over concepts for one language.
#[derive(Clone, Debug)]
struct Chain {
    start: WeightedIndex<f64>,
    start_ids: Vec<usize>,
    next: Vec<WeightedIndex<f64>>,
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new(zipf_weights(n)).expect("positive weights")
}

/// Normalized `1/r` weights for ranks `1..=n`.
fn zipf_weights(n: usize) -> Vec<f64> {
    let z: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    (1..=n).map(|r| 1.0 / (r as f64 * z)).collect()
}

/// Two toy languages sharing a concept inventory, plus their lexicon.
#[derive(Clone, Debug)]
pub struct LanguagePair {
    spec: SyntheticCorpusSpec,
    concepts: Vec<Concept>,
    chains: [Chain; 2],
    lexicon: Lexicon,
}

fn spell<R: Rng>(rng: &mut R, units: &[&String], len: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(len);
    while out.len() < len {
        let u = units[rng.random_range(0..units.len())];
        if out.last() != Some(u) {
            out.push(u.clone());
        }
    }
    out
}

impl LanguagePair {
    pub fn generate(spec: &SyntheticCorpusSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ua: Vec<&String> = spec.units_a.iter().collect();
        let ub: Vec<&String> = spec.units_b.iter().collect();
        let both: Vec<&String> = ua.iter().chain(&ub).copied().collect();
        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut entries = Vec::new();
        let mut concepts = Vec::with_capacity(spec.concepts);
        let max_tries = 10_000;
        let mut fresh = |rng: &mut ChaCha8Rng, units: &[&String], mixed: bool| -> Result<Vec<String>> {
            for _ in 0..max_tries {
                let len = rng.random_range(spec.min_word_units.max(usize::from(mixed) + 1)..=spec.max_word_units.max(2));
                let w = spell(rng, units, len);
                let has_a = w.iter().any(|u| spec.units_a.contains(u));
                let has_b = w.iter().any(|u| spec.units_b.contains(u));
                if mixed && !(has_a && has_b) {
                    continue;
                }
                if used.insert(w.concat()) {
                    return Ok(w);
                }
            }
            Err(Error::config("unit inventories too small for the requested number of distinct words"))
        };
        for c in 0..spec.concepts {
            if c < spec.shared {
                let w = fresh(&mut rng, &both, true)?;
                let word = w.concat();
                entries.push(LexiconEntry { word: word.clone(), lang: SHARED_LANG.into(), units: w });
                concepts.push(Concept { words: [word.clone(), word], shared: true });
            } else {
                let wa = fresh(&mut rng, &ua, false)?;
                let wb = fresh(&mut rng, &ub, false)?;
                let (a, b) = (wa.concat(), wb.concat());
                entries.push(LexiconEntry { word: a.clone(), lang: spec.lang_a.clone(), units: wa });
                entries.push(LexiconEntry { word: b.clone(), lang: spec.lang_b.clone(), units: wb });
                concepts.push(Concept { words: [a, b], shared: false });
            }
        }
        let lexicon = Lexicon::new(entries)?;

        let n = spec.concepts;
        let k = spec.latent_dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut log_prior = vec![0.0; n];
        for (r, &c) in order.iter().enumerate() {
            log_prior[c] = -spec.zipf_exponent * ((r + 1) as f64).ln();
        }
        let gauss = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };
        let z: Vec<Vec<f64>> = (0..n).map(|_| gauss(&mut rng, k)).collect();
        let shared_r = gauss(&mut rng, k * k);
        let scale = spec.sharpness / (k as f64).sqrt();
        let (keep, mix) = ((1.0 - spec.divergence * spec.divergence).sqrt(), spec.divergence);
        let chain = |rng: &mut ChaCha8Rng| -> Chain {
            let own = gauss(rng, k * k);
            let r: Vec<f64> = shared_r.iter().zip(&own).map(|(s, o)| keep * s + mix * o).collect();
            let next = (0..n)
                .map(|c| {
                    // q = z_cᵀ R, then score every successor.
                    let q: Vec<f64> = (0..k).map(|j| (0..k).map(|i| z[c][i] * r[i * k + j]).sum()).collect();
                    let logits: Vec<f64> = (0..n)
                        .map(|d| log_prior[d] + scale * q.iter().zip(&z[d]).map(|(a, b)| a * b).sum::<f64>())
                        .collect();
                    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    WeightedIndex::new(logits.iter().map(|l| (l - m).exp())).expect("positive weights")
                })
                .collect();
            Chain { start: zipf(n), start_ids: order.clone(), next }
        };
        let chains = [chain(&mut rng), chain(&mut rng)];
        Ok(LanguagePair { spec: spec.clone(), concepts, chains, lexicon })
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn spec(&self) -> &SyntheticCorpusSpec {
        &self.spec
    }

    pub fn languages(&self) -> [&str; 2] {
        [&self.spec.lang_a, &self.spec.lang_b]
    }

    /// Concept pairs `(word in A, word in B)`, shared concepts included.
    pub fn translations(&self) -> Vec<(String, String)> {
        self.concepts.iter().map(|c| (c.words[0].clone(), c.words[1].clone())).collect()
    }

    fn concepts_for<R: Rng>(&self, lang: usize, rng: &mut R) -> Vec<usize> {
        let len = rng.random_range(self.spec.min_sentence_len..=self.spec.max_sentence_len);
        let ch = &self.chains[lang];
        let mut c = ch.start_ids[ch.start.sample(rng)];
        let mut out = vec![c];
        while out.len() < len {
            c = ch.next[c].sample(rng);
            out.push(c);
        }
        out
    }

    /// A monolingual sentence in language `lang` (0 = A, 1 = B).
    pub fn mono_sentence<R: Rng>(&self, lang: usize, rng: &mut R) -> Vec<String> {
        self.concepts_for(lang, rng).into_iter().map(|c| self.concepts[c].words[lang].clone()).collect()
    }

    /// A sentence that, with the configured probability, switches language
    /// once at a point where both sides contain a language-specific word.
    pub fn cs_sentence<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let base = usize::from(!rng.random_bool(self.spec.base_a_prob));
        if !rng.random_bool(self.spec.switch_prob) {
            return self.mono_sentence(base, rng);
        }
        loop {
            let cs = self.concepts_for(base, rng);
            let specific: Vec<bool> = cs.iter().map(|&c| !self.concepts[c].shared).collect();
            let points: Vec<usize> = (1..cs.len())
                .filter(|&j| specific[..j].contains(&true) && specific[j..].contains(&true))
                .collect();
            if points.is_empty() {
                continue;
            }
            let j = points[rng.random_range(0..points.len())];
            return cs
                .iter()
                .enumerate()
                .map(|(i, &c)| self.concepts[c].words[if i < j { base } else { 1 - base }].clone())
                .collect();
        }
    }
}

/// Text corpora drawn from a [`LanguagePair`].
#[derive(Clone, Debug)]
pub struct Corpora {
    pub mono_a: Vec<Vec<String>>,
    pub mono_b: Vec<Vec<String>>,
    pub mono_b_large: Vec<Vec<String>>,
    pub cs: Vec<Vec<String>>,
}

/// Generates the monolingual, large monolingual-B and code-switched text.
pub fn gen_corpus(pair: &LanguagePair, seed: u64) -> Corpora {
    let spec = pair.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mono_a = (0..spec.mono_a_sentences).map(|_| pair.mono_sentence(0, &mut rng)).collect();
    let mono_b_large: Vec<Vec<String>> = (0..spec.mono_b_sentences * spec.mono_b_large_factor)
        .map(|_| pair.mono_sentence(1, &mut rng))
        .collect();
    let mono_b = mono_b_large[..spec.mono_b_sentences].to_vec();
    let cs = (0..spec.cs_sentences).map(|_| pair.cs_sentence(&mut rng)).collect();
    Corpora { mono_a, mono_b, mono_b_large, cs }
}

fn lang_sequence<'a>(s: &'a [String], word_lang: &'a HashMap<String, String>) -> impl Iterator<Item = &'a str> + 'a {
    s.iter()
        .filter_map(|w| word_lang.get(w).map(String::as_str))
        .filter(|l| *l != SHARED_LANG)
}

/// Fraction of sentences containing words of more than one language.
pub fn switched_sentence_fraction(corpus: &[Vec<String>], word_lang: &HashMap<String, String>) -> f64 {
    if corpus.is_empty() {
        return 0.0;
    }
    let n = corpus
        .iter()
        .filter(|s| {
            let langs: BTreeSet<&str> = lang_sequence(s, word_lang).collect();
            langs.len() > 1
        })
        .count();
    n as f64 / corpus.len() as f64
}

/// Language changes per adjacent pair of language-specific words.
pub fn token_switch_rate(corpus: &[Vec<String>], word_lang: &HashMap<String, String>) -> f64 {
    let (mut switches, mut pairs) = (0usize, 0usize);
    for s in corpus {
        let seq: Vec<&str> = lang_sequence(s, word_lang).collect();
        for w in seq.windows(2) {
            pairs += 1;
            switches += usize::from(w[0] != w[1]);
        }
    }
    if pairs == 0 {
        0.0
    } else {
        switches as f64 / pairs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec {
            concepts: 40,
            shared: 8,
            mono_a_sentences: 50,
            mono_b_sentences: 50,
            mono_b_large_factor: 3,
            cs_sentences: 100,
            ..SyntheticCorpusSpec::default()
        }
    }

    #[test]
    fn lexicon_is_consistent() {
        let pair = LanguagePair::generate(&small(), 1).unwrap();
        let lex = pair.lexicon();
        assert_eq!(lex.entries().len(), 8 + 2 * 32);
        for e in lex.entries() {
            assert!(e.units.windows(2).all(|w| w[0] != w[1]), "{}", e.word);
            assert_eq!(e.units.concat(), e.word);
            let spec = pair.spec();
            match e.lang.as_str() {
                "fy" => assert!(e.units.iter().all(|u| spec.units_a.contains(u))),
                "nl" => assert!(e.units.iter().all(|u| spec.units_b.contains(u))),
                _ => {
                    assert!(e.units.iter().any(|u| spec.units_a.contains(u)));
                    assert!(e.units.iter().any(|u| spec.units_b.contains(u)));
                }
            }
        }
    }

    #[test]
    fn overlapping_inventories_rejected() {
        let mut spec = small();
        spec.units_b.push("a".into());
        assert!(matches!(LanguagePair::generate(&spec, 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_switch_probability_gives_monolingual_sentences() {
        let mut spec = small();
        spec.switch_prob = 0.0;
        let pair = LanguagePair::generate(&spec, 2).unwrap();
        let c = gen_corpus(&pair, 3);
        let wl = pair.lexicon().word_languages();
        assert_eq!(switched_sentence_fraction(&c.cs, &wl), 0.0);
    }

    #[test]
    fn same_seed_same_corpora() {
        let pair = LanguagePair::generate(&small(), 4).unwrap();
        let a = gen_corpus(&pair, 5);
        let b = gen_corpus(&LanguagePair::generate(&small(), 4).unwrap(), 5);
        assert_eq!(a.cs, b.cs);
        assert_eq!(a.mono_b_large, b.mono_b_large);
        assert_eq!(a.mono_b, a.mono_b_large[..50].to_vec());
    }

    #[test]
    fn monolingual_text_stays_in_language() {
        let pair = LanguagePair::generate(&small(), 6).unwrap();
        let c = gen_corpus(&pair, 7);
        let wl = pair.lexicon().word_languages();
        for s in &c.mono_a {
            assert!(s.iter().all(|w| wl[w] == "fy" || wl[w] == SHARED_LANG));
        }
        assert_eq!(token_switch_rate(&c.mono_b_large, &wl), 0.0);
    }
}
