use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::align::{align, EditCounts};
use crate::error::{Error, Result};
use crate::graph::SHARED_LANG;

/// Language label for reference words missing from the word→language map.
pub const UNKNOWN_LANG: &str = "unknown";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub name: String,
    pub utterances: usize,
    pub ref_words: usize,
    pub edits: EditCounts,
    /// Percent; `None` for a subset without reference words.
    pub wer: Option<f64>,
}

impl SubsetScore {
    fn new(name: &str) -> Self {
        SubsetScore {
            name: name.to_string(),
            utterances: 0,
            ref_words: 0,
            edits: EditCounts::default(),
            wer: None,
        }
    }

    fn finish(&mut self) {
        self.wer = (self.ref_words > 0).then(|| 100.0 * self.edits.errors() as f64 / self.ref_words as f64);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UttScore {
    pub id: String,
    pub subset: String,
    pub ref_words: usize,
    pub edits: EditCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    /// Language A, language B, `A-B` (mixed), `all` (micro-averaged).
    pub subsets: Vec<SubsetScore>,
    /// Reference word counts per language label.
    pub word_tallies: BTreeMap<String, usize>,
    pub utterances: Vec<UttScore>,
}

impl WerReport {
    pub fn subset(&self, name: &str) -> Option<&SubsetScore> {
        self.subsets.iter().find(|s| s.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>6} {:>7} {:>6} {:>6} {:>6} {:>8}", "subset", "utts", "words", "sub", "del", "ins", "WER%");
        for s in &self.subsets {
            let wer = s.wer.map_or_else(|| "-".to_string(), |w| format!("{w:.2}"));
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>7} {:>6} {:>6} {:>6} {:>8}",
                s.name, s.utterances, s.ref_words, s.edits.substitutions, s.edits.deletions, s.edits.insertions, wer
            );
        }
        let tallies: Vec<String> = self.word_tallies.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "reference words: {}", tallies.join(" "));
        out
    }
}

/// Scores hypotheses against references, split by the languages present in
/// each reference. References with no word of either language (empty or
/// all shared) count toward the first language.
pub fn score_wer(
    refs: &[(String, Vec<String>)],
    hyps: &[(String, Vec<String>)],
    word_lang: &HashMap<String, String>,
    langs: [&str; 2],
) -> Result<WerReport> {
    let hyp_map: HashMap<&str, &Vec<String>> = hyps.iter().map(|(id, w)| (id.as_str(), w)).collect();
    if hyp_map.len() != hyps.len() {
        return Err(Error::data("duplicate utterance id in hypotheses"));
    }
    let ref_ids: BTreeSet<&str> = refs.iter().map(|(id, _)| id.as_str()).collect();
    if ref_ids.len() != refs.len() {
        return Err(Error::data("duplicate utterance id in references"));
    }
    let hyp_ids: BTreeSet<&str> = hyp_map.keys().copied().collect();
    if ref_ids != hyp_ids {
        let diff: Vec<&str> = ref_ids.symmetric_difference(&hyp_ids).copied().take(10).collect();
        return Err(Error::data(format!("reference and hypothesis ids differ: {}", diff.join(", "))));
    }
    let mixed = format!("{}-{}", langs[0], langs[1]);
    let mut subsets = vec![
        SubsetScore::new(langs[0]),
        SubsetScore::new(langs[1]),
        SubsetScore::new(&mixed),
        SubsetScore::new("all"),
    ];
    let mut tallies: BTreeMap<String, usize> = BTreeMap::new();
    let mut utts = Vec::with_capacity(refs.len());
    for (id, r) in refs {
        let mut has = [false, false];
        for w in r {
            let lang = word_lang.get(w).map_or(UNKNOWN_LANG, String::as_str);
            let label = if lang == langs[0] || lang == langs[1] || lang == SHARED_LANG { lang } else { UNKNOWN_LANG };
            *tallies.entry(label.to_string()).or_default() += 1;
            for (k, l) in langs.iter().enumerate() {
                has[k] |= lang == *l;
            }
        }
        let idx = match has {
            [true, true] => 2,
            [false, true] => 1,
            _ => 0,
        };
        let edits = align(r, hyp_map[id.as_str()]);
        for k in [idx, 3] {
            subsets[k].utterances += 1;
            subsets[k].ref_words += r.len();
            subsets[k].edits.add(&edits);
        }
        utts.push(UttScore {
            id: id.clone(),
            subset: subsets[idx].name.clone(),
            ref_words: r.len(),
            edits,
        });
    }
    for s in &mut subsets {
        s.finish();
    }
    Ok(WerReport {
        subsets,
        word_tallies: tallies,
        utterances: utts,
    })
}
