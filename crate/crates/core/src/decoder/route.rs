use std::collections::BTreeMap;

use rayon::prelude::*;

use super::nbest::NBestList;
use crate::error::{Error, Result};
use crate::graph::GraphTag;
use crate::rnnlm::{rescore_nbest_with, RescoreMode, WordScorer};

/// Tag used for untagged (single-graph) hypotheses.
pub const DEFAULT_TAG: &str = "cs";

/// Splits graph tag symbols off a hypothesis.
pub fn split_tag(words: &[String]) -> Result<(Option<GraphTag>, Vec<String>)> {
    let mut tag = None;
    let mut clean = Vec::with_capacity(words.len());
    for w in words {
        match GraphTag::from_symbol(w) {
            Some(t) => {
                if tag.is_some() {
                    return Err(Error::data(format!("hypothesis carries more than one graph tag: {}", words.join(" "))));
                }
                tag = Some(t);
            }
            None => clean.push(w.clone()),
        }
    }
    Ok((tag, clean))
}

/// Models available for routed rescoring, keyed by graph tag name.
pub struct RescoreModels<'a> {
    pub rnn: BTreeMap<String, &'a dyn WordScorer>,
    /// First-pass n-gram model behind each graph tag.
    pub ngram: BTreeMap<String, &'a dyn WordScorer>,
}

fn tag_name(tag: Option<&GraphTag>) -> &str {
    tag.map_or(DEFAULT_TAG, GraphTag::name)
}

/// Rescores each utterance with the RNN LM of its rank-1 hypothesis tag
/// (untagged lists use `cs`). Each hypothesis' own tag selects the
/// n-gram model whose probabilities are interpolated.
pub fn route_rescore(
    sets: &[NBestList],
    models: &RescoreModels<'_>,
    weight: f64,
    mode: RescoreMode,
) -> Result<Vec<NBestList>> {
    sets.par_iter()
        .map(|l| {
            let Some(best) = l.best() else {
                return Ok(l.clone());
            };
            let name = tag_name(best.tag.as_ref());
            let rnn = *models
                .rnn
                .get(name)
                .ok_or_else(|| Error::config(format!("no rescoring model for graph tag '{name}'")))?;
            rescore_nbest_with(
                l,
                rnn,
                |tag| {
                    let name = tag_name(tag);
                    models
                        .ngram
                        .get(name)
                        .copied()
                        .ok_or_else(|| Error::config(format!("no n-gram model for graph tag '{name}'")))
                },
                weight,
                mode,
            )
        })
        .collect()
}
