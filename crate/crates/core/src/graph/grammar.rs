use std::collections::BTreeMap;
use std::f64::consts::LN_10;

use crate::error::Result;
use crate::fst::{Arc, Fst, Semiring, StateId, SymbolTable, EPSILON};
use crate::ngram::{ArpaModel, WordId, BOS, EOS, LOG10_ZERO};

fn cost(log10: f64) -> f64 {
    -log10 * LN_10
}

/// Grammar acceptor over `words` with one state per n-gram context.
///
/// Explicit n-grams become word arcs weighted `-ln p`; each non-empty
/// context gets an epsilon arc weighted `-ln bow` to its suffix context;
/// `</s>` probabilities become final weights. Backoff is plain epsilon, so
/// a path through a backoff arc can undercut the exact model score.
///
/// Words of the model absent from `words` (including `<unk>`) get no arcs.
pub fn build_grammar_fst(lm: &ArpaModel, words: &SymbolTable) -> Result<Fst> {
    let mut g = Fst::acceptor(Semiring::Tropical, words.clone());
    let bos = lm.word_id(BOS).expect("model has <s>");
    let eos = lm.word_id(EOS).expect("model has </s>");
    let label: Vec<Option<u32>> = lm.words().iter().map(|w| words.find(w)).collect();
    let usable_ctx = |ctx: &[WordId]| {
        ctx.iter()
            .enumerate()
            .all(|(i, &w)| (w == bos && i == 0) || (w != bos && w != eos && label[w as usize].is_some()))
    };

    let mut states: BTreeMap<Vec<WordId>, StateId> = BTreeMap::new();
    states.insert(Vec::new(), g.add_state());
    for k in 1..lm.order() {
        for (ngram, _) in lm.ngrams(k) {
            if usable_ctx(ngram) {
                let s = g.add_state();
                states.insert(ngram.to_vec(), s);
            }
        }
    }
    let start = states.get(&vec![bos]).copied().unwrap_or(states[&Vec::new()]);
    g.set_start(start);

    let longest_state = |ctx: &[WordId]| -> StateId {
        let keep = lm.order() - 1;
        let mut c = &ctx[ctx.len().saturating_sub(keep)..];
        loop {
            if let Some(&s) = states.get(c) {
                return s;
            }
            c = &c[1..];
        }
    };

    for k in 1..=lm.order() {
        for (ngram, e) in lm.ngrams(k) {
            let (ctx, w) = ngram.split_at(k - 1);
            let w = w[0];
            if w == bos || e.log10_prob <= LOG10_ZERO {
                continue;
            }
            let Some(&src) = states.get(ctx) else { continue };
            if w == eos {
                g.set_final(src, cost(e.log10_prob));
                continue;
            }
            let Some(l) = label[w as usize] else { continue };
            let dst = longest_state(ngram);
            g.add_arc(src, Arc::new(l, l, cost(e.log10_prob), dst));
        }
    }
    for (ctx, &s) in &states {
        if ctx.is_empty() {
            continue;
        }
        let bow = lm.entry(ctx).map_or(0.0, |e| e.log10_backoff);
        let dst = longest_state(&ctx[1..]);
        g.add_arc(s, Arc::new(EPSILON, EPSILON, cost(bow), dst));
    }
    Ok(g)
}
