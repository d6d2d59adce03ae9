use std::collections::BTreeSet;

use super::{ArpaModel, NgramEntry, WordId, BOS, LOG10_ZERO};
use crate::error::{Error, Result};

/// Probability of `w` after `history` under `lm`, with words missing from
/// its vocabulary carrying zero probability (rather than `<unk>` mass) so
/// that each side stays normalized over the union vocabulary.
fn side_prob(lm: &ArpaModel, history: &[&str], w: &str) -> f64 {
    let Some(wid) = lm.word_id(w) else {
        return 0.0;
    };
    let mut hist: Vec<WordId> = Vec::with_capacity(history.len());
    for h in history {
        match lm.word_id(h) {
            Some(id) => hist.push(id),
            None => hist.clear(),
        }
    }
    let lp = lm.log10_prob(&hist, wid);
    if lp <= LOG10_ZERO {
        0.0
    } else {
        10f64.powf(lp)
    }
}

fn log10_floor(p: f64) -> f64 {
    if p > 0.0 {
        p.log10().max(LOG10_ZERO)
    } else {
        LOG10_ZERO
    }
}

/// Static interpolation `w·p1 + (1−w)·p2` over the union of both models'
/// n-grams, with backoff weights recomputed from leftover mass so that
/// every context stays normalized.
pub fn interpolate(lm1: &ArpaModel, lm2: &ArpaModel, weight: f64) -> Result<ArpaModel> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::config(format!(
            "interpolation weight {weight} outside [0, 1]"
        )));
    }
    let order = lm1.order().max(lm2.order());
    let mut words: Vec<&str> = lm1.words().iter().map(String::as_str).collect();
    for w in lm2.words() {
        if lm1.word_id(w).is_none() {
            words.push(w);
        }
    }
    let mut out = ArpaModel::new(order, &words)?;

    // Union of listed n-grams as strings, per order, in deterministic order.
    let mut listed: Vec<BTreeSet<Vec<WordId>>> = vec![BTreeSet::new(); order];
    for lm in [lm1, lm2] {
        for k in 1..=lm.order() {
            for (g, _) in lm.ngrams(k) {
                let ids = g
                    .iter()
                    .map(|&id| out.word_id(lm.word(id)).unwrap())
                    .collect();
                listed[k - 1].insert(ids);
            }
        }
    }
    let bos = out.word_id(BOS).unwrap();
    for w in out.predictable().collect::<Vec<_>>() {
        listed[0].insert(vec![w]);
    }

    for (k, grams) in listed.iter().enumerate() {
        for g in grams {
            let strs: Vec<&str> = g.iter().map(|&id| out.word(id)).collect();
            let (hist, w) = strs.split_at(k);
            let lp = if k == 0 && g[0] == bos {
                LOG10_ZERO
            } else {
                let p = weight * side_prob(lm1, hist, w[0])
                    + (1.0 - weight) * side_prob(lm2, hist, w[0]);
                log10_floor(p)
            };
            out.insert(
                g.clone(),
                NgramEntry {
                    log10_prob: lp,
                    log10_backoff: 0.0,
                },
            );
        }
    }

    // Backoffs bottom-up: a context's lower-order distribution only needs
    // backoffs of strictly shorter contexts.
    for k in 2..=order {
        let mut by_ctx: std::collections::BTreeMap<Vec<WordId>, Vec<WordId>> = Default::default();
        for g in &listed[k - 1] {
            by_ctx.entry(g[..k - 1].to_vec()).or_default().push(g[k - 1]);
        }
        for (ctx, nexts) in by_ctx {
            let mut seen = 0.0;
            let mut lower = 0.0;
            for &w in &nexts {
                seen += 10f64.powf(out.entry(&[&ctx[..], &[w]].concat()).unwrap().log10_prob);
                lower += 10f64.powf(out.log10_prob(&ctx[1..], w));
            }
            let num = (1.0 - seen).max(0.0);
            let den = (1.0 - lower).max(0.0);
            let bow = if den > 0.0 && num > 0.0 { num / den } else { 0.0 };
            if out.entry(&ctx).is_some() {
                out.set_backoff(&ctx, log10_floor(bow));
            }
        }
    }
    Ok(out)
}
