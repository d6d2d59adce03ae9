use std::collections::{BTreeMap, HashMap};

use super::{ArpaModel, NgramEntry, WordId, BOS, EOS, LOG10_ZERO, UNK};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KnConfig {
    pub order: usize,
    /// One discount per order (index 0 = unigrams). `None` estimates
    /// `n1 / (n1 + 2 n2)` from count-of-counts.
    pub discounts: Option<Vec<f64>>,
    /// Drop `<unk>` from the vocabulary.
    pub closed_vocab: bool,
}

impl KnConfig {
    pub fn new(order: usize) -> Self {
        KnConfig {
            order,
            discounts: None,
            closed_vocab: false,
        }
    }
}

/// Discount used when count-of-counts give no usable estimate.
const FALLBACK_DISCOUNT: f64 = 0.5;

fn log10_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        LOG10_ZERO
    }
}

/// Trains an interpolated Kneser-Ney model.
///
/// Highest-order n-grams and n-grams starting with `<s>` keep raw counts;
/// every other lower-order n-gram uses its number of distinct left
/// extensions. The unigram level interpolates with a uniform distribution
/// over the predictable vocabulary, which is how `<unk>` gets its mass.
pub fn train_kn<S: AsRef<str>>(corpus: &[Vec<S>], config: &KnConfig) -> Result<ArpaModel> {
    let n = config.order;
    if !(1..=4).contains(&n) {
        return Err(Error::config(format!("order {n} outside 1..=4")));
    }
    if let Some(d) = &config.discounts {
        if d.len() != n {
            return Err(Error::config(format!(
                "expected {n} discounts, got {}",
                d.len()
            )));
        }
        if let Some(bad) = d.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(Error::config(format!("discount {bad} outside [0, 1)")));
        }
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::data("empty training corpus"));
    }

    let mut model = ArpaModel::new(n, &[] as &[&str])?;
    if !config.closed_vocab {
        model.add_word(UNK);
    }
    let bos = model.word_id(BOS).unwrap();
    let eos = model.word_id(EOS).unwrap();

    // raw[k-1]: k-gram -> occurrence count
    let mut raw: Vec<HashMap<Vec<WordId>, u64>> = vec![HashMap::new(); n];
    for sent in corpus {
        let mut ids = Vec::with_capacity(sent.len() + 2);
        ids.push(bos);
        for w in sent {
            let w = w.as_ref();
            if w == BOS || w == EOS {
                return Err(Error::data(format!("sentence contains reserved token {w}")));
            }
            ids.push(model.add_word(w));
        }
        ids.push(eos);
        for k in 1..=n {
            for win in ids.windows(k) {
                *raw[k - 1].entry(win.to_vec()).or_default() += 1;
            }
        }
    }

    // Adjusted counts per order.
    let mut adjusted: Vec<BTreeMap<Vec<WordId>, u64>> = vec![BTreeMap::new(); n];
    for (g, &c) in &raw[n - 1] {
        adjusted[n - 1].insert(g.clone(), c);
    }
    for k in (1..n).rev() {
        let mut cont: HashMap<Vec<WordId>, u64> = HashMap::new();
        for g in raw[k].keys() {
            if g[1] != bos {
                *cont.entry(g[1..].to_vec()).or_default() += 1;
            }
        }
        for (g, &c) in &raw[k - 1] {
            if g[0] == bos {
                if g.len() > 1 {
                    adjusted[k - 1].insert(g.clone(), c);
                }
            } else if let Some(&cc) = cont.get(g) {
                adjusted[k - 1].insert(g.clone(), cc);
            }
        }
    }
    adjusted[0].remove(&vec![bos]);

    let discounts: Vec<f64> = match &config.discounts {
        Some(d) => d.clone(),
        None => adjusted
            .iter()
            .map(|table| {
                let n1 = table.values().filter(|&&c| c == 1).count() as f64;
                let n2 = table.values().filter(|&&c| c == 2).count() as f64;
                let d = n1 / (n1 + 2.0 * n2);
                if d.is_finite() && d > 0.0 && d < 1.0 {
                    d
                } else {
                    FALLBACK_DISCOUNT
                }
            })
            .collect(),
    };
    log::debug!("kn discounts {discounts:?}");

    // Unigrams.
    let vocab_size = model.predictable().count() as f64;
    let d1 = discounts[0];
    let uni_total: u64 = adjusted[0]
        .values()
        .copied()
        .sum();
    let uni_types = adjusted[0]
        .values()
        .filter(|&&c| c > 0)
        .count() as f64;
    let gamma0 = if uni_total > 0 {
        d1 * uni_types / uni_total as f64
    } else {
        1.0
    };
    let predictable: Vec<WordId> = model.predictable().collect();
    for w in predictable {
        let c = adjusted[0].get(&vec![w]).copied().unwrap_or(0) as f64;
        let p = if uni_total > 0 {
            (c - d1).max(0.0) / uni_total as f64 + gamma0 / vocab_size
        } else {
            1.0 / vocab_size
        };
        model.insert(
            vec![w],
            NgramEntry {
                log10_prob: log10_or_zero(p),
                log10_backoff: 0.0,
            },
        );
    }
    model.insert(
        vec![bos],
        NgramEntry {
            log10_prob: LOG10_ZERO,
            log10_backoff: 0.0,
        },
    );

    // Higher orders, interpolated with the already-final lower order.
    for k in 2..=n {
        let d = discounts[k - 1];
        let mut totals: HashMap<&[WordId], (u64, u64)> = HashMap::new();
        for (g, &c) in &adjusted[k - 1] {
            let e = totals.entry(&g[..k - 1]).or_default();
            e.0 += c;
            e.1 += 1;
        }
        let mut entries = Vec::with_capacity(adjusted[k - 1].len());
        for (g, &c) in &adjusted[k - 1] {
            let ctx = &g[..k - 1];
            let (total, types) = totals[ctx];
            let gamma = d * types as f64 / total as f64;
            let lower = 10f64.powf(model.log10_prob(&g[1..k - 1], g[k - 1]));
            let p = (c as f64 - d).max(0.0) / total as f64 + gamma * lower;
            entries.push((g.clone(), log10_or_zero(p)));
        }
        for (g, lp) in entries {
            model.insert(
                g,
                NgramEntry {
                    log10_prob: lp,
                    log10_backoff: 0.0,
                },
            );
        }
        for (ctx, (total, types)) in totals {
            let gamma = d * types as f64 / total as f64;
            model.set_backoff(ctx, log10_or_zero(gamma));
        }
    }
    Ok(model)
}
