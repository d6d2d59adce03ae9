use std::collections::HashSet;
use std::io::{BufRead, Write};

use super::{ArpaModel, NgramEntry, WordId};
use crate::error::{Error, Result};

/// Writes the standard ARPA layout with 6-decimal log10 values. Backoff
/// fields are written for every n-gram that is a context of a higher order.
pub fn write_arpa<W: Write>(lm: &ArpaModel, mut w: W) -> Result<()> {
    let n = lm.order();
    writeln!(w)?;
    writeln!(w, "\\data\\")?;
    for k in 1..=n {
        writeln!(w, "ngram {k}={}", lm.num_ngrams(k))?;
    }
    for k in 1..=n {
        let contexts: HashSet<&[WordId]> = if k < n {
            lm.ngrams(k + 1).map(|(g, _)| &g[..k]).collect()
        } else {
            HashSet::new()
        };
        writeln!(w)?;
        writeln!(w, "\\{k}-grams:")?;
        for (g, e) in lm.ngrams(k) {
            let words: Vec<&str> = g.iter().map(|&id| lm.word(id)).collect();
            write!(w, "{:.6}\t{}", e.log10_prob, words.join(" "))?;
            if contexts.contains(g) || (k < n && e.log10_backoff != 0.0) {
                write!(w, "\t{:.6}", e.log10_backoff)?;
            }
            writeln!(w)?;
        }
    }
    writeln!(w)?;
    writeln!(w, "\\end\\")?;
    Ok(())
}

pub fn read_arpa<R: BufRead>(r: R) -> Result<ArpaModel> {
    let mut numbered = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.trim();
        if !t.is_empty() {
            numbered.push((i + 1, t.to_string()));
        }
    }
    let mut lines = numbered.into_iter();
    let Some((n, first)) = lines.next() else {
        return Err(Error::parse(0, "empty ARPA file"));
    };
    if first != "\\data\\" {
        return Err(Error::parse(n, "expected \\data\\"));
    }
    let mut counts: Vec<usize> = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    while let Some((n, l)) = lines.next() {
        if let Some(rest) = l.strip_prefix("ngram ") {
            let (k, c) = rest
                .split_once('=')
                .ok_or_else(|| Error::parse(n, "malformed ngram count line"))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::parse(n, "bad order in count line"))?;
            let c: usize = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(n, "bad count in count line"))?;
            if k != counts.len() + 1 {
                return Err(Error::parse(n, "ngram counts out of order"));
            }
            counts.push(c);
        } else {
            pending = Some((n, l));
            break;
        }
    }
    if counts.is_empty() {
        return Err(Error::parse(0, "no ngram count lines"));
    }
    let order = counts.len();
    let mut model = ArpaModel::new(order, &[] as &[&str])?;
    let mut entries: Vec<Vec<(Vec<String>, f64, f64)>> = vec![Vec::new(); order];

    let mut current: Option<usize> = None;
    let mut ended = false;
    loop {
        let item = match pending.take() {
            Some(x) => Some(x),
            None => lines.next(),
        };
        let Some((n, l)) = item else { break };
        if l == "\\end\\" {
            ended = true;
            break;
        }
        if let Some(k) = l
            .strip_prefix('\\')
            .and_then(|s| s.strip_suffix("-grams:"))
        {
            let k: usize = k
                .parse()
                .map_err(|_| Error::parse(n, "bad section header"))?;
            let expect = current.map_or(1, |c| c + 1);
            if k != expect || k > order {
                return Err(Error::parse(n, format!("unexpected section \\{k}-grams:")));
            }
            if let Some(c) = current {
                if entries[c - 1].len() != counts[c - 1] {
                    return Err(Error::parse(
                        n,
                        format!(
                            "{c}-gram count {} disagrees with header {}",
                            entries[c - 1].len(),
                            counts[c - 1]
                        ),
                    ));
                }
            }
            current = Some(k);
            continue;
        }
        let Some(k) = current else {
            return Err(Error::parse(n, "entry outside an n-gram section"));
        };
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != k + 1 && toks.len() != k + 2 {
            return Err(Error::parse(n, format!("expected {k} words plus scores")));
        }
        let p: f64 = toks[0]
            .parse()
            .map_err(|_| Error::parse(n, "bad probability"))?;
        let bow: f64 = if toks.len() == k + 2 {
            toks[k + 1]
                .parse()
                .map_err(|_| Error::parse(n, "bad backoff"))?
        } else {
            0.0
        };
        entries[k - 1].push((
            toks[1..=k].iter().map(|s| s.to_string()).collect(),
            p,
            bow,
        ));
    }
    if !ended {
        return Err(Error::parse(0, "missing \\end\\"));
    }
    if current != Some(order) {
        return Err(Error::parse(0, "missing n-gram sections"));
    }
    if entries[order - 1].len() != counts[order - 1] {
        return Err(Error::parse(
            0,
            format!(
                "{order}-gram count {} disagrees with header {}",
                entries[order - 1].len(),
                counts[order - 1]
            ),
        ));
    }
    for table in &entries {
        for (words, p, bow) in table {
            let ids: Vec<WordId> = words.iter().map(|w| model.add_word(w)).collect();
            model.insert(
                ids,
                NgramEntry {
                    log10_prob: *p,
                    log10_backoff: *bow,
                },
            );
        }
    }
    Ok(model)
}
