use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::GraphTag;

/// Tolerance on `total = acoustic + lm`.
pub const TOTAL_TOLERANCE: f64 = 1e-9;

/// One decoder hypothesis. Scores are costs (negative natural-log
/// probabilities); lower is better.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<String>,
    pub acoustic_cost: f64,
    /// Graph (n-gram LM) cost, or the rescored LM cost after rescoring.
    pub lm_cost: f64,
    pub tag: Option<GraphTag>,
}

impl Hypothesis {
    pub fn total(&self) -> f64 {
        self.acoustic_cost + self.lm_cost
    }
}

/// Ranked hypotheses for one utterance, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestList {
    pub utt_id: String,
    pub hyps: Vec<Hypothesis>,
}

impl NBestList {
    pub fn new(utt_id: impl Into<String>, hyps: Vec<Hypothesis>) -> Self {
        NBestList {
            utt_id: utt_id.into(),
            hyps,
        }
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.hyps.first()
    }

    /// Sorts by total cost, breaking ties by word sequence.
    pub fn sort(&mut self) {
        self.hyps.sort_by(|a, b| {
            a.total()
                .total_cmp(&b.total())
                .then_with(|| a.words.cmp(&b.words))
        });
    }

    /// Sorts by total cost keeping the current order among ties.
    pub fn sort_stable(&mut self) {
        self.hyps.sort_by(|a, b| a.total().total_cmp(&b.total()));
    }
}

/// One line per hypothesis:
/// `utt_id rank acoustic_cost lm_cost tag word ...` with `-` for no tag.
pub fn write_nbest<W: Write>(mut w: W, lists: &[NBestList]) -> Result<()> {
    for l in lists {
        for (rank, h) in l.hyps.iter().enumerate() {
            let tag = h.tag.as_ref().map_or("-", |t| t.name());
            write!(w, "{} {} {:?} {:?} {}", l.utt_id, rank + 1, h.acoustic_cost, h.lm_cost, tag)?;
            for word in &h.words {
                write!(w, " {word}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads n-best lines, grouping consecutive lines by utterance id. Ranks
/// must count up from 1 within each utterance.
pub fn read_nbest<R: BufRead>(r: R) -> Result<Vec<NBestList>> {
    let mut out: Vec<NBestList> = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let n = i + 1;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() < 5 {
            return Err(Error::data(format!(
                "n-best line {n}: missing score fields (need utt_id rank acoustic lm tag)"
            )));
        }
        let rank: usize = f[1].parse().map_err(|_| Error::parse(n, "bad rank"))?;
        let ac: f64 = f[2].parse().map_err(|_| Error::parse(n, "bad acoustic score"))?;
        let lm: f64 = f[3].parse().map_err(|_| Error::parse(n, "bad LM score"))?;
        let tag = match f[4] {
            "-" => None,
            t => Some(GraphTag::new(t)?),
        };
        let hyp = Hypothesis {
            words: f[5..].iter().map(|s| s.to_string()).collect(),
            acoustic_cost: ac,
            lm_cost: lm,
            tag,
        };
        match out.last_mut() {
            Some(last) if last.utt_id == f[0] => {
                if rank != last.hyps.len() + 1 {
                    return Err(Error::parse(n, format!("rank {rank} out of sequence")));
                }
                last.hyps.push(hyp);
            }
            _ => {
                if rank != 1 {
                    return Err(Error::parse(n, format!("utterance {} starts at rank {rank}", f[0])));
                }
                if out.iter().any(|x| x.utt_id == f[0]) {
                    return Err(Error::parse(n, format!("utterance {} is not contiguous", f[0])));
                }
                out.push(NBestList::new(f[0], vec![hyp]));
            }
        }
    }
    Ok(out)
}
