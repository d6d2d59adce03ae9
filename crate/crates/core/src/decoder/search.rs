use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::nbest::{Hypothesis, NBestList};
use super::split_tag;
use crate::ctc::PosteriorGrid;
use crate::error::{Error, Result};
use crate::fst::{Fst, Label, Semiring, StateId, EPSILON};
use crate::graph::TAG_PREFIX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// Score beam relative to the best token of the same graph component;
    /// `inf` disables pruning.
    pub beam: f64,
    /// Hard cap on live tokens per frame and component.
    pub max_active: usize,
    pub acoustic_scale: f64,
    pub nbest: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: 16.0,
            max_active: 5000,
            acoustic_scale: 1.0,
            nbest: 100,
        }
    }
}

impl DecodeConfig {
    pub fn exhaustive(nbest: usize) -> Self {
        DecodeConfig {
            beam: f64::INFINITY,
            max_active: usize::MAX,
            acoustic_scale: 1.0,
            nbest,
        }
    }
}

type HistId = u32;
const ROOT: HistId = 0;

/// Hash-consed output-label histories.
struct Histories {
    nodes: Vec<(HistId, Label)>,
    index: HashMap<(HistId, Label), HistId>,
}

impl Histories {
    fn new() -> Self {
        Histories {
            nodes: vec![(ROOT, EPSILON)],
            index: HashMap::new(),
        }
    }

    fn extend(&mut self, h: HistId, label: Label) -> HistId {
        if label == EPSILON {
            return h;
        }
        let next = self.nodes.len() as HistId;
        *self.index.entry((h, label)).or_insert_with(|| {
            self.nodes.push((h, label));
            next
        })
    }

    fn labels(&self, mut h: HistId) -> Vec<Label> {
        let mut out = Vec::new();
        while h != ROOT {
            let (p, l) = self.nodes[h as usize];
            out.push(l);
            h = p;
        }
        out.reverse();
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Token {
    state: StateId,
    hist: HistId,
    /// Tag label of the multigraph component, or epsilon before entry.
    group: Label,
    acoustic: f64,
    graph: f64,
}

impl Token {
    fn total(&self) -> f64 {
        self.acoustic + self.graph
    }
}

/// Live tokens in insertion order, at most one per `(state, history)`.
#[derive(Default)]
struct TokenSet {
    tokens: Vec<Token>,
    index: HashMap<(StateId, HistId), usize>,
}

impl TokenSet {
    /// Inserts or relaxes; returns the slot when the token improved.
    fn relax(&mut self, tok: Token) -> Option<usize> {
        match self.index.get(&(tok.state, tok.hist)) {
            Some(&i) => {
                if tok.total() < self.tokens[i].total() {
                    self.tokens[i] = tok;
                    Some(i)
                } else {
                    None
                }
            }
            None => {
                let i = self.tokens.len();
                self.index.insert((tok.state, tok.hist), i);
                self.tokens.push(tok);
                Some(i)
            }
        }
    }

    /// Beam and active-count pruning, applied within each component so a
    /// multigraph search matches the separate searches of its parts.
    fn prune(&mut self, beam: f64, max_active: usize) {
        let mut best: HashMap<Label, f64> = HashMap::new();
        for t in &self.tokens {
            let b = best.entry(t.group).or_insert(f64::INFINITY);
            *b = b.min(t.total());
        }
        let mut kept: Vec<(usize, Token)> = self
            .tokens
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, t)| t.total() <= best[&t.group] + beam)
            .collect();
        if kept.len() > max_active {
            kept.sort_by(|a, b| {
                a.1.group
                    .cmp(&b.1.group)
                    .then(a.1.total().total_cmp(&b.1.total()))
                    .then(a.0.cmp(&b.0))
            });
            let mut n = 0;
            let mut group = None;
            kept.retain(|(_, t)| {
                if group != Some(t.group) {
                    group = Some(t.group);
                    n = 0;
                }
                n += 1;
                n <= max_active
            });
            kept.sort_by_key(|k| k.0);
        }
        self.tokens = kept.into_iter().map(|(_, t)| t).collect();
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| ((t.state, t.hist), i))
            .collect();
    }

    /// Follows epsilon-input arcs, expanding the cheapest token first and
    /// re-expanding any token whose cost improves.
    fn closure(&mut self, g: &Fst, tags: &[bool], hist: &mut Histories) -> Result<()> {
        let mut heap: BinaryHeap<(Reverse<OrdCost>, Reverse<usize>)> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (Reverse(OrdCost(t.total())), Reverse(i)))
            .collect();
        let mut budget = 1000 * (self.tokens.len() + g.num_states() + 1);
        while let Some((Reverse(OrdCost(c)), Reverse(i))) = heap.pop() {
            let tok = self.tokens[i];
            if c > tok.total() {
                continue;
            }
            for a in g.arcs(tok.state) {
                if a.ilabel != EPSILON {
                    continue;
                }
                let next = Token {
                    state: a.nextstate,
                    hist: hist.extend(tok.hist, a.olabel),
                    group: group_after(tok.group, a.olabel, tags),
                    acoustic: tok.acoustic,
                    graph: tok.graph + a.weight,
                };
                if let Some(j) = self.relax(next) {
                    heap.push((Reverse(OrdCost(next.total())), Reverse(j)));
                }
            }
            budget = budget.saturating_sub(1);
            if budget == 0 {
                return Err(Error::Invariant("epsilon closure did not converge (negative epsilon cycle?)".into()));
            }
        }
        Ok(())
    }
}

fn group_after(group: Label, olabel: Label, tags: &[bool]) -> Label {
    if tags[olabel as usize] {
        olabel
    } else {
        group
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdCost(f64);

impl Eq for OrdCost {}

impl Ord for OrdCost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Frame-synchronous Viterbi beam search returning the `n` best distinct
/// word sequences. Graph input label `k + 1` consumes grid symbol `k`
/// (label 1 is the blank); tag symbols are split off into
/// [`Hypothesis::tag`].
pub fn beam_decode(utt_id: &str, graph: &Fst, grid: &PosteriorGrid, cfg: &DecodeConfig) -> Result<NBestList> {
    if graph.semiring() != Semiring::Tropical {
        return Err(Error::config("decoding requires a tropical graph"));
    }
    if graph.isyms().len() != grid.symbols() + 1 {
        return Err(Error::config(format!(
            "graph has {} input symbols, posterior grid has {} (+epsilon)",
            graph.isyms().len(),
            grid.symbols()
        )));
    }
    if !(cfg.beam > 0.0) || cfg.max_active == 0 || cfg.nbest == 0 {
        return Err(Error::config("beam, max_active and nbest must be positive"));
    }
    let Some(start) = graph.start() else {
        log::warn!("{utt_id}: empty search graph");
        return Ok(NBestList::new(utt_id, Vec::new()));
    };
    let tags: Vec<bool> = (0..graph.osyms().len() as Label)
        .map(|l| graph.osyms().symbol(l).is_some_and(|s| s.starts_with(TAG_PREFIX)))
        .collect();
    let mut hist = Histories::new();
    let mut live = TokenSet::default();
    live.relax(Token {
        state: start,
        hist: ROOT,
        group: EPSILON,
        acoustic: 0.0,
        graph: 0.0,
    });
    live.closure(graph, &tags, &mut hist)?;
    live.prune(cfg.beam, cfg.max_active);
    for t in 0..grid.frames() {
        let row = grid.row(t);
        let mut next = TokenSet::default();
        for tok in &live.tokens {
            for a in graph.arcs(tok.state) {
                if a.ilabel == EPSILON {
                    continue;
                }
                let k = (a.ilabel - 1) as usize;
                next.relax(Token {
                    state: a.nextstate,
                    hist: hist.extend(tok.hist, a.olabel),
                    group: group_after(tok.group, a.olabel, &tags),
                    acoustic: tok.acoustic - cfg.acoustic_scale * row[k],
                    graph: tok.graph + a.weight,
                });
            }
        }
        next.closure(graph, &tags, &mut hist)?;
        next.prune(cfg.beam, cfg.max_active);
        if next.tokens.is_empty() {
            log::warn!("{utt_id}: no surviving tokens at frame {t}");
            return Ok(NBestList::new(utt_id, Vec::new()));
        }
        live = next;
    }

    // Best final token per history.
    let mut finals: Vec<(HistId, f64, f64)> = Vec::new();
    let mut by_hist: HashMap<HistId, usize> = HashMap::new();
    for tok in &live.tokens {
        let fw = graph.final_weight(tok.state);
        if fw == f64::INFINITY {
            continue;
        }
        let cand = (tok.hist, tok.acoustic, tok.graph + fw);
        match by_hist.get(&tok.hist) {
            Some(&i) if finals[i].1 + finals[i].2 <= cand.1 + cand.2 => {}
            Some(&i) => finals[i] = cand,
            None => {
                by_hist.insert(tok.hist, finals.len());
                finals.push(cand);
            }
        }
    }
    if finals.is_empty() {
        log::warn!("{utt_id}: no token reached a final state (beam too narrow or utterance too short)");
        return Ok(NBestList::new(utt_id, Vec::new()));
    }
    let osyms = graph.osyms();
    let mut hyps = Vec::with_capacity(finals.len());
    for (h, ac, gr) in finals {
        let words: Vec<String> = hist
            .labels(h)
            .into_iter()
            .map(|l| osyms.symbol(l).unwrap_or("<?>").to_string())
            .collect();
        let (tag, words) = split_tag(&words)?;
        hyps.push(Hypothesis {
            words,
            acoustic_cost: ac,
            lm_cost: gr,
            tag,
        });
    }
    let mut list = NBestList::new(utt_id, hyps);
    list.sort();
    // Distinct word sequences: keep the first (best) occurrence.
    let mut seen = std::collections::HashSet::new();
    list.hyps.retain(|h| seen.insert(h.words.clone()));
    list.hyps.truncate(cfg.nbest);
    Ok(list)
}
