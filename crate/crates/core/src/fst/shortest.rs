use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::{Fst, Label, Semiring, StateId, EPSILON};
use crate::error::{Error, Result};

/// A complete path with epsilons removed from both label sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub weight: f64,
}

/// Label sequence shared between a partial path and its extensions.
struct Labels {
    label: Label,
    prev: Option<Rc<Labels>>,
}

fn push(list: &Option<Rc<Labels>>, label: Label) -> Option<Rc<Labels>> {
    if label == EPSILON {
        list.clone()
    } else {
        Some(Rc::new(Labels { label, prev: list.clone() }))
    }
}

fn to_vec(list: &Option<Rc<Labels>>) -> Vec<Label> {
    let mut out = Vec::new();
    let mut cur = list.as_deref();
    while let Some(n) = cur {
        out.push(n.label);
        cur = n.prev.as_deref();
    }
    out.reverse();
    out
}

struct Partial {
    priority: f64,
    seq: u64,
    state: StateId,
    cost: f64,
    complete: bool,
    ilabels: Option<Rc<Labels>>,
    olabels: Option<Rc<Labels>>,
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Partial {}
impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Partial {
    // Min-heap on priority, FIFO on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

const MAX_POPS: usize = 200_000;
/// Pops spent on paths tied with the n-th best once `n` paths are known.
/// Zero-weight cycles make such ties unbounded.
const MAX_TIE_POPS: usize = 10_000;

/// The `n` lowest-cost complete paths, ascending by weight; equal weights
/// are ordered lexicographically by input labels, then output labels.
///
/// Search is A* with the exact cost-to-final as heuristic, so negative arc
/// weights are fine as long as there is no negative cycle.
pub fn shortest_path(f: &Fst, n: usize) -> Result<Vec<Path>> {
    if f.semiring() != Semiring::Tropical {
        return Err(Error::config("shortest_path requires the tropical semiring"));
    }
    let Some(start) = f.start() else {
        return Ok(Vec::new());
    };
    if n == 0 {
        return Ok(Vec::new());
    }
    let to_final = distance_to_final(f)?;
    if to_final[start as usize] == f64::INFINITY {
        return Ok(Vec::new());
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Partial {
        priority: to_final[start as usize],
        seq,
        state: start,
        cost: 0.0,
        complete: false,
        ilabels: None,
        olabels: None,
    });
    let mut found: Vec<Path> = Vec::new();
    let mut pops = 0usize;
    let mut tie_pops = 0usize;
    while let Some(p) = heap.pop() {
        pops += 1;
        if found.len() >= n {
            let bound = found[n - 1].weight;
            tie_pops += 1;
            if p.priority > bound + 1e-9 * (1.0 + bound.abs()) || tie_pops > MAX_TIE_POPS {
                break;
            }
        }
        if pops > MAX_POPS {
            log::warn!("shortest_path: pop limit reached, results may be truncated");
            break;
        }
        if p.complete {
            found.push(Path {
                ilabels: to_vec(&p.ilabels),
                olabels: to_vec(&p.olabels),
                weight: p.cost,
            });
            // Keep the n best under the final order; the n-th sets the bound.
            found.sort_by(path_order);
            found.truncate(n);
            continue;
        }
        let fw = f.final_weight(p.state);
        if fw < f64::INFINITY {
            seq += 1;
            heap.push(Partial {
                priority: p.cost + fw,
                seq,
                state: p.state,
                cost: p.cost + fw,
                complete: true,
                ilabels: p.ilabels.clone(),
                olabels: p.olabels.clone(),
            });
        }
        for a in f.arcs(p.state) {
            let h = to_final[a.nextstate as usize];
            if h == f64::INFINITY {
                continue;
            }
            let cost = p.cost + a.weight;
            let il = push(&p.ilabels, a.ilabel);
            let ol = push(&p.olabels, a.olabel);
            seq += 1;
            heap.push(Partial {
                priority: cost + h,
                seq,
                state: a.nextstate,
                cost,
                complete: false,
                ilabels: il,
                olabels: ol,
            });
        }
    }
    found.sort_by(path_order);
    Ok(found)
}

fn path_order(a: &Path, b: &Path) -> Ordering {
    a.weight
        .total_cmp(&b.weight)
        .then_with(|| a.ilabels.cmp(&b.ilabels))
        .then_with(|| a.olabels.cmp(&b.olabels))
}

/// Bellman-Ford style relaxation of cost-to-final over all states.
pub(crate) fn distance_to_final(f: &Fst) -> Result<Vec<f64>> {
    let n = f.num_states();
    let mut d: Vec<f64> = f.states().map(|s| f.final_weight(s)).collect();
    for round in 0..=n {
        let mut changed = false;
        for s in f.states() {
            let mut best = d[s as usize];
            for a in f.arcs(s) {
                let c = a.weight + d[a.nextstate as usize];
                if c < best - 1e-12 * (1.0 + c.abs()) {
                    best = c;
                }
            }
            if best < d[s as usize] {
                d[s as usize] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(d);
        }
        if round == n {
            break;
        }
    }
    Err(Error::config("shortest_path: negative-weight cycle"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::{Arc, SymbolTable};

    fn table() -> SymbolTable {
        let mut t = SymbolTable::new();
        t.add("a");
        t.add("b");
        t
    }

    #[test]
    fn two_paths_ordered_by_weight() {
        // 5 states: 0 -a-> 1 -b-> 4 (0.5 + 1.0), 0 -b-> 2 -a-> 3 -> 4 (2.0)
        let mut f = Fst::acceptor(Semiring::Tropical, table());
        for _ in 0..5 {
            f.add_state();
        }
        f.set_start(0);
        f.set_final(4, 0.0);
        f.add_arc(0, Arc::new(1, 1, 0.5, 1));
        f.add_arc(1, Arc::new(2, 2, 1.0, 4));
        f.add_arc(0, Arc::new(2, 2, 1.0, 2));
        f.add_arc(2, Arc::new(1, 1, 0.5, 3));
        f.add_arc(3, Arc::new(0, 0, 0.5, 4));
        let p = shortest_path(&f, 5).unwrap();
        let w: Vec<f64> = p.iter().map(|p| p.weight).collect();
        assert_eq!(w, vec![1.5, 2.0]);
    }

    #[test]
    fn ties_break_on_input_labels() {
        let mut f = Fst::acceptor(Semiring::Tropical, table());
        let s0 = f.add_state();
        let s1 = f.add_state();
        f.set_start(s0);
        f.set_final(s1, 0.0);
        f.add_arc(s0, Arc::new(2, 2, 1.0, s1));
        f.add_arc(s0, Arc::new(1, 1, 1.0, s1));
        let p = shortest_path(&f, 2).unwrap();
        assert_eq!(p[0].ilabels, vec![1]);
        assert_eq!(p[1].ilabels, vec![2]);
    }

    #[test]
    fn log_semiring_rejected() {
        let f = Fst::acceptor(Semiring::Log, table());
        assert!(matches!(shortest_path(&f, 1), Err(Error::Config(_))));
    }

    #[test]
    fn negative_arcs_without_cycles() {
        let mut f = Fst::acceptor(Semiring::Tropical, table());
        let (s0, s1, s2) = (f.add_state(), f.add_state(), f.add_state());
        f.set_start(s0);
        f.set_final(s2, 0.0);
        f.add_arc(s0, Arc::new(1, 1, 3.0, s1));
        f.add_arc(s1, Arc::new(0, 0, -2.5, s2));
        f.add_arc(s0, Arc::new(2, 2, 1.0, s2));
        let p = shortest_path(&f, 3).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].weight, 0.5);
        assert_eq!(p[1].weight, 1.0);
    }
}
