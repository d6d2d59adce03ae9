use std::collections::{HashMap, VecDeque};

use super::{Arc, Fst, Label, StateId, EPSILON};
use crate::error::{Error, Result};

/// Epsilon filter state. `Free` admits every move, `LeftOnly` follows a
/// left-alone epsilon move, `RightOnly` follows a right-alone epsilon move.
/// Paired epsilon moves are only taken from `Free`, which gives each pair of
/// component paths exactly one composed path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Filter {
    Free,
    LeftOnly,
    RightOnly,
}

type Triple = (StateId, StateId, Filter);

/// Composes `a` with `b`: the relation of the result maps `x` to `z`
/// with weight `⊕_y a(x, y) ⊗ b(y, z)`.
pub fn compose(a: &Fst, b: &Fst) -> Result<Fst> {
    if a.semiring() != b.semiring() {
        return Err(Error::config("compose: semiring mismatch"));
    }
    if a.osyms() != b.isyms() {
        return Err(Error::config(
            "compose: output symbols of the left machine differ from input symbols of the right machine",
        ));
    }
    let k = a.semiring();
    let mut out = Fst::new(k, a.isyms().clone(), b.osyms().clone());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(out);
    };

    // Right-machine arcs grouped by input label for matching.
    let b_index: Vec<HashMap<Label, Vec<usize>>> = b
        .states()
        .map(|s| {
            let mut m: HashMap<Label, Vec<usize>> = HashMap::new();
            for (i, arc) in b.arcs(s).iter().enumerate() {
                m.entry(arc.ilabel).or_default().push(i);
            }
            m
        })
        .collect();

    let mut ids: HashMap<Triple, StateId> = HashMap::new();
    let mut queue: VecDeque<Triple> = VecDeque::new();
    let start = (sa, sb, Filter::Free);
    ids.insert(start, out.add_state());
    out.set_start(0);
    queue.push_back(start);

    let mut pending: Vec<(Triple, Label, Label, f64)> = Vec::new();
    while let Some(tr @ (qa, qb, filter)) = queue.pop_front() {
        let src = ids[&tr];
        pending.clear();
        let fw = k.times(a.final_weight(qa), b.final_weight(qb));
        if fw < f64::INFINITY {
            out.set_final(src, fw);
        }
        let bi = &b_index[qb as usize];
        for ea in a.arcs(qa) {
            if ea.olabel != EPSILON {
                if let Some(list) = bi.get(&ea.olabel) {
                    for &j in list {
                        let eb = b.arcs(qb)[j];
                        pending.push((
                            (ea.nextstate, eb.nextstate, Filter::Free),
                            ea.ilabel,
                            eb.olabel,
                            k.times(ea.weight, eb.weight),
                        ));
                    }
                }
            } else {
                if filter == Filter::Free {
                    if let Some(list) = bi.get(&EPSILON) {
                        for &j in list {
                            let eb = b.arcs(qb)[j];
                            pending.push((
                                (ea.nextstate, eb.nextstate, Filter::Free),
                                ea.ilabel,
                                eb.olabel,
                                k.times(ea.weight, eb.weight),
                            ));
                        }
                    }
                }
                if filter != Filter::RightOnly {
                    pending.push((
                        (ea.nextstate, qb, Filter::LeftOnly),
                        ea.ilabel,
                        EPSILON,
                        ea.weight,
                    ));
                }
            }
        }
        if filter != Filter::LeftOnly {
            if let Some(list) = bi.get(&EPSILON) {
                for &j in list {
                    let eb = b.arcs(qb)[j];
                    pending.push((
                        (qa, eb.nextstate, Filter::RightOnly),
                        EPSILON,
                        eb.olabel,
                        eb.weight,
                    ));
                }
            }
        }
        for &(dst, il, ol, w) in &pending {
            let next = match ids.get(&dst) {
                Some(&id) => id,
                None => {
                    let id = out.add_state();
                    ids.insert(dst, id);
                    queue.push_back(dst);
                    id
                }
            };
            out.add_arc(src, Arc::new(il, ol, w, next));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::{connect, Semiring, SymbolTable};

    fn syms(n: usize) -> SymbolTable {
        let mut t = SymbolTable::new();
        for i in 0..n {
            t.add(&format!("s{i}"));
        }
        t
    }

    #[test]
    fn empty_right_side_annihilates() {
        let t = syms(2);
        let mut a = Fst::acceptor(Semiring::Tropical, t.clone());
        let s0 = a.add_state();
        let s1 = a.add_state();
        a.set_start(s0);
        a.set_final(s1, 0.0);
        a.add_arc(s0, Arc::new(1, 2, 0.5, s1));
        let mut empty = Fst::acceptor(Semiring::Tropical, t);
        let e0 = empty.add_state();
        empty.set_start(e0);
        empty.add_arc(e0, Arc::new(2, 2, 0.0, e0));
        let c = connect(&compose(&a, &empty).unwrap());
        assert!(c.is_empty());
        assert_eq!(c.num_states(), 0);
    }

    #[test]
    fn mismatched_tables_are_rejected() {
        let a = Fst::acceptor(Semiring::Tropical, syms(2));
        let b = Fst::acceptor(Semiring::Tropical, syms(3));
        assert!(matches!(compose(&a, &b), Err(Error::Config(_))));
        let c = Fst::acceptor(Semiring::Log, syms(2));
        assert!(matches!(compose(&a, &c), Err(Error::Config(_))));
    }

    #[test]
    fn epsilon_pairs_are_not_duplicated() {
        // a: x:eps then eps-free; b: eps:z. Under the log semiring a
        // duplicated path would show up as a weight shift of ln 2.
        let t = syms(2);
        let mut a = Fst::acceptor(Semiring::Log, t.clone());
        let (a0, a1) = (a.add_state(), a.add_state());
        a.set_start(a0);
        a.set_final(a1, 0.0);
        a.add_arc(a0, Arc::new(1, 0, 1.0, a1));
        let mut b = Fst::acceptor(Semiring::Log, t);
        let (b0, b1) = (b.add_state(), b.add_state());
        b.set_start(b0);
        b.set_final(b1, 0.0);
        b.add_arc(b0, Arc::new(0, 2, 2.0, b1));
        let c = connect(&compose(&a, &b).unwrap());
        let paths = crate::fst::shortest_path(
            &{
                let mut tc = c.clone();
                tc.semiring = Semiring::Tropical;
                tc
            },
            10,
        )
        .unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].ilabels, vec![1]);
        assert_eq!(paths[0].olabels, vec![2]);
        assert!((paths[0].weight - 3.0).abs() < 1e-12);
    }
}
