use super::{Arc, Fst, StateId, EPSILON};
use crate::error::{Error, Result};

/// Union of machines sharing symbol tables and semiring. A fresh start
/// state reaches every component start through an epsilon arc of weight one.
pub fn union(fsts: &[Fst]) -> Result<Fst> {
    let first = fsts
        .first()
        .ok_or_else(|| Error::config("union of an empty list"))?;
    for f in &fsts[1..] {
        first.check_compatible(f)?;
    }
    let k = first.semiring();
    let mut out = Fst::new(k, first.isyms().clone(), first.osyms().clone());
    let start = out.add_state();
    out.set_start(start);
    for f in fsts {
        let Some(fs) = f.start() else { continue };
        let offset = out.num_states() as StateId;
        for _ in f.states() {
            out.add_state();
        }
        for s in f.states() {
            out.set_final(offset + s, f.final_weight(s));
            for a in f.arcs(s) {
                out.add_arc(
                    offset + s,
                    Arc::new(a.ilabel, a.olabel, a.weight, offset + a.nextstate),
                );
            }
        }
        out.add_arc(start, Arc::new(EPSILON, EPSILON, k.one(), offset + fs));
    }
    Ok(out)
}

/// Removes states that do not lie on a start-to-final path. State order is
/// preserved among survivors. Returns an empty machine when nothing survives.
pub fn connect(f: &Fst) -> Fst {
    let n = f.num_states();
    let mut out = Fst::new(f.semiring(), f.isyms().clone(), f.osyms().clone());
    let Some(start) = f.start() else { return out };

    let mut accessible = vec![false; n];
    let mut stack = vec![start];
    accessible[start as usize] = true;
    while let Some(s) = stack.pop() {
        for a in f.arcs(s) {
            if !accessible[a.nextstate as usize] {
                accessible[a.nextstate as usize] = true;
                stack.push(a.nextstate);
            }
        }
    }

    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in f.states() {
        for a in f.arcs(s) {
            reverse[a.nextstate as usize].push(s);
        }
    }
    let mut coaccessible = vec![false; n];
    for s in f.states() {
        if f.is_final(s) {
            coaccessible[s as usize] = true;
            stack.push(s);
        }
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s as usize] {
            if !coaccessible[p as usize] {
                coaccessible[p as usize] = true;
                stack.push(p);
            }
        }
    }

    if !(accessible[start as usize] && coaccessible[start as usize]) {
        return out;
    }
    let mut remap = vec![StateId::MAX; n];
    for s in 0..n {
        if accessible[s] && coaccessible[s] {
            remap[s] = out.add_state();
        }
    }
    for s in f.states() {
        let new = remap[s as usize];
        if new == StateId::MAX {
            continue;
        }
        out.set_final(new, f.final_weight(s));
        for a in f.arcs(s) {
            let dst = remap[a.nextstate as usize];
            if dst != StateId::MAX {
                out.add_arc(new, Arc::new(a.ilabel, a.olabel, a.weight, dst));
            }
        }
    }
    out.set_start(remap[start as usize]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::{shortest_path, Semiring, SymbolTable};

    fn abc() -> SymbolTable {
        let mut t = SymbolTable::new();
        for s in ["a", "b", "c", "d"] {
            t.add(s);
        }
        t
    }

    fn linear(labels: &[u32], weight: f64) -> Fst {
        let mut f = Fst::acceptor(Semiring::Tropical, abc());
        let mut prev = f.add_state();
        f.set_start(prev);
        for (i, &l) in labels.iter().enumerate() {
            let next = f.add_state();
            let w = if i == 0 { weight } else { 0.0 };
            f.add_arc(prev, Arc::new(l, l, w, next));
            prev = next;
        }
        f.set_final(prev, 0.0);
        f
    }

    #[test]
    fn union_of_two_strings_keeps_weights() {
        let u = union(&[linear(&[1, 2], 1.0), linear(&[3, 4], 2.0)]).unwrap();
        let paths = shortest_path(&u, 10).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].ilabels, vec![1, 2]);
        assert_eq!(paths[0].weight, 1.0);
        assert_eq!(paths[1].ilabels, vec![3, 4]);
        assert_eq!(paths[1].weight, 2.0);
    }

    #[test]
    fn union_with_empty_component() {
        let empty = Fst::acceptor(Semiring::Tropical, abc());
        let u = connect(&union(&[linear(&[1], 0.5), empty]).unwrap());
        let paths = shortest_path(&u, 10).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].weight, 0.5);
    }

    #[test]
    fn union_rejects_empty_list_and_mismatch() {
        assert!(matches!(union(&[]), Err(Error::Config(_))));
        let log = Fst::acceptor(Semiring::Log, abc());
        assert!(union(&[linear(&[1], 0.0), log]).is_err());
    }

    #[test]
    fn connect_drops_unreachable_and_dead_states() {
        let mut f = linear(&[1, 2], 0.0);
        let orphan = f.add_state();
        f.add_arc(orphan, Arc::new(3, 3, 0.0, 0));
        let dead = f.add_state();
        f.add_arc(0, Arc::new(4, 4, 0.0, dead));
        let c = connect(&f);
        assert_eq!(c.num_states(), 3);
        assert_eq!(shortest_path(&c, 5).unwrap(), shortest_path(&f, 5).unwrap());
    }

    #[test]
    fn connect_without_finals_is_empty() {
        let mut f = Fst::acceptor(Semiring::Tropical, abc());
        let s = f.add_state();
        f.set_start(s);
        f.add_arc(s, Arc::new(1, 1, 0.0, s));
        assert!(connect(&f).is_empty());
    }
}
