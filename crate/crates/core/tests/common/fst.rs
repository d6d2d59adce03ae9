use std::collections::HashMap;

use csasr::fst::{Arc, Fst, Label, Semiring, SymbolTable, EPSILON};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Weighted relation: `(input labels, output labels) -> weight`, epsilons removed.
pub type Relation = HashMap<(Vec<Label>, Vec<Label>), f64>;

pub fn table(prefix: &str, n: usize) -> SymbolTable {
    let mut t = SymbolTable::new();
    for i in 0..n {
        t.add(&format!("{prefix}{i}"));
    }
    t
}

/// Which arcs must point to a higher-numbered state. Forbidding epsilon
/// cycles on one tape keeps every length-bounded enumeration finite.
#[derive(Clone, Copy, Debug)]
pub enum Forward {
    EpsInput,
    EpsOutput,
    EpsEither,
    /// No epsilon labels at all.
    NoEps,
}

/// Tropical weights are multiples of 1/4 so every path sum is exact.
fn weight(rng: &mut ChaCha8Rng, k: Semiring) -> f64 {
    match k {
        Semiring::Tropical => rng.random_range(0..12) as f64 * 0.25,
        Semiring::Log => rng.random_range(0.1..3.0),
    }
}

pub fn random_machine(
    rng: &mut ChaCha8Rng,
    k: Semiring,
    isyms: &SymbolTable,
    osyms: &SymbolTable,
    max_states: u32,
    forward: Forward,
) -> Fst {
    let mut f = Fst::new(k, isyms.clone(), osyms.clone());
    let n = rng.random_range(1..=max_states);
    for _ in 0..n {
        f.add_state();
    }
    f.set_start(0);
    let (ni, no) = (isyms.len() as Label - 1, osyms.len() as Label - 1);
    for s in 0..n {
        if rng.random_bool(0.4) || s == n - 1 {
            let w = weight(rng, k);
            f.set_final(s, w);
        }
        for _ in 0..rng.random_range(0..4) {
            let p_eps = if matches!(forward, Forward::NoEps) { 0.0 } else { 0.25 };
            let il = if rng.random_bool(p_eps) { EPSILON } else { rng.random_range(1..=ni) };
            let ol = if rng.random_bool(p_eps) { EPSILON } else { rng.random_range(1..=no) };
            let must_forward = match forward {
                Forward::EpsInput => il == EPSILON,
                Forward::EpsOutput => ol == EPSILON,
                Forward::EpsEither => il == EPSILON || ol == EPSILON,
                Forward::NoEps => false,
            };
            let dst = if must_forward {
                if s + 1 == n {
                    continue;
                }
                rng.random_range(s + 1..n)
            } else {
                rng.random_range(0..n)
            };
            let w = weight(rng, k);
            f.add_arc(s, Arc::new(il, ol, w, dst));
        }
    }
    f
}

/// Enumerates every complete path whose input and output strings stay
/// within the bounds and sums path weights per string pair.
pub fn relation(f: &Fst, max_in: usize, max_out: usize) -> Relation {
    let k = f.semiring();
    let mut rel = Relation::new();
    let Some(start) = f.start() else { return rel };
    let mut stack = vec![(start, Vec::new(), Vec::new(), k.one())];
    while let Some((s, x, y, w)) = stack.pop() {
        let fw = f.final_weight(s);
        if fw < f64::INFINITY {
            let e = rel.entry((x.clone(), y.clone())).or_insert(k.zero());
            *e = k.plus(*e, k.times(w, fw));
        }
        for a in f.arcs(s) {
            let mut x2 = x.clone();
            let mut y2 = y.clone();
            if a.ilabel != EPSILON {
                x2.push(a.ilabel);
            }
            if a.olabel != EPSILON {
                y2.push(a.olabel);
            }
            if x2.len() <= max_in && y2.len() <= max_out {
                stack.push((a.nextstate, x2, y2, k.times(w, a.weight)));
            }
        }
    }
    rel
}

/// `⊕_y a(x, y) ⊗ b(y, z)` from enumerated relations.
pub fn join(k: Semiring, a: &Relation, b: &Relation) -> Relation {
    let mut by_mid: HashMap<&Vec<Label>, Vec<(&Vec<Label>, f64)>> = HashMap::new();
    for ((y, z), w) in b {
        by_mid.entry(y).or_default().push((z, *w));
    }
    let mut out = Relation::new();
    for ((x, y), wa) in a {
        for (z, wb) in by_mid.get(y).into_iter().flatten() {
            let e = out.entry((x.clone(), (*z).clone())).or_insert(k.zero());
            *e = k.plus(*e, k.times(*wa, *wb));
        }
    }
    out
}

/// Semiring sum of several relations.
pub fn sum(k: Semiring, rels: &[Relation]) -> Relation {
    let mut out = Relation::new();
    for r in rels {
        for (key, w) in r {
            let e = out.entry(key.clone()).or_insert(k.zero());
            *e = k.plus(*e, *w);
        }
    }
    out
}

/// Largest weight difference between two relations, ignoring entries
/// equal to semiring zero; infinite when their supports differ.
pub fn max_difference(a: &Relation, b: &Relation) -> f64 {
    let live = |r: &Relation| -> HashMap<(Vec<Label>, Vec<Label>), f64> {
        r.iter().filter(|(_, w)| w.is_finite()).map(|(k, w)| (k.clone(), *w)).collect()
    };
    let (a, b) = (live(a), live(b));
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (key, wa) in &a {
        match b.get(key) {
            Some(wb) => worst = worst.max((wa - wb).abs()),
            None => return f64::INFINITY,
        }
    }
    worst
}

pub const MAX_LEN: usize = 5;

/// Checks composition and union of one random pair against the
/// enumeration oracles; returns the worst weight differences.
pub fn check_pair(rng: &mut ChaCha8Rng, k: Semiring) -> (f64, f64) {
    let (x, y, z) = (table("x", 3), table("y", 3), table("z", 3));
    let a = random_machine(rng, k, &x, &y, 6, Forward::EpsInput);
    let b = random_machine(rng, k, &y, &z, 6, Forward::EpsOutput);
    let composed = csasr::fst::compose(&a, &b).expect("compatible machines");
    let want = join(k, &relation(&a, MAX_LEN, usize::MAX), &relation(&b, usize::MAX, MAX_LEN));
    let comp = max_difference(&relation(&composed, MAX_LEN, MAX_LEN), &want);

    let c = random_machine(rng, k, &x, &y, 6, Forward::EpsEither);
    let d = random_machine(rng, k, &x, &y, 6, Forward::EpsEither);
    let u = csasr::fst::union(&[c.clone(), d.clone()]).expect("compatible machines");
    let want = sum(k, &[relation(&c, MAX_LEN, MAX_LEN), relation(&d, MAX_LEN, MAX_LEN)]);
    let uni = max_difference(&relation(&u, MAX_LEN, MAX_LEN), &want);
    (comp, uni)
}

/// Every `(input symbols, output symbols)` pair of complete paths reading
/// exactly `frames` inputs.
pub fn fixed_length_paths(f: &Fst, frames: usize) -> std::collections::BTreeSet<(Vec<String>, Vec<String>)> {
    let mut out = std::collections::BTreeSet::new();
    let name = |t: &SymbolTable, l: Label| t.symbol(l).expect("label in table").to_string();
    let mut stack = vec![(f.start().expect("start state"), Vec::new(), Vec::new())];
    while let Some((s, x, y)) = stack.pop() {
        if x.len() == frames && f.is_final(s) {
            out.insert((x.clone(), y.clone()));
        }
        for a in f.arcs(s) {
            let mut x2 = x.clone();
            let mut y2 = y.clone();
            if a.ilabel != EPSILON {
                x2.push(name(f.isyms(), a.ilabel));
            }
            if a.olabel != EPSILON {
                y2.push(name(f.osyms(), a.olabel));
            }
            if x2.len() <= frames {
                stack.push((a.nextstate, x2, y2));
            }
        }
    }
    out
}

/// `{(π, B(π))}` over all frame strings `π` of the given length, where `B`
/// merges repeats and then drops `blank`.
pub fn collapse_pairs(symbols: &[String], blank: &str, frames: usize) -> std::collections::BTreeSet<(Vec<String>, Vec<String>)> {
    let mut out = std::collections::BTreeSet::new();
    let k = symbols.len();
    let total = k.pow(frames as u32);
    for mut code in 0..total {
        let mut pi = Vec::with_capacity(frames);
        for _ in 0..frames {
            pi.push(symbols[code % k].clone());
            code /= k;
        }
        let mut z: Vec<String> = Vec::new();
        let mut prev: Option<&String> = None;
        for s in &pi {
            if Some(s) != prev && s != blank {
                z.push(s.clone());
            }
            prev = Some(s);
        }
        out.insert((pi, z));
    }
    out
}

/// Compares the token transducer with the collapse mapping for every
/// inventory of 1..=3 units and frame count 1..=5; returns the number of
/// frame strings checked, or the first mismatch.
pub fn check_token_fst() -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=3 {
        let names: Vec<String> = ["p", "q", "r"][..n].iter().map(|s| s.to_string()).collect();
        let inv = csasr::graph::UnitInventory::new(&names.iter().map(String::as_str).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        let t = csasr::graph::build_token_fst(&inv);
        let mut symbols = vec![csasr::graph::BLANK.to_string()];
        symbols.extend(names.iter().cloned());
        for frames in 1..=5 {
            let got = fixed_length_paths(&t, frames);
            let want = collapse_pairs(&symbols, csasr::graph::BLANK, frames);
            if got != want {
                let extra = got.difference(&want).next();
                let missing = want.difference(&got).next();
                return Err(format!("{n} units, {frames} frames: extra {extra:?}, missing {missing:?}"));
            }
            checked += want.len();
        }
    }
    Ok(checked)
}
