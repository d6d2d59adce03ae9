use std::collections::HashMap;

use csasr::ctc::PosteriorGrid;
use csasr::fst::{Arc, Fst, Semiring, EPSILON};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::fst::table;

/// Random graph whose epsilon-input arcs only go forward, so every
/// fixed-length input has finitely many paths.
pub fn random_graph(rng: &mut ChaCha8Rng, symbols: usize, words: usize) -> Fst {
    let mut g = Fst::new(Semiring::Tropical, table("s", symbols), table("w", words));
    let n = rng.random_range(2..5u32);
    for _ in 0..n {
        g.add_state();
    }
    g.set_start(0);
    for s in 0..n {
        if rng.random_bool(0.5) || s == n - 1 {
            g.set_final(s, rng.random_range(0.0..2.0));
        }
        for _ in 0..rng.random_range(1..4) {
            let ilabel = rng.random_range(1..=symbols as u32);
            let olabel = if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=words as u32) };
            g.add_arc(s, Arc::new(ilabel, olabel, rng.random_range(0.0..2.0), rng.random_range(0..n)));
        }
        if s + 1 < n && rng.random_bool(0.4) {
            let olabel = if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=words as u32) };
            g.add_arc(s, Arc::new(EPSILON, olabel, rng.random_range(0.0..1.0), rng.random_range(s + 1..n)));
        }
    }
    g
}

pub fn random_grid(rng: &mut ChaCha8Rng, t: usize, s: usize) -> PosteriorGrid {
    let logits: Vec<Vec<f64>> = (0..t).map(|_| (0..s).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    PosteriorGrid::from_logits(&logits).unwrap()
}

/// Best total cost per output word sequence over all complete paths.
pub fn enumerate(g: &Fst, grid: &PosteriorGrid, scale: f64) -> HashMap<Vec<String>, f64> {
    let mut best: HashMap<Vec<String>, f64> = HashMap::new();
    let mut stack = vec![(g.start().unwrap(), 0usize, 0.0f64, Vec::<u32>::new())];
    while let Some((s, t, cost, out)) = stack.pop() {
        if t == grid.frames() && g.is_final(s) {
            let words: Vec<String> = out.iter().map(|&l| g.osyms().symbol(l).unwrap().to_string()).collect();
            let c = cost + g.final_weight(s);
            let e = best.entry(words).or_insert(f64::INFINITY);
            *e = e.min(c);
        }
        for a in g.arcs(s) {
            let mut o = out.clone();
            if a.olabel != EPSILON {
                o.push(a.olabel);
            }
            if a.ilabel == EPSILON {
                stack.push((a.nextstate, t, cost + a.weight, o));
            } else if t < grid.frames() {
                let ac = -scale * grid.get(t, (a.ilabel - 1) as usize);
                stack.push((a.nextstate, t + 1, cost + a.weight + ac, o));
            }
        }
    }
    best
}
