use csasr::ctc::{collapse, min_frames, PosteriorGrid};
use csasr::nn::log_sum_exp;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Sums the probability of every frame path in `symbols^T` whose collapse
/// equals `labels`.
pub fn brute_force_log_prob(grid: &PosteriorGrid, labels: &[usize]) -> f64 {
    let (t_len, k) = (grid.frames(), grid.symbols());
    let mut terms = Vec::new();
    let mut path = vec![0usize; t_len];
    loop {
        if collapse(&path) == labels {
            terms.push((0..t_len).map(|t| grid.get(t, path[t])).sum::<f64>());
        }
        let mut i = 0;
        loop {
            if i == t_len {
                return log_sum_exp(&terms);
            }
            path[i] += 1;
            if path[i] < k {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

pub fn random_logits(rng: &mut ChaCha8Rng, t: usize, k: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    loop {
        let t = rng.random_range(1..=8);
        let z = rng.random_range(1..=4);
        let u = rng.random_range(1..=4);
        let labels: Vec<usize> = (0..u).map(|_| rng.random_range(1..=z)).collect();
        if min_frames(&labels) <= t {
            return (random_logits(rng, t, z + 1), labels);
        }
    }
}
