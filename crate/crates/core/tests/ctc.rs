mod common;

use common::ctc::{brute_force_log_prob, random_case, random_logits};
use csasr::ctc::{
    collapse, ctc_grad, ctc_loss, greedy_collapse, train_am, AmConfig, FeatureSynth, PosteriorGrid, Utterance,
};
use csasr::nn::relative_error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn loss_matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..60 {
        let (logits, labels) = random_case(&mut rng);
        let g = PosteriorGrid::from_logits(&logits).unwrap();
        let want = -brute_force_log_prob(&g, &labels);
        let got = ctc_loss(&g, &labels).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want} for {labels:?}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 1e-5;
    for _ in 0..20 {
        let labels: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=3)).collect();
        let logits = random_logits(&mut rng, 6, 4);
        let loss = |l: &[Vec<f64>]| ctc_loss(&PosteriorGrid::from_logits(l).unwrap(), &labels).unwrap();
        let (_, g) = ctc_grad(&PosteriorGrid::from_logits(&logits).unwrap(), &labels).unwrap();
        for t in 0..6 {
            assert!(g[t].iter().sum::<f64>().abs() < 1e-10);
            for k in 0..4 {
                let mut up = logits.clone();
                up[t][k] += eps;
                let mut dn = logits.clone();
                dn[t][k] -= eps;
                let fd = (loss(&up) - loss(&dn)) / (2.0 * eps);
                assert!(relative_error(g[t][k], fd, 1e-6) < 1e-4, "{} vs {fd}", g[t][k]);
            }
        }
    }
}

#[test]
fn greedy_matches_argmax_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let t = rng.random_range(1..10);
        let logits = random_logits(&mut rng, t, 4);
        let g = PosteriorGrid::from_logits(&logits).unwrap();
        let path: Vec<usize> = logits
            .iter()
            .map(|r| (0..4).fold(0, |b, k| if r[k] > r[b] { k } else { b }))
            .collect();
        assert_eq!(greedy_collapse(&g), collapse(&path));
    }
}

proptest! {
    #[test]
    fn loss_invariant_under_unit_permutation(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (logits, labels) = random_case(&mut rng);
        let k = logits[0].len();
        // Reverse the unit ids 1..k, keep blank.
        let perm = |s: usize| if s == 0 { 0 } else { k - s };
        let permuted: Vec<Vec<f64>> = logits
            .iter()
            .map(|r| (0..k).map(|s| r[perm(s)]).collect())
            .collect();
        let plabels: Vec<usize> = labels.iter().map(|&s| perm(s)).collect();
        let a = ctc_loss(&PosteriorGrid::from_logits(&logits).unwrap(), &labels).unwrap();
        let b = ctc_loss(&PosteriorGrid::from_logits(&permuted).unwrap(), &plabels).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn loss_bounded_by_best_single_path(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (logits, labels) = random_case(&mut rng);
        let g = PosteriorGrid::from_logits(&logits).unwrap();
        // Best single path by exhaustive search over the enumeration.
        let (t_len, k) = (g.frames(), g.symbols());
        let mut best = f64::NEG_INFINITY;
        for code in 0..k.pow(t_len as u32) {
            let path: Vec<usize> = (0..t_len).map(|t| code / k.pow(t as u32) % k).collect();
            if collapse(&path) == labels {
                best = best.max((0..t_len).map(|t| g.get(t, path[t])).sum());
            }
        }
        prop_assert!(ctc_loss(&g, &labels).unwrap() <= -best + 1e-12);
    }
}

#[test]
fn acoustic_model_overfits_toy_set() {
    let synth = FeatureSynth::new(3, 4, 0.2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let words = [vec![vec![1, 2]], vec![vec![3, 1, 3]], vec![vec![2], vec![2, 3]], vec![vec![1]], vec![vec![3, 2, 1]]];
    let utts: Vec<Utterance> = words
        .iter()
        .enumerate()
        .map(|(i, w)| Utterance {
            id: format!("u{i}"),
            features: synth.synthesize(w, &mut rng).unwrap(),
            labels: w.concat(),
        })
        .collect();
    let cfg = AmConfig { hidden: 16, epochs: 200, learning_rate: 0.1, newbob_warmup: 150, seed: 7, ..Default::default() };
    let (model, stats) = train_am(&utts, &[], 4, &cfg).unwrap();
    let initial = stats[0].train_loss;
    let last = model.mean_loss(&utts).unwrap();
    assert!(last < 0.1 * initial, "{initial} -> {last}");
    assert_eq!(model.unit_error_rate(&utts).unwrap(), 0.0);
}
