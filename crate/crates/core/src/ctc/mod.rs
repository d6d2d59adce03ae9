//! CTC loss and gradient by log-space forward-backward, greedy collapse
//! decoding, synthetic feature generation and a bidirectional LSTM
//! acoustic model.
//!
//! Symbol 0 of a [`PosteriorGrid`] is the blank; units are `1..symbols`.

mod am;
mod features;

pub use am::{train_am, AcousticModel, AmConfig, EpochStats, Utterance};
pub use features::{read_features, read_labels, write_features, write_labels, FeatureSynth};

use crate::error::{Error, Result};
use crate::nn::{log_softmax, log_sum_exp};

pub const BLANK: usize = 0;

/// Tolerance on per-row normalization of a grid.
const ROW_TOLERANCE: f64 = 1e-9;

/// `T × |Z'|` matrix of per-frame log posteriors.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    frames: usize,
    symbols: usize,
    data: Vec<f64>,
}

impl PosteriorGrid {
    /// Wraps rows of log posteriors; every row must log-sum-exp to 0.
    pub fn from_log_probs(rows: Vec<Vec<f64>>) -> Result<Self> {
        let symbols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || symbols < 2 {
            return Err(Error::data("posterior grid needs at least one frame and two symbols"));
        }
        for (t, r) in rows.iter().enumerate() {
            if r.len() != symbols {
                return Err(Error::data(format!("frame {t} has {} symbols, expected {symbols}", r.len())));
            }
            let z = log_sum_exp(r);
            if !(z.abs() <= ROW_TOLERANCE) {
                return Err(Error::data(format!("frame {t} is not normalized (log-sum-exp {z})")));
            }
        }
        Ok(PosteriorGrid {
            frames: rows.len(),
            symbols,
            data: rows.concat(),
        })
    }

    /// Applies log-softmax to each row of `logits`.
    pub fn from_logits(logits: &[Vec<f64>]) -> Result<Self> {
        Self::from_log_probs(logits.iter().map(|r| log_softmax(r)).collect())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Number of symbols including the blank.
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.symbols..(t + 1) * self.symbols]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[t * self.symbols + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.symbols)
    }
}

/// The collapse mapping: merge repeats, then drop blanks.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Per-frame argmax (lowest index on ties) followed by [`collapse`].
pub fn greedy_collapse(grid: &PosteriorGrid) -> Vec<usize> {
    let path: Vec<usize> = grid
        .rows()
        .map(|r| {
            let mut best = 0;
            for (k, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse(&path)
}

/// Minimum number of frames that can carry `labels`.
pub fn min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

fn check(grid: &PosteriorGrid, labels: &[usize]) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&k| k == BLANK || k >= grid.symbols) {
        return Err(Error::data(format!("label {bad} outside units 1..{}", grid.symbols)));
    }
    if min_frames(labels) > grid.frames {
        return Err(Error::data(format!(
            "label too long: {} labels need {} frames, grid has {}",
            labels.len(),
            min_frames(labels),
            grid.frames
        )));
    }
    Ok(())
}

fn extended(labels: &[usize]) -> Vec<usize> {
    let mut l = Vec::with_capacity(2 * labels.len() + 1);
    l.push(BLANK);
    for &k in labels {
        l.push(k);
        l.push(BLANK);
    }
    l
}

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log-space forward variables `alpha[t][s]` over the blank-extended labels.
fn forward(grid: &PosteriorGrid, ext: &[usize]) -> Vec<Vec<f64>> {
    let s_len = ext.len();
    let mut alpha = vec![vec![f64::NEG_INFINITY; s_len]; grid.frames];
    alpha[0][0] = grid.get(0, ext[0]);
    if s_len > 1 {
        alpha[0][1] = grid.get(0, ext[1]);
    }
    for t in 1..grid.frames {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = lse2(a, alpha[t - 1][s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                a = lse2(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = a + grid.get(t, ext[s]);
        }
    }
    alpha
}

/// Log-space backward variables; `beta[t][s]` includes frame `t`'s posterior.
fn backward(grid: &PosteriorGrid, ext: &[usize]) -> Vec<Vec<f64>> {
    let s_len = ext.len();
    let last = grid.frames - 1;
    let mut beta = vec![vec![f64::NEG_INFINITY; s_len]; grid.frames];
    beta[last][s_len - 1] = grid.get(last, ext[s_len - 1]);
    if s_len > 1 {
        beta[last][s_len - 2] = grid.get(last, ext[s_len - 2]);
    }
    for t in (0..last).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s];
            if s + 1 < s_len {
                b = lse2(b, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && ext[s] != BLANK && ext[s] != ext[s + 2] {
                b = lse2(b, beta[t + 1][s + 2]);
            }
            beta[t][s] = b + grid.get(t, ext[s]);
        }
    }
    beta
}

fn log_prob(alpha: &[Vec<f64>]) -> f64 {
    let a = alpha.last().expect("at least one frame");
    let s = a.len();
    if s > 1 {
        lse2(a[s - 1], a[s - 2])
    } else {
        a[0]
    }
}

/// `-ln P(z|x)`, summing over every frame path that collapses to `labels`.
pub fn ctc_loss(grid: &PosteriorGrid, labels: &[usize]) -> Result<f64> {
    check(grid, labels)?;
    let ext = extended(labels);
    Ok(-log_prob(&forward(grid, &ext)))
}

/// Loss and its gradient with respect to the pre-softmax logits that
/// produced `grid`: `y_t(k) - γ_t(k)` with `γ` the symbol occupancy.
pub fn ctc_grad(grid: &PosteriorGrid, labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    check(grid, labels)?;
    let ext = extended(labels);
    let alpha = forward(grid, &ext);
    let beta = backward(grid, &ext);
    let lp = log_prob(&alpha);
    let mut grads = Vec::with_capacity(grid.frames);
    for t in 0..grid.frames {
        let mut occ = vec![f64::NEG_INFINITY; grid.symbols];
        for (s, &k) in ext.iter().enumerate() {
            let v = alpha[t][s] + beta[t][s] - grid.get(t, k);
            occ[k] = lse2(occ[k], v);
        }
        grads.push(
            grid.row(t)
                .iter()
                .zip(&occ)
                .map(|(&y, &o)| y.exp() - (o - lp).exp())
                .collect(),
        );
    }
    Ok((-lp, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[f64]]) -> PosteriorGrid {
        let logs = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|p| (p / s).ln()).collect()
            })
            .collect();
        PosteriorGrid::from_log_probs(logs).unwrap()
    }

    #[test]
    fn single_frame_single_label() {
        let g = grid(&[&[0.2, 0.5, 0.3]]);
        assert!((ctc_loss(&g, &[1]).unwrap() + 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn five_paths_for_ab_in_three_frames() {
        let p = [[0.2, 0.5, 0.3], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]];
        let g = grid(&[&p[0], &p[1], &p[2]]);
        let (a, b, e) = (1, 2, 0);
        let paths = [[a, a, b], [a, b, b], [a, b, e], [a, e, b], [e, a, b]];
        let want: f64 = paths
            .iter()
            .map(|pi| pi.iter().enumerate().map(|(t, &k)| p[t][k]).product::<f64>())
            .sum();
        assert!((ctc_loss(&g, &[1, 2]).unwrap() + want.ln()).abs() < 1e-12);
    }

    #[test]
    fn repeated_label_needs_separator() {
        let g = grid(&[&[0.2, 0.8], &[0.5, 0.5]]);
        let err = ctc_loss(&g, &[1, 1]).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("label too long")));
    }

    #[test]
    fn single_frame_gradient_is_xent() {
        let g = grid(&[&[0.2, 0.5, 0.3]]);
        let (_, d) = ctc_grad(&g, &[2]).unwrap();
        let want = [0.2, 0.5, 0.3 - 1.0];
        for (x, y) in d[0].iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(collapse(&[1, 1, 0, 1]), vec![1, 1]);
        let g = grid(&[&[0.9, 0.1], &[0.8, 0.2]]);
        assert!(greedy_collapse(&g).is_empty());
    }

    #[test]
    fn unnormalized_rows_rejected() {
        assert!(PosteriorGrid::from_log_probs(vec![vec![0.0, 0.0]]).is_err());
    }
}
