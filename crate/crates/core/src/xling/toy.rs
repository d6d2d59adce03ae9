use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::space::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Toy embedder for synthetic corpora: symmetric-window co-occurrence
/// counts, positive PMI, truncated SVD scaled by `sqrt(σ)`. Words are
/// ordered alphabetically.
pub fn train_toy_embeddings<S: AsRef<str>>(corpus: &[Vec<S>], dim: usize, window: usize) -> Result<EmbeddingSpace> {
    if dim == 0 || window == 0 {
        return Err(Error::config("embedding dimension and window must be positive"));
    }
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus {
        for w in s {
            vocab.insert(w.as_ref(), 0);
        }
    }
    if vocab.len() < dim {
        return Err(Error::data(format!(
            "vocabulary of {} words is smaller than embedding dimension {dim}",
            vocab.len()
        )));
    }
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i;
    }
    let n = vocab.len();
    let mut counts = DMatrix::<f64>::zeros(n, n);
    for s in corpus {
        let ids: Vec<usize> = s.iter().map(|w| vocab[w.as_ref()]).collect();
        for (p, &a) in ids.iter().enumerate() {
            for &b in &ids[p + 1..(p + 1 + window).min(ids.len())] {
                counts[(a, b)] += 1.0;
                counts[(b, a)] += 1.0;
            }
        }
    }
    let total: f64 = counts.sum();
    if total == 0.0 {
        return Err(Error::data("corpus has no co-occurrences"));
    }
    let marg: Vec<f64> = (0..n).map(|i| counts.row(i).sum()).collect();
    let ppmi = DMatrix::from_fn(n, n, |i, j| {
        let c = counts[(i, j)];
        if c == 0.0 {
            0.0
        } else {
            (c * total / (marg[i] * marg[j])).ln().max(0.0)
        }
    });
    let svd = ppmi.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut m = Matrix::zeros(n, dim);
    for r in 0..n {
        for c in 0..dim {
            m.set(r, c, u[(r, c)] * svd.singular_values[c].sqrt());
        }
    }
    let words = vocab.keys().map(|w| w.to_string()).collect();
    EmbeddingSpace::new(words, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_order() {
        let c: Vec<Vec<&str>> = vec![vec!["b", "a", "c"], vec!["c", "d", "a"]];
        let e = train_toy_embeddings(&c, 2, 2).unwrap();
        assert_eq!(e.words(), &["a", "b", "c", "d"]);
        assert_eq!(e.dim(), 2);
    }

    #[test]
    fn dimension_larger_than_vocab() {
        let c = vec![vec!["a", "b"]];
        assert!(train_toy_embeddings(&c, 3, 1).is_err());
    }
}
