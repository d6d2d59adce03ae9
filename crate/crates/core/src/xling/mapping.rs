use std::collections::HashSet;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::nn::{dot, Matrix};

/// Ordered `(source row, target row)` pairs with unique sources.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranslationDictionary {
    pairs: Vec<(usize, usize)>,
}

impl TranslationDictionary {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(i, _) in &pairs {
            if !seen.insert(i) {
                return Err(Error::data(format!("duplicate source index {i} in dictionary")));
            }
        }
        Ok(TranslationDictionary { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `src_word<TAB>tgt_word` lines.
    pub fn write<W: Write>(&self, m: &EmbeddingSpace, n: &EmbeddingSpace, mut w: W) -> Result<()> {
        for &(i, j) in &self.pairs {
            writeln!(w, "{}\t{}", m.words()[i], n.words()[j])?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, m: &EmbeddingSpace, n: &EmbeddingSpace) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, l) in r.lines().enumerate() {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let (a, b) = l
                .split_once('\t')
                .ok_or_else(|| Error::parse(k + 1, "expected src<TAB>tgt"))?;
            let i = m
                .index(a.trim())
                .ok_or_else(|| Error::parse(k + 1, format!("'{a}' not in source space")))?;
            let j = n
                .index(b.trim())
                .ok_or_else(|| Error::parse(k + 1, format!("'{b}' not in target space")))?;
            pairs.push((i, j));
        }
        TranslationDictionary::new(pairs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mapping {
    pub w_m: Matrix,
    pub w_n: Matrix,
    /// Sum of dictionary dot products in the shared space.
    pub objective: f64,
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.set(r, c, m[(r, c)]);
        }
    }
    out
}

/// `Σ_(i,j)∈d (M_i W_M)·(N_j W_N)`.
pub fn mapping_objective(
    m: &EmbeddingSpace,
    n: &EmbeddingSpace,
    d: &TranslationDictionary,
    w_m: &Matrix,
    w_n: &Matrix,
) -> Result<f64> {
    let mm = m.map(w_m)?;
    let nn = n.map(w_n)?;
    Ok(d.pairs().iter().map(|&(i, j)| dot(mm.row(i), nn.row(j))).sum())
}

/// Orthogonal maps maximizing the dictionary objective: with
/// `M_Dᵀ N_D = U Σ Vᵀ`, `W_M = U` and `W_N = V`, and the optimum is `tr Σ`.
pub fn procrustes_step(m: &EmbeddingSpace, n: &EmbeddingSpace, d: &TranslationDictionary) -> Result<Mapping> {
    if m.dim() != n.dim() {
        return Err(Error::config(format!(
            "embedding dimensions differ: {} vs {}",
            m.dim(),
            n.dim()
        )));
    }
    if d.is_empty() {
        return Err(Error::data("empty dictionary"));
    }
    let dim = m.dim();
    let mut cross = Matrix::zeros(dim, dim);
    for &(i, j) in d.pairs() {
        if i >= m.len() || j >= n.len() {
            return Err(Error::data(format!("dictionary pair ({i}, {j}) out of range")));
        }
        cross.add_outer(1.0, m.row(i), n.row(j));
    }
    let svd = to_dmatrix(&cross).svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v = svd.v_t.as_ref().expect("right singular vectors requested").transpose();
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax.max(1e-300))
        .count();
    if rank < dim {
        log::warn!("procrustes: cross-covariance has rank {rank} < {dim}; mapping is not unique");
    }
    Ok(Mapping {
        w_m: from_dmatrix(u),
        w_n: from_dmatrix(&v),
        objective: svd.singular_values.sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InductionMode {
    /// Every source row paired with its nearest target row.
    Forward,
    /// Only pairs that are each other's nearest neighbour.
    Mutual,
}

fn nearest(query: &[f64], space: &EmbeddingSpace) -> usize {
    let qn = dot(query, query).sqrt();
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for j in 0..space.len() {
        let r = space.row(j);
        let denom = qn * dot(r, r).sqrt();
        let sim = if denom == 0.0 { 0.0 } else { dot(query, r) / denom };
        if sim > best_sim {
            best_sim = sim;
            best = j;
        }
    }
    best
}

/// Cosine nearest-neighbour dictionary between two mapped spaces; ties go
/// to the lower index.
pub fn induce_dictionary(
    m_mapped: &EmbeddingSpace,
    n_mapped: &EmbeddingSpace,
    mode: InductionMode,
) -> Result<TranslationDictionary> {
    let fwd: Vec<usize> = (0..m_mapped.len())
        .into_par_iter()
        .map(|i| nearest(m_mapped.row(i), n_mapped))
        .collect();
    let pairs: Vec<(usize, usize)> = match mode {
        InductionMode::Forward => fwd.into_iter().enumerate().collect(),
        InductionMode::Mutual => {
            let back: Vec<usize> = (0..n_mapped.len())
                .into_par_iter()
                .map(|j| nearest(n_mapped.row(j), m_mapped))
                .collect();
            let p: Vec<_> = fwd
                .into_iter()
                .enumerate()
                .filter(|&(i, j)| back[j] == i)
                .collect();
            if p.is_empty() {
                return Err(Error::data("no mutual pairs"));
            }
            p
        }
    };
    TranslationDictionary::new(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfLearnConfig {
    pub max_iterations: usize,
    pub mode: InductionMode,
}

impl Default for SelfLearnConfig {
    fn default() -> Self {
        SelfLearnConfig {
            max_iterations: 50,
            mode: InductionMode::Forward,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfLearnResult {
    pub mapping: Mapping,
    pub dictionary: TranslationDictionary,
    /// Objective after each Procrustes solve.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates Procrustes solves and dictionary induction until the
/// dictionary stops changing.
pub fn self_learn(
    m: &EmbeddingSpace,
    n: &EmbeddingSpace,
    seed: &TranslationDictionary,
    cfg: &SelfLearnConfig,
) -> Result<SelfLearnResult> {
    if seed.is_empty() {
        return Err(Error::data("empty seed dictionary"));
    }
    let mut dict = seed.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let converged;
    let mapping = loop {
        let mapping = procrustes_step(m, n, &dict)?;
        trace.push(mapping.objective);
        iterations += 1;
        log::debug!("self-learning iteration {iterations}: objective {}", mapping.objective);
        let next = induce_dictionary(&m.map(&mapping.w_m)?, &n.map(&mapping.w_n)?, cfg.mode)
            .map_err(|e| Error::training(format!("dictionary induction failed: {e}")))?;
        if next.is_empty() {
            return Err(Error::training("dictionary collapsed to empty"));
        }
        if next == dict {
            converged = true;
            break mapping;
        }
        if iterations >= cfg.max_iterations.max(1) {
            converged = false;
            break mapping;
        }
        dict = next;
    };
    Ok(SelfLearnResult {
        mapping,
        dictionary: dict,
        trace,
        iterations,
        converged,
    })
}

/// Pairs of identical surface forms, in source order.
pub fn seed_dictionary(vocab_m: &[String], vocab_n: &[String]) -> Result<TranslationDictionary> {
    let pos: std::collections::HashMap<&str, usize> =
        vocab_n.iter().enumerate().map(|(j, w)| (w.as_str(), j)).collect();
    let pairs: Vec<(usize, usize)> = vocab_m
        .iter()
        .enumerate()
        .filter_map(|(i, w)| pos.get(w.as_str()).map(|&j| (i, j)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::data(
            "no identical word forms shared by the two vocabularies; supply a seed dictionary file",
        ));
    }
    TranslationDictionary::new(pairs)
}
