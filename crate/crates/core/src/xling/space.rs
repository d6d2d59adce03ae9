use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::{dot, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    Unit,
    CenteredUnit,
}

/// Row-per-word embedding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Matrix,
    norm: Normalization,
}

impl EmbeddingSpace {
    pub fn new(words: Vec<String>, matrix: Matrix) -> Result<Self> {
        if words.len() != matrix.rows() {
            return Err(Error::data(format!(
                "{} words for {} embedding rows",
                words.len(),
                matrix.rows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate embedding word '{w}'")));
            }
        }
        Ok(EmbeddingSpace {
            words,
            index,
            matrix,
            norm: Normalization::Raw,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index(word).map(|i| self.row(i))
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        cosine(self.row(i), self.row(j))
    }

    fn check_nonzero(&self) -> Result<()> {
        for (i, w) in self.words.iter().enumerate() {
            if self.row(i).iter().all(|&v| v == 0.0) {
                return Err(Error::data(format!("zero embedding row for '{w}'")));
            }
        }
        Ok(())
    }

    /// Scales every row to unit length.
    pub fn unit_normalize(&self) -> Result<Self> {
        self.check_nonzero()?;
        let mut out = self.clone();
        for r in 0..out.matrix.rows() {
            let row = out.matrix.row_mut(r);
            let n = dot(row, row).sqrt();
            row.iter_mut().for_each(|v| *v /= n);
        }
        out.norm = Normalization::Unit;
        Ok(out)
    }

    /// Subtracts the column mean, then scales every row to unit length.
    pub fn normalize(&self) -> Result<Self> {
        self.check_nonzero()?;
        let mut out = self.clone();
        let (rows, cols) = (out.matrix.rows(), out.matrix.cols());
        let mut mean = vec![0.0; cols];
        for r in 0..rows {
            for (m, v) in mean.iter_mut().zip(out.matrix.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows.max(1) as f64);
        for r in 0..rows {
            for (v, m) in out.matrix.row_mut(r).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut unit = out.unit_normalize()?;
        unit.norm = Normalization::CenteredUnit;
        Ok(unit)
    }

    /// Right-multiplies every row by `w` (a `dim × dim` map).
    pub fn map(&self, w: &Matrix) -> Result<Self> {
        if w.rows() != self.dim() || w.cols() != self.dim() {
            return Err(Error::config(format!(
                "map is {}x{}, space dimension is {}",
                w.rows(),
                w.cols(),
                self.dim()
            )));
        }
        let mut out = self.clone();
        for r in 0..self.len() {
            let mut y = vec![0.0; self.dim()];
            w.gemv_t_add(self.row(r), &mut y);
            out.matrix.row_mut(r).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Union of two spaces of equal dimension: `self`'s words first, then
    /// the words only `other` has. Words present in both get the mean row.
    pub fn merge(&self, other: &EmbeddingSpace) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::config(format!(
                "cannot merge spaces of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut words = self.words.clone();
        let mut rows: Vec<Vec<f64>> = (0..self.len()).map(|i| self.row(i).to_vec()).collect();
        for (j, w) in other.words.iter().enumerate() {
            match self.index(w) {
                Some(i) => {
                    for (a, b) in rows[i].iter_mut().zip(other.row(j)) {
                        *a = 0.5 * (*a + b);
                    }
                }
                None => {
                    words.push(w.clone());
                    rows.push(other.row(j).to_vec());
                }
            }
        }
        EmbeddingSpace::new(words, Matrix::from_rows(&rows)?)
    }

    /// Text format: `V d` then `word v1 ... vd` per line.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (i, word) in self.words.iter().enumerate() {
            let vals: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{word} {}", vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| Error::parse(1, "empty embedding file"))?;
        let head = head?;
        let h: Vec<usize> = head
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, "expected 'V d' header")))
            .collect::<Result<_>>()?;
        if h.len() != 2 {
            return Err(Error::parse(1, "expected 'V d' header"));
        }
        let (v, d) = (h[0], h[1]);
        let mut words = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        for (i, l) in lines {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let mut toks = l.split_whitespace();
            let word = toks.next().expect("non-empty line");
            let vals: Vec<f64> = toks
                .map(|t| t.parse().map_err(|_| Error::parse(i + 1, "bad embedding value")))
                .collect::<Result<_>>()?;
            if vals.len() != d {
                return Err(Error::parse(i + 1, format!("expected {d} values for '{word}'")));
            }
            words.push(word.to_string());
            data.extend(vals);
        }
        if words.len() != v {
            return Err(Error::parse(0, format!("header announces {v} words, found {}", words.len())));
        }
        EmbeddingSpace::new(words, Matrix::from_vec(v, d, data)?)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = dot(a, b);
    let n = (dot(a, a) * dot(b, b)).sqrt();
    if n == 0.0 {
        0.0
    } else {
        d / n
    }
}
