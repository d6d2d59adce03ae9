use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Synthetic acoustic front-end: every unit is a Gaussian cloud around a
/// unit-specific mean. Each unit lasts 2-4 frames; words are separated by
/// one or two frames of a dedicated silence mean.
#[derive(Clone, Debug)]
pub struct FeatureSynth {
    dim: usize,
    noise_std: f64,
    /// Index 0 is silence, `1..` are units.
    means: Vec<Vec<f64>>,
}

pub const MIN_UNIT_FRAMES: usize = 2;
pub const MAX_UNIT_FRAMES: usize = 4;

impl FeatureSynth {
    pub fn new(num_units: usize, dim: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if dim == 0 || num_units == 0 {
            return Err(Error::config("feature synthesis needs units and a positive dimension"));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::config("noise standard deviation must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let means = (0..=num_units)
            .map(|_| (0..dim).map(|_| std.sample(&mut rng)).collect())
            .collect();
        Ok(FeatureSynth { dim, noise_std, means })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_units(&self) -> usize {
        self.means.len() - 1
    }

    fn emit<R: Rng>(&self, k: usize, frames: usize, rng: &mut R, out: &mut Vec<Vec<f64>>) {
        let noise = Normal::new(0.0, self.noise_std).expect("finite std");
        for _ in 0..frames {
            out.push(self.means[k].iter().map(|m| m + noise.sample(rng)).collect());
        }
    }

    /// Frames for a sequence of words, each given as unit ids (`1..`).
    pub fn synthesize<R: Rng>(&self, words: &[Vec<usize>], rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        self.emit(0, 1, rng, &mut out);
        for w in words {
            for &u in w {
                if u == 0 || u > self.num_units() {
                    return Err(Error::data(format!("unit id {u} outside 1..={}", self.num_units())));
                }
                let n = rng.random_range(MIN_UNIT_FRAMES..=MAX_UNIT_FRAMES);
                self.emit(u, n, rng, &mut out);
            }
            let n = rng.random_range(1..=2);
            self.emit(0, n, rng, &mut out);
        }
        Ok(out)
    }
}

pub fn write_features<W: Write>(mut w: W, utts: &[(String, Vec<Vec<f64>>)]) -> Result<()> {
    for (id, frames) in utts {
        let dim = frames.first().map_or(0, Vec::len);
        writeln!(w, "{id} {} {dim}", frames.len())?;
        for f in frames {
            let row: Vec<String> = f.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_features<R: BufRead>(r: R) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut out = Vec::new();
    let mut lines = r.lines().enumerate();
    while let Some((i, l)) = lines.next() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let h: Vec<&str> = l.split_whitespace().collect();
        let bad = || Error::parse(i + 1, "expected header 'utt_id T dim'");
        if h.len() != 3 {
            return Err(bad());
        }
        let t: usize = h[1].parse().map_err(|_| bad())?;
        let dim: usize = h[2].parse().map_err(|_| bad())?;
        let mut frames = Vec::with_capacity(t);
        for _ in 0..t {
            let (j, row) = lines
                .next()
                .ok_or_else(|| Error::parse(i + 1, format!("utterance {} truncated", h[0])))?;
            let row = row?;
            let v: Vec<f64> = row
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::parse(j + 1, "bad feature value")))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(Error::parse(j + 1, format!("expected {dim} values")));
            }
            frames.push(v);
        }
        out.push((h[0].to_string(), frames));
    }
    Ok(out)
}

pub fn write_labels<W: Write>(mut w: W, utts: &[(String, Vec<String>)]) -> Result<()> {
    for (id, units) in utts {
        if units.is_empty() {
            writeln!(w, "{id}")?;
        } else {
            writeln!(w, "{id} {}", units.join(" "))?;
        }
    }
    Ok(())
}

/// Reads `utt_id token token ...` lines (also used for word transcripts).
pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for l in r.lines() {
        let l = l?;
        let mut toks = l.split_whitespace();
        if let Some(id) = toks.next() {
            out.push((id.to_string(), toks.map(str::to_string).collect()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts_within_bounds() {
        let s = FeatureSynth::new(3, 4, 0.1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let words = vec![vec![1, 2], vec![3]];
        let f = s.synthesize(&words, &mut rng).unwrap();
        // 1 lead + 3 units * [2,4] + 2 gaps * [1,2]
        assert!((1 + 6 + 2..=1 + 12 + 4).contains(&f.len()));
        assert!(f.iter().all(|r| r.len() == 4));
    }

    #[test]
    fn features_round_trip() {
        let utts = vec![("u1".to_string(), vec![vec![0.1, -2.5e-7], vec![3.0, 4.0]])];
        let mut buf = Vec::new();
        write_features(&mut buf, &utts).unwrap();
        assert_eq!(read_features(buf.as_slice()).unwrap(), utts);
    }

    #[test]
    fn truncated_features() {
        assert!(read_features("u1 2 1\n0.5\n".as_bytes()).is_err());
    }
}
