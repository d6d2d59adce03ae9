use super::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// Global L2 norm above which gradients are rescaled.
pub const CLIP_NORM: f64 = 5.0;

pub const NEWBOB_START_RATE: f64 = 4e-5;
/// Absolute improvement (in percentage points) below which halving starts.
pub const NEWBOB_THRESHOLD: f64 = 0.5;

/// Plain SGD on the trainable parameters with global-norm clipping.
///
/// Returns the pre-clipping gradient norm. A non-finite gradient aborts
/// the step without touching any parameter.
pub fn sgd_step(store: &mut ParamStore, grads: &Gradients, rate: f64, clip: f64) -> Result<f64> {
    let norm = grads.norm(store);
    if !norm.is_finite() {
        return Err(Error::training("non-finite gradient"));
    }
    let scale = if norm > clip { clip / norm } else { 1.0 };
    let step = -rate * scale;
    let ids: Vec<_> = store.ids().filter(|&id| !store.is_frozen(id)).collect();
    for id in ids {
        let g = grads.get(id).data();
        for (p, gi) in store.get_mut(id).data_mut().iter_mut().zip(g) {
            *p += step * gi;
        }
    }
    Ok(norm)
}

/// Newbob learning-rate schedule driven by a validation error in percent.
///
/// The rate stays constant until an epoch improves the error by less than
/// the threshold; from then on it halves after every epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Newbob {
    rate: f64,
    threshold: f64,
    halving: bool,
    last: Option<f64>,
    warmup: usize,
    epochs: usize,
}

impl Default for Newbob {
    fn default() -> Self {
        Newbob::new(NEWBOB_START_RATE, NEWBOB_THRESHOLD)
    }
}

impl Newbob {
    pub fn new(start_rate: f64, threshold: f64) -> Self {
        Newbob {
            rate: start_rate,
            threshold,
            halving: false,
            last: None,
            warmup: 0,
            epochs: 0,
        }
    }

    /// Epochs during which halving cannot be triggered.
    pub fn with_warmup(mut self, epochs: usize) -> Self {
        self.warmup = epochs;
        self
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_halving(&self) -> bool {
        self.halving
    }

    /// Feeds the validation error of a finished epoch; returns the rate for
    /// the next epoch.
    pub fn end_epoch(&mut self, error: f64) -> f64 {
        if let Some(prev) = self.last {
            self.observe_improvement(prev - error);
        }
        self.last = Some(error);
        self.rate
    }

    /// Feeds an epoch-over-epoch improvement directly.
    pub fn observe_improvement(&mut self, improvement: f64) -> f64 {
        self.epochs += 1;
        if !self.halving && self.epochs > self.warmup && improvement < self.threshold {
            self.halving = true;
        }
        if self.halving {
            self.rate *= 0.5;
        }
        self.rate
    }

    pub fn to_meta(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("newbob.rate".to_string(), format!("{:?}", self.rate)),
            ("newbob.threshold".to_string(), format!("{:?}", self.threshold)),
            ("newbob.halving".to_string(), self.halving.to_string()),
            ("newbob.warmup".to_string(), self.warmup.to_string()),
            ("newbob.epochs".to_string(), self.epochs.to_string()),
        ];
        if let Some(l) = self.last {
            v.push(("newbob.last".to_string(), format!("{l:?}")));
        }
        v
    }

    pub fn from_meta(store: &ParamStore) -> Result<Self> {
        let get = |k: &str| {
            store
                .meta
                .get(k)
                .ok_or_else(|| Error::config(format!("checkpoint lacks {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::config(format!("bad value for {k}")))
        };
        Ok(Newbob {
            rate: num("newbob.rate")?,
            threshold: num("newbob.threshold")?,
            halving: get("newbob.halving")? == "true",
            warmup: num("newbob.warmup")? as usize,
            epochs: num("newbob.epochs")? as usize,
            last: match store.meta.get("newbob.last") {
                Some(_) => Some(num("newbob.last")?),
                None => None,
            },
        })
    }
}

/// Exponential per-epoch decay, `r_e = r · factor^e`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpDecay {
    pub start: f64,
    pub factor: f64,
}

impl ExpDecay {
    pub fn rate(&self, epoch: usize) -> f64 {
        self.start * self.factor.powi(epoch as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    #[test]
    fn newbob_halves_after_small_improvement() {
        let r = 1.0;
        let mut nb = Newbob::new(r, 0.5);
        let rates: Vec<f64> = [2.0, 1.0, 0.4].iter().map(|&i| nb.observe_improvement(i)).collect();
        assert_eq!(rates, vec![r, r, r / 2.0]);
        assert_eq!(nb.observe_improvement(3.0), r / 4.0);
    }

    #[test]
    fn warmup_delays_trigger() {
        let mut nb = Newbob::new(1.0, 0.5).with_warmup(2);
        assert_eq!(nb.observe_improvement(0.0), 1.0);
        assert_eq!(nb.observe_improvement(0.0), 1.0);
        assert_eq!(nb.observe_improvement(0.0), 0.5);
    }

    #[test]
    fn meta_round_trip() {
        let mut nb = Newbob::new(0.1, 0.5).with_warmup(1);
        nb.end_epoch(40.0);
        nb.end_epoch(39.9);
        let mut s = ParamStore::new(0);
        s.meta.extend(nb.to_meta());
        assert_eq!(Newbob::from_meta(&s).unwrap(), nb);
    }

    #[test]
    fn newbob_constant_without_trigger() {
        let mut nb = Newbob::default();
        for e in [50.0, 40.0, 30.0, 20.0] {
            assert_eq!(nb.end_epoch(e), NEWBOB_START_RATE);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = ParamStore::new(0);
        let id = s.add_zeros("w", 1, 2).unwrap();
        let mut g = Gradients::zeros(&s);
        g.get_mut(id).data_mut()[0] = f64::NAN;
        assert!(matches!(sgd_step(&mut s, &g, 0.1, CLIP_NORM), Err(Error::Training(_))));
        assert_eq!(s.get(id), &Matrix::zeros(1, 2));
    }

    #[test]
    fn clipping_bounds_step() {
        let mut s = ParamStore::new(0);
        let id = s.add_zeros("w", 1, 1).unwrap();
        let mut g = Gradients::zeros(&s);
        g.get_mut(id).data_mut()[0] = 100.0;
        sgd_step(&mut s, &g, 1.0, CLIP_NORM).unwrap();
        assert_eq!(s.get(id).data()[0], -CLIP_NORM);
    }

    #[test]
    fn frozen_parameters_untouched() {
        let mut s = ParamStore::new(0);
        let a = s.add_uniform("a", 2, 2).unwrap();
        let b = s.add_uniform("b", 2, 2).unwrap();
        s.set_frozen(a, true);
        let before = s.get(a).clone();
        let mut g = Gradients::zeros(&s);
        g.get_mut(a).fill(1.0);
        g.get_mut(b).fill(1.0);
        sgd_step(&mut s, &g, 0.1, CLIP_NORM).unwrap();
        assert_eq!(s.get(a), &before);
    }
}
