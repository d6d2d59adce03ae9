use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ctc_grad, ctc_loss, greedy_collapse, min_frames, PosteriorGrid, BLANK};
use crate::decoder::align;
use crate::error::{Error, Result};
use crate::nn::{sgd_step, BiLstmLayer, Gradients, Linear, Newbob, ParamStore, NEWBOB_START_RATE, NEWBOB_THRESHOLD, CLIP_NORM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmConfig {
    /// Number of stacked bidirectional layers.
    pub layers: usize,
    /// Units per direction.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Newbob trigger on validation unit error rate, in percentage points.
    pub newbob_threshold: f64,
    /// Epochs before the newbob trigger is armed.
    pub newbob_warmup: usize,
    pub clip: f64,
    pub seed: u64,
}

impl Default for AmConfig {
    fn default() -> Self {
        AmConfig {
            layers: 1,
            hidden: 32,
            epochs: 20,
            learning_rate: NEWBOB_START_RATE,
            newbob_threshold: NEWBOB_THRESHOLD,
            newbob_warmup: 0,
            clip: CLIP_NORM,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: Vec<Vec<f64>>,
    /// Unit ids in `1..symbols`.
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub rate: f64,
    /// Mean per-utterance CTC loss seen during the epoch.
    pub train_loss: f64,
    /// Greedy unit error rate (%) on the validation set.
    pub valid_uer: f64,
}

/// Stacked bidirectional LSTM encoder with a linear output layer over the
/// CTC symbols (blank first).
#[derive(Clone, Debug)]
pub struct AcousticModel {
    store: ParamStore,
    layers: Vec<BiLstmLayer>,
    out: Linear,
    feat_dim: usize,
    symbols: usize,
}

impl AcousticModel {
    pub fn new(feat_dim: usize, symbols: usize, cfg: &AmConfig) -> Result<Self> {
        if cfg.layers == 0 || cfg.hidden == 0 {
            return Err(Error::config("acoustic model needs at least one layer and unit"));
        }
        if symbols < 2 {
            return Err(Error::config("acoustic model needs blank plus at least one unit"));
        }
        let mut store = ParamStore::new(cfg.seed);
        let mut layers = Vec::new();
        let mut input = feat_dim;
        for l in 0..cfg.layers {
            let layer = BiLstmLayer::new(&mut store, &format!("am.l{l}"), input, cfg.hidden)?;
            input = layer.output_dim();
            layers.push(layer);
        }
        let out = Linear::new(&mut store, "am.out", input, symbols)?;
        store.meta.insert("am.layers".into(), cfg.layers.to_string());
        Ok(AcousticModel {
            store,
            layers,
            out,
            feat_dim,
            symbols,
        })
    }

    /// Rebuilds a model around a checkpointed parameter store.
    pub fn from_store(store: ParamStore) -> Result<Self> {
        let n: usize = store
            .meta
            .get("am.layers")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::config("checkpoint is not an acoustic model"))?;
        let layers = (0..n)
            .map(|l| BiLstmLayer::from_store(&store, &format!("am.l{l}")))
            .collect::<Result<Vec<_>>>()?;
        let out = Linear::from_store(&store, "am.out")?;
        let feat_dim = layers
            .first()
            .map(|l| l.fwd.input_dim())
            .ok_or_else(|| Error::config("acoustic model without layers"))?;
        let symbols = out.output_dim(&store);
        Ok(AcousticModel {
            store,
            layers,
            out,
            feat_dim,
            symbols,
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    /// Symbol count including the blank.
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    fn check_features(&self, feats: &[Vec<f64>]) -> Result<()> {
        if feats.is_empty() {
            return Err(Error::data("empty feature sequence"));
        }
        if let Some(f) = feats.iter().find(|f| f.len() != self.feat_dim) {
            return Err(Error::config(format!(
                "feature dimension {} does not match model input {}",
                f.len(),
                self.feat_dim
            )));
        }
        Ok(())
    }

    pub fn posteriors(&self, feats: &[Vec<f64>]) -> Result<PosteriorGrid> {
        self.check_features(feats)?;
        let mut h = feats.to_vec();
        for l in &self.layers {
            h = l.forward(&self.store, &h)?.0;
        }
        let logits: Vec<Vec<f64>> = h.iter().map(|x| self.out.forward(&self.store, x)).collect();
        PosteriorGrid::from_logits(&logits)
    }

    /// CTC loss of one utterance evaluated with `store` (which must share
    /// this model's layout); accumulates gradients when `grads` is given.
    pub fn loss_with(
        &self,
        store: &ParamStore,
        feats: &[Vec<f64>],
        labels: &[usize],
        grads: Option<&mut Gradients>,
    ) -> Result<f64> {
        self.check_features(feats)?;
        let mut acts = vec![feats.to_vec()];
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (h, c) = l.forward(store, acts.last().expect("input"))?;
            acts.push(h);
            caches.push(c);
        }
        let top = acts.last().expect("output");
        let logits: Vec<Vec<f64>> = top.iter().map(|x| self.out.forward(store, x)).collect();
        let grid = PosteriorGrid::from_logits(&logits)?;
        let Some(grads) = grads else {
            return ctc_loss(&grid, labels);
        };
        let (loss, dlogits) = ctc_grad(&grid, labels)?;
        let mut d: Vec<Vec<f64>> = top
            .iter()
            .zip(&dlogits)
            .map(|(x, dy)| self.out.backward(store, x, dy, grads))
            .collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            d = l.backward(store, &caches[i], &d, grads, i > 0);
        }
        Ok(loss)
    }

    pub fn loss(&self, utt: &Utterance) -> Result<f64> {
        self.loss_with(&self.store, &utt.features, &utt.labels, None)
    }

    pub fn greedy(&self, feats: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(greedy_collapse(&self.posteriors(feats)?))
    }

    /// Greedy unit error rate in percent.
    pub fn unit_error_rate(&self, utts: &[Utterance]) -> Result<f64> {
        let mut errors = 0;
        let mut total = 0;
        for u in utts {
            let hyp = self.greedy(&u.features)?;
            errors += align(&u.labels, &hyp).errors();
            total += u.labels.len();
        }
        Ok(if total == 0 { 0.0 } else { 100.0 * errors as f64 / total as f64 })
    }

    pub fn mean_loss(&self, utts: &[Utterance]) -> Result<f64> {
        let mut s = 0.0;
        for u in utts {
            s += self.loss(u)?;
        }
        Ok(s / utts.len().max(1) as f64)
    }
}

fn validate(utts: &[Utterance], feat_dim: usize, symbols: usize) -> Result<()> {
    for u in utts {
        if u.features.iter().any(|f| f.len() != feat_dim) {
            return Err(Error::data(format!("utterance {}: inconsistent feature dimension", u.id)));
        }
        if let Some(&k) = u.labels.iter().find(|&&k| k == BLANK || k >= symbols) {
            return Err(Error::data(format!("utterance {}: unit id {k} out of range", u.id)));
        }
        if min_frames(&u.labels) > u.features.len() {
            return Err(Error::data(format!(
                "utterance {}: label too long ({} frames for {} labels)",
                u.id,
                u.features.len(),
                u.labels.len()
            )));
        }
    }
    Ok(())
}

/// Utterance-level SGD on the CTC objective with a newbob schedule driven
/// by the validation unit error rate (the training set when `valid` is
/// empty).
pub fn train_am(
    train: &[Utterance],
    valid: &[Utterance],
    symbols: usize,
    cfg: &AmConfig,
) -> Result<(AcousticModel, Vec<EpochStats>)> {
    let first = train
        .first()
        .ok_or_else(|| Error::data("empty acoustic training set"))?;
    let feat_dim = first
        .features
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::data(format!("utterance {} has no frames", first.id)))?;
    validate(train, feat_dim, symbols)?;
    validate(valid, feat_dim, symbols)?;
    let mut model = AcousticModel::new(feat_dim, symbols, cfg)?;
    let valid = if valid.is_empty() { train } else { valid };
    let mut schedule = Newbob::new(cfg.learning_rate, cfg.newbob_threshold).with_warmup(cfg.newbob_warmup);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = Gradients::zeros(&model.store);
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let rate = schedule.rate();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let u = &train[i];
            grads.clear();
            let loss = model
                .loss_with(&model.store, &u.features, &u.labels, Some(&mut grads))
                .map_err(|e| Error::training(format!("utterance {}: {e}", u.id)))?;
            total += loss;
            sgd_step(&mut model.store, &grads, rate, cfg.clip)
                .map_err(|e| Error::training(format!("utterance {}: {e}", u.id)))?;
        }
        let uer = model.unit_error_rate(valid)?;
        let s = EpochStats {
            epoch,
            rate,
            train_loss: total / train.len() as f64,
            valid_uer: uer,
        };
        log::info!("am epoch {epoch}: rate {rate:e} loss {:.4} uer {uer:.2}%", s.train_loss);
        stats.push(s);
        schedule.end_epoch(uer);
    }
    for (k, v) in schedule.to_meta() {
        model.store.meta.insert(k, v);
    }
    Ok((model, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheckOptions};

    #[test]
    fn model_gradient_check() {
        let cfg = AmConfig { hidden: 3, layers: 2, ..Default::default() };
        let m = AcousticModel::new(2, 4, &cfg).unwrap();
        let feats: Vec<Vec<f64>> = (0..5).map(|t| vec![(t as f64).cos(), 0.3 * t as f64]).collect();
        let labels = [1, 3, 3];
        let mut store = m.store().clone();
        let r = grad_check(
            &mut store,
            |s, g| m.loss_with(s, &feats, &labels, g).unwrap(),
            &GradCheckOptions::default(),
        );
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn infeasible_utterance_named() {
        let u = Utterance { id: "bad7".into(), features: vec![vec![0.0]; 1], labels: vec![1, 1] };
        let err = train_am(&[u], &[], 3, &AmConfig::default()).unwrap_err();
        assert!(err.to_string().contains("bad7"));
    }

    #[test]
    fn posterior_rows_normalized() {
        let m = AcousticModel::new(3, 5, &AmConfig::default()).unwrap();
        let g = m.posteriors(&vec![vec![0.5, -1.0, 2.0]; 4]).unwrap();
        for r in g.rows() {
            assert!(crate::nn::log_sum_exp(r).abs() < 1e-9);
        }
    }
}
