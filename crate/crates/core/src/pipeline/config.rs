use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::SyntheticCorpusSpec;
use crate::ctc::AmConfig;
use crate::decoder::{DecodeConfig, DEFAULT_TAG};
use crate::error::{Error, Result};
use crate::rnnlm::{AdaptConfig, RescoreMode, RnnConfig};
use crate::xling::InductionMode;

/// Synthetic speech sets drawn from the code-switching sentence process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechConfig {
    pub train_utts: usize,
    pub dev_utts: usize,
    pub test_utts: usize,
    pub feat_dim: usize,
    pub noise_std: f64,
    /// Sets decoded and scored by every system.
    pub eval_sets: Vec<EvalSet>,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        SpeechConfig {
            train_utts: 300,
            dev_utts: 60,
            test_utts: 120,
            feat_dim: 12,
            noise_std: 1.0,
            eval_sets: vec![EvalSet::Dev, EvalSet::Test],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    Dev,
    Test,
}

impl EvalSet {
    pub fn name(self) -> &'static str {
        match self {
            EvalSet::Dev => "dev",
            EvalSet::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgramSettings {
    pub order: usize,
    /// The interpolation weight is searched on `k / interp_steps`.
    pub interp_steps: usize,
}

impl Default for NgramSettings {
    fn default() -> Self {
        NgramSettings { order: 3, interp_steps: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub max_iterations: usize,
    pub mode: InductionMode,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 16,
            window: 2,
            max_iterations: 20,
            mode: InductionMode::Forward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescoreConfig {
    pub weight: f64,
    pub mode: RescoreMode,
    /// Graph tag → RNN LM name for routed rescoring. Unlisted tags use
    /// `cs-rnn`.
    pub routes: BTreeMap<String, String>,
}

impl Default for RescoreConfig {
    fn default() -> Self {
        RescoreConfig {
            weight: 0.75,
            mode: RescoreMode::Probability,
            routes: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RescoreKind {
    #[default]
    None,
    /// Baseline RNN LM (unmapped embeddings, no adaptation) for every tag.
    Baseline,
    /// RNN LM chosen by the rank-1 hypothesis tag.
    Routed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    /// n-gram LM names, one search graph each.
    pub graphs: Vec<String>,
    /// Decode a tagged union even for a single graph.
    #[serde(default)]
    pub union: bool,
    #[serde(default)]
    pub rescore: RescoreKind,
}

impl SystemConfig {
    pub fn is_union(&self) -> bool {
        self.union || self.graphs.len() > 1
    }
}

/// Names of the n-gram LMs built from a corpus spec: code-switched,
/// language A, language B, large language B, and code-switched
/// interpolated with large language B.
pub fn lm_names(spec: &SyntheticCorpusSpec) -> [String; 5] {
    let b = &spec.lang_b;
    [
        DEFAULT_TAG.to_string(),
        spec.lang_a.clone(),
        b.clone(),
        format!("{b}++"),
        format!("interp-{b}++"),
    ]
}

pub const BASELINE_RNN: &str = "baseline";
pub const CS_RNN: &str = "cs-rnn";

/// RNN LM names: baseline, code-switched, and one per language.
pub fn rnn_names(spec: &SyntheticCorpusSpec) -> [String; 4] {
    [
        BASELINE_RNN.to_string(),
        CS_RNN.to_string(),
        format!("{}-rnn", spec.lang_a),
        format!("{}-rnn", spec.lang_b),
    ]
}

/// One declarative experiment. All randomness derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub corpus: SyntheticCorpusSpec,
    #[serde(default)]
    pub speech: SpeechConfig,
    #[serde(default)]
    pub ngram: NgramSettings,
    #[serde(default)]
    pub am: AmConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub rnnlm: RnnConfig,
    #[serde(default)]
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default)]
    pub rescore: RescoreConfig,
    #[serde(rename = "system")]
    pub systems: Vec<SystemConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(&path.display().to_string()))?;
        Self::from_toml(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Seed for one pipeline stage, derived from the experiment seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for b in stage.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// RNN LM names needed by the configured systems.
    pub fn required_rnns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in &self.systems {
            match s.rescore {
                RescoreKind::None => {}
                RescoreKind::Baseline => {
                    out.insert(BASELINE_RNN.to_string());
                }
                RescoreKind::Routed => {
                    out.insert(self.route(DEFAULT_TAG).to_string());
                    for g in &s.graphs {
                        out.insert(self.route(g).to_string());
                    }
                }
            }
        }
        out
    }

    /// RNN LM used for a graph tag under routed rescoring.
    pub fn route(&self, tag: &str) -> &str {
        self.rescore.routes.get(tag).map_or(CS_RNN, String::as_str)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        let lms = lm_names(&self.corpus);
        let rnns = rnn_names(&self.corpus);
        if self.systems.is_empty() {
            return Err(Error::config("no [[system]] defined"));
        }
        let mut names = BTreeSet::new();
        for s in &self.systems {
            if s.name.is_empty() || s.name.contains(char::is_whitespace) || s.name.contains('/') {
                return Err(Error::config(format!("invalid system name '{}'", s.name)));
            }
            if !names.insert(&s.name) {
                return Err(Error::config(format!("duplicate system name '{}'", s.name)));
            }
            if s.graphs.is_empty() {
                return Err(Error::config(format!("system '{}' has no graphs", s.name)));
            }
            let mut seen = BTreeSet::new();
            for g in &s.graphs {
                if !lms.contains(g) {
                    return Err(Error::config(format!(
                        "system '{}' references undefined LM '{g}' (known: {})",
                        s.name,
                        lms.join(", ")
                    )));
                }
                if !seen.insert(g) {
                    return Err(Error::config(format!("system '{}' lists graph '{g}' twice", s.name)));
                }
            }
        }
        for (tag, model) in &self.rescore.routes {
            if !lms.contains(tag) {
                return Err(Error::config(format!("rescore route for undefined graph tag '{tag}'")));
            }
            if !rnns.contains(model) {
                return Err(Error::config(format!(
                    "rescore route '{tag}' names unknown RNN LM '{model}' (known: {})",
                    rnns.join(", ")
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.rescore.weight) {
            return Err(Error::config(format!("rescoring weight {} outside [0, 1]", self.rescore.weight)));
        }
        if self.ngram.order == 0 || self.ngram.interp_steps == 0 {
            return Err(Error::config("n-gram order and interp_steps must be positive"));
        }
        if self.speech.train_utts == 0 || self.speech.feat_dim == 0 {
            return Err(Error::config("speech needs training utterances and a feature dimension"));
        }
        if self.speech.eval_sets.is_empty() {
            return Err(Error::config("no evaluation sets"));
        }
        Ok(())
    }
}
