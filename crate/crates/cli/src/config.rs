use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use callmine::cluster::Linkage;
use callmine::corpus::{SplitSpec, SynthConfig};
use callmine::pipeline::MotivatorConfig;
use callmine::rng::SplitMix64;
use callmine::summarizer::{ModelDims, TrainConfig};
use serde::{Deserialize, Serialize};

/// Sub-seed streams derived from the root seed.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SUMMARIZER: u64 = 3;
    pub const MOTIVATORS: u64 = 4;
    pub const ENSEMBLE: u64 = 5;
    pub const REPORT: u64 = 6;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Existing `calls.jsonl`; when unset, `synth` output is used.
    pub calls: Option<PathBuf>,
    pub clicks: Option<PathBuf>,
    pub out: PathBuf,
    /// Directory with resource-table overrides.
    pub resources: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { calls: None, clicks: None, out: PathBuf::from("callmine-out"), resources: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Lstm,
    Bilstm,
    Stacked,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Lstm, Variant::Bilstm, Variant::Stacked];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lstm => "lstm",
            Variant::Bilstm => "bilstm",
            Variant::Stacked => "stacked",
        }
    }

    /// Row label in the summarization table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Lstm => "LSTM",
            Variant::Bilstm => "Bi-LSTM",
            Variant::Stacked => "stacked Bi-LSTM",
        }
    }

    pub fn dims(self, base: ModelDims) -> ModelDims {
        match self {
            Variant::Lstm => ModelDims { encoder_layers: 1, bidirectional: false, ..base },
            Variant::Bilstm => ModelDims { encoder_layers: 1, bidirectional: true, ..base },
            Variant::Stacked => ModelDims { encoder_layers: base.encoder_layers.max(2), bidirectional: true, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizerConfig {
    pub dims: ModelDims,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    /// Variant whose outputs become the call intents.
    pub primary: Variant,
    pub vocab_min_count: usize,
    pub max_source_len: usize,
    pub max_intent_len: usize,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            dims: ModelDims::default(),
            train: TrainConfig::default(),
            variants: Variant::ALL.to_vec(),
            primary: Variant::Stacked,
            vocab_min_count: 2,
            max_source_len: callmine::corpus::MAX_TRANSCRIPT_TOKENS,
            max_intent_len: callmine::corpus::MAX_REPNOTE_TOKENS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Lsa,
    EncoderMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub threshold: f64,
    pub linkage: Linkage,
    pub backend: Backend,
    pub lsa_dims: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { threshold: callmine::cluster::DEFAULT_THRESHOLD, linkage: Linkage::Average, backend: Backend::Lsa, lsa_dims: callmine::cluster::LSA_DIMS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub sample_size: usize,
    /// Add an `Other` row to the motivator table.
    pub include_other: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { sample_size: 2000, include_other: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: f64,
    pub stratify: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratio: 0.7, stratify: false }
    }
}

/// The whole pipeline configuration (one TOML file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage seed is derived from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub summarizer: SummarizerConfig,
    pub cluster: ClusterConfig,
    pub motivators: MotivatorConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            summarizer: SummarizerConfig::default(),
            cluster: ClusterConfig::default(),
            motivators: MotivatorConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn derived_seed(&self, stream: u64) -> u64 {
        SplitMix64::derive(self.seed, stream)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { ratio: self.split.ratio, seed: self.derived_seed(stream::SPLIT), stratify: self.split.stratify }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.derived_seed(stream::SUMMARIZER), ..self.summarizer.train.clone() }
    }

    pub fn motivator_config(&self) -> MotivatorConfig {
        let mut m = self.motivators.clone();
        m.seed = self.derived_seed(stream::MOTIVATORS);
        m.ensemble.seed = self.derived_seed(stream::ENSEMBLE);
        m
    }

    /// Checks everything that can be checked before running a stage.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.paths.calls, &self.paths.clicks, &self.paths.resources].into_iter().flatten() {
            if !p.exists() {
                bail!("configured path {} does not exist", p.display());
            }
        }
        if self.paths.calls.is_some() != self.paths.clicks.is_some() {
            bail!("paths.calls and paths.clicks must be given together");
        }
        self.synth.validate()?;
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            bail!("split.ratio must lie in (0, 1)");
        }
        self.summarizer.dims.validate()?;
        self.train_config().validate()?;
        if self.summarizer.variants.is_empty() || !self.summarizer.variants.contains(&self.summarizer.primary) {
            bail!("summarizer.variants must include the primary variant");
        }
        if self.summarizer.max_intent_len == 0 || self.summarizer.max_source_len == 0 || self.summarizer.vocab_min_count == 0 {
            bail!("summarizer lengths and vocab_min_count must be at least 1");
        }
        if !(self.cluster.threshold >= 0.0 && self.cluster.threshold <= 2.0) {
            bail!("cluster.threshold must lie in [0, 2]");
        }
        self.motivators.policy.validate()?;
        for s in &self.motivators.spaces {
            s.validate()?;
        }
        if self.motivators.spaces.is_empty() {
            bail!("motivators.spaces must not be empty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips_through_toml() {
        let c = PipelineConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_typos() {
        let c: PipelineConfig = toml::from_str("seed = 7\n[synth]\nn_calls = 100\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.synth.n_calls, 100);
        assert_eq!(c.cluster, ClusterConfig::default());
        assert!(toml::from_str::<PipelineConfig>("sed = 7\n").is_err());
    }

    #[test]
    fn derived_seeds_follow_root() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { seed: 43, ..PipelineConfig::default() };
        assert_ne!(a.split_spec().seed, b.split_spec().seed);
        assert_ne!(a.train_config().seed, a.motivator_config().seed);
    }
}
