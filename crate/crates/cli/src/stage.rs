//! Stage graph, config hashes and parent checks.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use callmine::artifact::{hash_file, hash_json, ArtifactManifest, ParentRef};
use callmine::normalize::Resources;
use serde_json::json;

use crate::config::{stream, Backend, PipelineConfig};

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Prepare,
    TrainSummarizer,
    Intents,
    Cluster,
    TrainMotivators,
    Ensemble,
    Evaluate,
    Report,
}

impl Stage {
    pub fn id(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Prepare => "prepare",
            Stage::TrainSummarizer => "train-summarizer",
            Stage::Intents => "intents",
            Stage::Cluster => "cluster",
            Stage::TrainMotivators => "train-motivators",
            Stage::Ensemble => "ensemble",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    pub fn parents(self, cfg: &PipelineConfig) -> Vec<Stage> {
        match self {
            Stage::Synth => vec![],
            Stage::Prepare if cfg.paths.calls.is_some() => vec![],
            Stage::Prepare => vec![Stage::Synth],
            Stage::TrainSummarizer | Stage::TrainMotivators => vec![Stage::Prepare],
            Stage::Intents => vec![Stage::Prepare, Stage::TrainSummarizer],
            Stage::Cluster if cfg.cluster.backend == Backend::EncoderMean => vec![Stage::TrainSummarizer, Stage::Intents],
            Stage::Cluster => vec![Stage::Intents],
            Stage::Ensemble => vec![Stage::Prepare, Stage::TrainMotivators],
            Stage::Evaluate => vec![Stage::Prepare, Stage::Intents, Stage::Ensemble],
            Stage::Report => vec![Stage::Cluster, Stage::Evaluate],
        }
    }

    /// The part of the configuration this stage reads directly.
    fn own_config(self, cfg: &PipelineConfig) -> Result<serde_json::Value> {
        Ok(match self {
            Stage::Synth => json!({ "synth": cfg.synth, "seed": cfg.derived_seed(stream::SYNTH) }),
            Stage::Prepare => {
                let resources = match &cfg.paths.resources {
                    Some(dir) => Resources::load_dir(dir)?,
                    None => Resources::default(),
                };
                let inputs = match (&cfg.paths.calls, &cfg.paths.clicks) {
                    (Some(c), Some(k)) => json!([hash_file(c)?, hash_file(k)?]),
                    _ => serde_json::Value::Null,
                };
                json!({ "split": cfg.split_spec(), "resources": resources.version_hash(), "inputs": inputs })
            }
            Stage::TrainSummarizer => {
                let s = &cfg.summarizer;
                json!({
                    "dims": s.dims,
                    "train": cfg.train_config(),
                    "variants": s.variants,
                    "vocab_min_count": s.vocab_min_count,
                    "max_source_len": s.max_source_len,
                    "max_intent_len": s.max_intent_len,
                })
            }
            Stage::Intents => json!({ "primary": cfg.summarizer.primary }),
            Stage::Cluster => json!(cfg.cluster),
            Stage::TrainMotivators | Stage::Ensemble => json!(cfg.motivator_config()),
            Stage::Evaluate => json!({ "evaluate": cfg.evaluate, "seed": cfg.derived_seed(stream::REPORT) }),
            Stage::Report => serde_json::Value::Null,
        })
    }

    /// Hash over this stage's config and, recursively, its parents'.
    pub fn config_hash(self, cfg: &PipelineConfig) -> Result<String> {
        let parents = self.parents(cfg).into_iter().map(|p| p.config_hash(cfg)).collect::<Result<Vec<_>>>()?;
        Ok(hash_json(&json!({ "stage": self.id(), "config": self.own_config(cfg)?, "parents": parents }))?)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A parent artifact is missing, modified, or built from another config.
#[derive(Debug)]
pub struct Stale(pub String);

impl fmt::Display for Stale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Stale {}

pub fn manifest_dir(out: &Path) -> PathBuf {
    out.join(MANIFEST_DIR)
}

/// Checks every parent of `stage`; returns their references.
pub fn check_parents(stage: Stage, cfg: &PipelineConfig, out: &Path) -> Result<Vec<ParentRef>> {
    let mut refs = Vec::new();
    for p in stage.parents(cfg) {
        let dir = manifest_dir(out);
        if !ArtifactManifest::path_in(&dir, p.id()).exists() {
            return Err(Stale(format!("missing artifact '{p}' required by '{stage}'; run `callmine {p}` first")).into());
        }
        let m = ArtifactManifest::read(&dir, p.id())?;
        if let Some(file) = m.verify_files(out)? {
            return Err(Stale(format!("artifact '{p}' is stale: {file} changed since it was written; rerun `callmine {p}`")).into());
        }
        if m.config_hash != p.config_hash(cfg)? {
            return Err(Stale(format!("artifact '{p}' was built from a different configuration; rerun `callmine {p}`")).into());
        }
        refs.push(m.as_parent());
    }
    Ok(refs)
}

/// Writes the manifest for `files` (relative to `out`).
pub fn finish(stage: Stage, cfg: &PipelineConfig, out: &Path, files: &[String], parents: Vec<ParentRef>) -> Result<ArtifactManifest> {
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    let m = ArtifactManifest::build(stage.id(), stage.id(), out, &names, &stage.config_hash(cfg)?, parents)?;
    m.write(&manifest_dir(out))?;
    Ok(m)
}
