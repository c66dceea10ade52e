use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use callmine::artifact::{hash_file, read_json, write_json};
use callmine::classify::{one_vs_all_train, write_trial_log, OvaConfig, OvaResult};
use callmine::cluster::{agglomerative_cluster, label_clusters, write_cluster_csv, EmbeddingBackend};
use callmine::corpus::{
    filter_for_summarizer, generate_synthetic_corpus, load_calls, load_clicks, split_train_validation, write_jsonl, CallRecord, ClickEvent,
    Motivator, SummaryPair,
};
use callmine::ensemble::{train_ensembles, write_registry, Candidate};
use callmine::evaluate::{
    motivator_report, summarization_report, write_motivator_csv, write_summarization_csv, MotivatorReport, SummarizationReport,
};
use callmine::features::{build_seq_vocab, encode_sequence, SequenceRole, Vocabulary};
use callmine::normalize::{tokenize, Normalizer, Resources};
use callmine::pipeline::{fit_views, motivator_labels, prepare_docs, source_data, CallDocs, ViewPipeline};
use callmine::rng::SplitMix64;
use callmine::summarizer::{load_checkpoint, save_checkpoint, train, SeqPair, Seq2SeqModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{stream, Backend, PipelineConfig, Variant};
use crate::stage::{check_parents, finish, Stage};

const VOCAB_KIND: &str = "vocabulary";

/// Fixed artifact paths, relative to the output directory.
pub mod paths {
    pub const SYNTH_CALLS: &str = "data/calls.jsonl";
    pub const SYNTH_CLICKS: &str = "data/clicks.jsonl";
    pub const CALLS: &str = "prepare/calls.jsonl";
    pub const CLICKS: &str = "prepare/clicks.jsonl";
    pub const SPLIT: &str = "prepare/split.json";
    pub const DIAGNOSTICS: &str = "prepare/diagnostics.json";
    pub const PAIRS_TRAIN: &str = "prepare/pairs_train.jsonl";
    pub const PAIRS_VAL: &str = "prepare/pairs_val.jsonl";
    pub const SRC_VOCAB: &str = "summarizer/vocab_src.json";
    pub const TGT_VOCAB: &str = "summarizer/vocab_tgt.json";
    pub const INTENTS: &str = "intents/intents.jsonl";
    pub const VAL_OUTPUTS: &str = "intents/val_outputs.json";
    pub const CLUSTERS: &str = "cluster/clusters.csv";
    pub const ASSIGNMENT: &str = "cluster/assignment.json";
    pub const VIEWS: &str = "motivators/views.json";
    pub const OVA: &str = "motivators/ova.json";
    pub const REGISTRY: &str = "ensemble/registry";
    pub const TRAINING: &str = "ensemble/training.json";
    pub const SUMMARIZATION: &str = "evaluate/summarization.json";
    pub const MOTIVATORS: &str = "evaluate/motivators.json";
    pub const TABLE3: &str = "report/table3.csv";
    pub const TABLE5: &str = "report/table5.csv";
    pub const REPORT_CLUSTERS: &str = "report/clusters.csv";

    pub fn checkpoint(variant: &str) -> String {
        format!("summarizer/{variant}.ckpt")
    }

    pub fn history(variant: &str) -> String {
        format!("summarizer/{variant}.history.json")
    }

    pub fn trials(motivator: &str, source: &str) -> String {
        format!("motivators/trials/{motivator}_{source}.csv")
    }
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn normalizer(&self) -> Result<Normalizer> {
        let resources = match &self.cfg.paths.resources {
            Some(dir) => Resources::load_dir(dir)?,
            None => Resources::default(),
        };
        Ok(Normalizer::new(resources)?)
    }

    fn create_parent(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(p)
    }

    fn write_jsonl<T: Serialize>(&self, rel: &str, items: &[T]) -> Result<()> {
        Ok(write_jsonl(&self.create_parent(rel)?, items)?)
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
        }
    }
    Ok(out)
}

pub fn run(stage: Stage, ctx: &Ctx) -> Result<()> {
    let parents = check_parents(stage, &ctx.cfg, &ctx.out)?;
    log::info!("stage {stage}: start");
    let files = match stage {
        Stage::Synth => synth(ctx)?,
        Stage::Prepare => prepare(ctx)?,
        Stage::TrainSummarizer => train_summarizer(ctx)?,
        Stage::Intents => intents(ctx)?,
        Stage::Cluster => cluster(ctx)?,
        Stage::TrainMotivators => train_motivators(ctx)?,
        Stage::Ensemble => ensemble(ctx)?,
        Stage::Evaluate => evaluate(ctx)?,
        Stage::Report => report(ctx)?,
    };
    let m = finish(stage, &ctx.cfg, &ctx.out, &files, parents)?;
    log::info!("stage {stage}: {} files, content {}", m.files.len(), &m.content_hash[..12]);
    Ok(())
}

fn synth(ctx: &Ctx) -> Result<Vec<String>> {
    let (calls, clicks) = generate_synthetic_corpus(&ctx.cfg.synth, ctx.cfg.derived_seed(stream::SYNTH))?;
    ctx.write_jsonl(paths::SYNTH_CALLS, &calls)?;
    ctx.write_jsonl(paths::SYNTH_CLICKS, &clicks)?;
    Ok(vec![paths::SYNTH_CALLS.into(), paths::SYNTH_CLICKS.into()])
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitIds {
    train: Vec<String>,
    val: Vec<String>,
}

#[derive(Debug, Serialize)]
struct InputDiagnostic {
    file: String,
    line: usize,
    message: String,
}

fn prepare(ctx: &Ctx) -> Result<Vec<String>> {
    let (calls_path, clicks_path) = match (&ctx.cfg.paths.calls, &ctx.cfg.paths.clicks) {
        (Some(c), Some(k)) => (c.clone(), k.clone()),
        _ => (ctx.path(paths::SYNTH_CALLS), ctx.path(paths::SYNTH_CLICKS)),
    };
    let calls = load_calls(&calls_path)?;
    let clicks = load_clicks(&clicks_path)?;
    let mut diagnostics = Vec::new();
    for (file, diags) in [("calls", &calls.diagnostics), ("clicks", &clicks.diagnostics)] {
        for d in diags {
            log::warn!("{file}: {d}");
            diagnostics.push(InputDiagnostic { file: file.into(), line: d.line, message: d.message.clone() });
        }
    }
    if calls.records.is_empty() {
        bail!(callmine::Error::Format(format!("{}: no valid call records", calls_path.display())));
    }
    let (train, val) = split_train_validation(&calls.records, &ctx.cfg.split_spec())?;
    let norm = ctx.normalizer()?;
    ctx.write_jsonl(paths::CALLS, &calls.records)?;
    ctx.write_jsonl(paths::CLICKS, &clicks.records)?;
    let ids = |v: &[CallRecord]| v.iter().map(|c| c.call_id.clone()).collect();
    write_json(&ctx.path(paths::SPLIT), "split", &SplitIds { train: ids(&train), val: ids(&val) })?;
    write_json(&ctx.path(paths::DIAGNOSTICS), "diagnostics", &diagnostics)?;
    ctx.write_jsonl(paths::PAIRS_TRAIN, &filter_for_summarizer(&train, &norm))?;
    ctx.write_jsonl(paths::PAIRS_VAL, &filter_for_summarizer(&val, &norm))?;
    log::info!("{} calls ({} train, {} val), {} click events", calls.records.len(), train.len(), val.len(), clicks.records.len());
    Ok([paths::CALLS, paths::CLICKS, paths::SPLIT, paths::DIAGNOSTICS, paths::PAIRS_TRAIN, paths::PAIRS_VAL].map(String::from).to_vec())
}

struct Prepared {
    calls: Vec<CallRecord>,
    clicks: Vec<ClickEvent>,
    train: Vec<CallRecord>,
    val: Vec<CallRecord>,
}

fn load_prepared(ctx: &Ctx) -> Result<Prepared> {
    let calls: Vec<CallRecord> = read_jsonl(&ctx.path(paths::CALLS))?;
    let clicks = read_jsonl(&ctx.path(paths::CLICKS))?;
    let split: SplitIds = read_json(&ctx.path(paths::SPLIT), "split")?;
    let by_id: BTreeMap<&str, &CallRecord> = calls.iter().map(|c| (c.call_id.as_str(), c)).collect();
    let pick = |ids: &[String]| -> Result<Vec<CallRecord>> {
        ids.iter()
            .map(|id| by_id.get(id.as_str()).map(|c| (*c).clone()).with_context(|| format!("split lists unknown call {id}")))
            .collect()
    };
    let (train, val) = (pick(&split.train)?, pick(&split.val)?);
    Ok(Prepared { calls, clicks, train, val })
}

fn encode_pairs(pairs: &[SummaryPair], src: &Vocabulary, tgt: &Vocabulary, cfg: &PipelineConfig) -> Result<Vec<SeqPair>> {
    let s = &cfg.summarizer;
    pairs
        .iter()
        .map(|p| {
            Ok(SeqPair::new(
                encode_sequence(src, &p.transcript, s.max_source_len, SequenceRole::Source)?,
                encode_sequence(tgt, &p.repnote, s.max_intent_len, SequenceRole::Target)?,
            ))
        })
        .collect()
}

fn train_summarizer(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg;
    let train_pairs: Vec<SummaryPair> = read_jsonl(&ctx.path(paths::PAIRS_TRAIN))?;
    let val_pairs: Vec<SummaryPair> = read_jsonl(&ctx.path(paths::PAIRS_VAL))?;
    if train_pairs.is_empty() {
        bail!(callmine::Error::Format("no usable (transcript, rep-note) training pairs".into()));
    }
    let min = cfg.summarizer.vocab_min_count;
    let src_vocab = build_seq_vocab(&train_pairs.iter().map(|p| p.transcript.clone()).collect::<Vec<_>>(), min)?;
    let tgt_vocab = build_seq_vocab(&train_pairs.iter().map(|p| p.repnote.clone()).collect::<Vec<_>>(), min)?;
    let src_hash = write_json(&ctx.path(paths::SRC_VOCAB), VOCAB_KIND, &src_vocab)?;
    let tgt_hash = write_json(&ctx.path(paths::TGT_VOCAB), VOCAB_KIND, &tgt_vocab)?;
    let train_set = encode_pairs(&train_pairs, &src_vocab, &tgt_vocab, cfg)?;
    let val_set = encode_pairs(&val_pairs, &src_vocab, &tgt_vocab, cfg)?;
    log::info!("vocabularies: {} source, {} target; {} train pairs", src_vocab.len(), tgt_vocab.len(), train_set.len());

    let mut files: Vec<String> = vec![paths::SRC_VOCAB.into(), paths::TGT_VOCAB.into()];
    let base = cfg.train_config();
    for (k, &variant) in cfg.summarizer.variants.iter().enumerate() {
        let seed = SplitMix64::derive(base.seed, k as u64 + 1);
        let tc = callmine::summarizer::TrainConfig { seed, ..base.clone() };
        let dims = variant.dims(cfg.summarizer.dims);
        let mut model = Seq2SeqModel::<f32>::init(src_vocab.len(), tgt_vocab.len(), dims, seed)?;
        let history = train(&mut model, &train_set, &val_set, &tc)?;
        log::info!("{}: best loss {:.4} at epoch {}", variant.name(), history.best_loss, history.best_epoch);
        let ckpt = paths::checkpoint(variant.name());
        let meta = save_checkpoint(&model, &ctx.path(&ckpt), &src_hash, &tgt_hash, serde_json::to_value(&tc)?)?;
        log::debug!("{ckpt}: {} parameters", meta.n_params);
        write_json(&ctx.path(&paths::history(variant.name())), "train_history", &history)?;
        files.push(callmine::summarizer::sidecar_path(Path::new(&ckpt)).to_string_lossy().into_owned());
        files.push(ckpt);
        files.push(paths::history(variant.name()));
    }
    Ok(files)
}

struct Summarizer {
    model: Seq2SeqModel<f32>,
    src: Vocabulary,
    tgt: Vocabulary,
}

impl Summarizer {
    fn load(ctx: &Ctx, variant: Variant) -> Result<Self> {
        let src: Vocabulary = read_json(&ctx.path(paths::SRC_VOCAB), VOCAB_KIND)?;
        let tgt: Vocabulary = read_json(&ctx.path(paths::TGT_VOCAB), VOCAB_KIND)?;
        let (model, meta) = load_checkpoint(&ctx.path(&paths::checkpoint(variant.name())))?;
        if meta.src_vocab_hash != hash_file(&ctx.path(paths::SRC_VOCAB))? || meta.tgt_vocab_hash != hash_file(&ctx.path(paths::TGT_VOCAB))? {
            bail!(crate::stage::Stale(format!("checkpoint '{}' does not match the stored vocabularies; rerun `callmine train-summarizer`", variant.name())));
        }
        Ok(Self { model, src, tgt })
    }

    fn summarize(&self, tokens: &[String], cfg: &PipelineConfig) -> Result<Vec<String>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let ids = encode_sequence(&self.src, tokens, cfg.summarizer.max_source_len, SequenceRole::Source)?;
        Ok(self.tgt.decode(&self.model.greedy_decode(&ids, cfg.summarizer.max_intent_len)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IntentRecord {
    call_id: String,
    intent: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct VariantOutputs {
    variant: Variant,
    outputs: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ValOutputs {
    call_ids: Vec<String>,
    variants: Vec<VariantOutputs>,
}

fn intents(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg;
    let norm = ctx.normalizer()?;
    let calls: Vec<CallRecord> = read_jsonl(&ctx.path(paths::CALLS))?;
    let val_pairs: Vec<SummaryPair> = read_jsonl(&ctx.path(paths::PAIRS_VAL))?;
    let mut variants = Vec::new();
    for &variant in &cfg.summarizer.variants {
        let s = Summarizer::load(ctx, variant)?;
        let outputs = val_pairs.iter().map(|p| s.summarize(&p.transcript, cfg)).collect::<Result<Vec<_>>>()?;
        variants.push(VariantOutputs { variant, outputs });
        if variant == cfg.summarizer.primary {
            let records = calls
                .iter()
                .map(|c| {
                    let tokens = tokenize(&norm.normalize_transcript(&c.transcript()));
                    Ok(IntentRecord { call_id: c.call_id.clone(), intent: s.summarize(&tokens, cfg)?.join(" ") })
                })
                .collect::<Result<Vec<_>>>()?;
            ctx.write_jsonl(paths::INTENTS, &records)?;
        }
    }
    let call_ids = val_pairs.iter().map(|p| p.call_id.clone()).collect();
    write_json(&ctx.path(paths::VAL_OUTPUTS), "val_outputs", &ValOutputs { call_ids, variants })?;
    Ok(vec![paths::INTENTS.into(), paths::VAL_OUTPUTS.into()])
}

#[derive(Debug, Serialize)]
struct CallCluster {
    call_id: String,
    intent: String,
    /// `None` for calls whose intent is empty.
    cluster: Option<usize>,
}

fn cluster(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg;
    let norm = ctx.normalizer()?;
    let records: Vec<IntentRecord> = read_jsonl(&ctx.path(paths::INTENTS))?;
    let normalized: Vec<String> = records.iter().map(|r| norm.normalize_intent(&r.intent)).collect();
    let distinct: Vec<String> = normalized.iter().filter(|s| !s.is_empty()).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.is_empty() {
        bail!(callmine::Error::Format("every generated intent is empty; nothing to cluster".into()));
    }
    let backend = match cfg.cluster.backend {
        Backend::Lsa => EmbeddingBackend::fit_lsa(&distinct, cfg.cluster.lsa_dims)?,
        Backend::EncoderMean => {
            let s = Summarizer::load(ctx, cfg.summarizer.primary)?;
            EmbeddingBackend::encoder_mean(&s.model, &s.src)?
        }
    };
    let vectors = backend.embed_intents(&distinct)?;
    let assignment = agglomerative_cluster(&vectors, cfg.cluster.threshold, cfg.cluster.linkage)?;
    let labels = label_clusters(&assignment, &vectors, &distinct)?;
    write_cluster_csv(&ctx.create_parent(paths::CLUSTERS)?, &distinct, &assignment, &labels)?;
    let index: BTreeMap<&str, usize> = distinct.iter().enumerate().map(|(i, s)| (s.as_str(), assignment.labels[i])).collect();
    let per_call: Vec<CallCluster> = records
        .iter()
        .zip(&normalized)
        .map(|(r, n)| CallCluster { call_id: r.call_id.clone(), intent: n.clone(), cluster: index.get(n.as_str()).copied() })
        .collect();
    write_json(&ctx.path(paths::ASSIGNMENT), "cluster_assignment", &per_call)?;
    log::info!("{} distinct intents in {} clusters", distinct.len(), assignment.n_clusters);
    Ok(vec![paths::CLUSTERS.into(), paths::ASSIGNMENT.into()])
}

fn motivator_docs(ctx: &Ctx, p: &Prepared) -> Result<(CallDocs, CallDocs)> {
    let norm = ctx.normalizer()?;
    let f = &ctx.cfg.motivators.features;
    Ok((
        prepare_docs(&p.train, &p.clicks, &norm, f.preprocess, f.session_gap_s),
        prepare_docs(&p.val, &p.clicks, &norm, f.preprocess, f.session_gap_s),
    ))
}

fn train_motivators(ctx: &Ctx) -> Result<Vec<String>> {
    let mc = ctx.cfg.motivator_config();
    let p = load_prepared(ctx)?;
    let (yt, yv) = (motivator_labels(&p.train)?, motivator_labels(&p.val)?);
    let (dt, dv) = motivator_docs(ctx, &p)?;
    let views = fit_views(&mc.features, &dt, mc.seed)?;
    let sources = source_data(&views, &dt, &dv)?;
    let ova_cfg = OvaConfig { spaces: mc.spaces.clone(), policy: mc.policy, balanced: mc.ensemble.balanced, seed: mc.seed };
    let ova = one_vs_all_train(&sources, &yt, &yv, &Motivator::ALL, &ova_cfg)?;
    write_json(&ctx.path(paths::VIEWS), "feature_views", &views)?;
    write_json(&ctx.path(paths::OVA), "ova_models", &ova)?;
    let mut files = vec![paths::VIEWS.to_string(), paths::OVA.to_string()];
    for m in &ova.models {
        let rel = paths::trials(m.motivator.name(), m.source.name());
        write_trial_log(&ctx.path(&rel), &m.trials)?;
        files.push(rel);
    }
    log::info!("{} source models; skipped {:?}", ova.models.len(), ova.skipped);
    Ok(files)
}

/// Validation record of one motivator's final selection.
#[derive(Debug, Serialize, Deserialize)]
struct TrainingSummary {
    motivator: Motivator,
    winner: String,
    usable_sources: usize,
    oof_leak_free: bool,
    candidates: Vec<Candidate>,
    /// Aligned with `candidates`.
    val_proba: Vec<Vec<f64>>,
}

fn ensemble(ctx: &Ctx) -> Result<Vec<String>> {
    let mc = ctx.cfg.motivator_config();
    let p = load_prepared(ctx)?;
    let (yt, yv) = (motivator_labels(&p.train)?, motivator_labels(&p.val)?);
    let views: Vec<ViewPipeline> = read_json(&ctx.path(paths::VIEWS), "feature_views")?;
    let ova: OvaResult = read_json(&ctx.path(paths::OVA), "ova_models")?;
    let (dt, dv) = motivator_docs(ctx, &p)?;
    let sources = source_data(&views, &dt, &dv)?;
    let trained = train_ensembles(&ova, &sources, &yt, &yv, &mc.policy, &mc.ensemble)?;
    let models: Vec<_> = trained.iter().map(|t| t.model.clone()).collect();
    let index = write_registry(&ctx.path(paths::REGISTRY), &models)?;
    let summary: Vec<TrainingSummary> = trained
        .into_iter()
        .map(|t| TrainingSummary {
            motivator: t.model.motivator,
            winner: t.model.winner(),
            usable_sources: t.usable_sources,
            oof_leak_free: t.oof.is_leak_free(),
            candidates: t.candidates,
            val_proba: t.val_proba,
        })
        .collect();
    write_json(&ctx.path(paths::TRAINING), "ensemble_training", &summary)?;
    let mut files: Vec<String> = index.iter().map(|e| format!("{}/{}", paths::REGISTRY, e.file)).collect();
    files.push(format!("{}/{}", paths::REGISTRY, callmine::ensemble::REGISTRY_INDEX));
    files.push(paths::TRAINING.into());
    let ensembles = summary.iter().filter(|s| s.winner == "ensemble").count();
    log::info!("{} final models, {ensembles} of them ensembles", summary.len());
    Ok(files)
}

/// First `n` tokens, the lead baseline.
fn lead(tokens: &[String], n: usize) -> Vec<String> {
    tokens.iter().take(n).cloned().collect()
}

fn evaluate(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg;
    let norm = ctx.normalizer()?;
    let n = cfg.summarizer.max_intent_len;

    let val_pairs: Vec<SummaryPair> = read_jsonl(&ctx.path(paths::PAIRS_VAL))?;
    let outputs: ValOutputs = read_json(&ctx.path(paths::VAL_OUTPUTS), "val_outputs")?;
    if outputs.call_ids.len() != val_pairs.len() || outputs.call_ids.iter().zip(&val_pairs).any(|(a, b)| *a != b.call_id) {
        bail!(crate::stage::Stale("intent outputs do not match the validation pairs; rerun `callmine intents`".into()));
    }
    let p = load_prepared(ctx)?;
    let whisper: BTreeMap<&str, Option<&str>> = p.calls.iter().map(|c| (c.call_id.as_str(), c.whisper.as_deref())).collect();
    let mut variants: Vec<(String, Vec<Vec<String>>)> = Variant::ALL
        .iter()
        .filter_map(|v| outputs.variants.iter().find(|o| o.variant == *v).map(|o| (v.label().to_string(), o.outputs.clone())))
        .collect();
    variants.push(("Lead-6 baseline".into(), val_pairs.iter().map(|p| lead(&p.transcript, n)).collect()));
    let whisper_out = val_pairs
        .iter()
        .map(|p| whisper.get(p.call_id.as_str()).copied().flatten().map_or_else(Vec::new, |w| lead(&tokenize(&norm.normalize_transcript(w)), n)))
        .collect();
    variants.push(("Whisper baseline".into(), whisper_out));
    let refs: Vec<Vec<String>> = val_pairs.iter().map(|p| p.repnote.clone()).collect();
    let summ = summarization_report(&variants, &refs, cfg.evaluate.sample_size, cfg.derived_seed(stream::REPORT))?;
    write_json(&ctx.path(paths::SUMMARIZATION), "summarization_report", &summ)?;

    let training: Vec<TrainingSummary> = read_json(&ctx.path(paths::TRAINING), "ensemble_training")?;
    let labels = motivator_labels(&p.val)?;
    let families: Vec<(String, Vec<Option<Vec<bool>>>)> = ["CT", "WSR", "CS", "EM"]
        .iter()
        .map(|fam| {
            let mut slots: Vec<Option<Vec<bool>>> = vec![None; Motivator::ALL.len()];
            for t in &training {
                if let Some(k) = t.candidates.iter().position(|c| c.name == *fam) {
                    let th = t.candidates[k].threshold;
                    slots[t.motivator.index()] = Some(t.val_proba[k].iter().map(|p| *p >= th).collect());
                }
            }
            (fam.to_string(), slots)
        })
        .collect();
    let mot = motivator_report(&families, &labels, cfg.evaluate.include_other)?;
    write_json(&ctx.path(paths::MOTIVATORS), "motivator_report", &mot)?;
    Ok(vec![paths::SUMMARIZATION.into(), paths::MOTIVATORS.into()])
}

fn report(ctx: &Ctx) -> Result<Vec<String>> {
    let summ: SummarizationReport = read_json(&ctx.path(paths::SUMMARIZATION), "summarization_report")?;
    let mot: MotivatorReport = read_json(&ctx.path(paths::MOTIVATORS), "motivator_report")?;
    write_summarization_csv(&ctx.create_parent(paths::TABLE3)?, &summ)?;
    write_motivator_csv(&ctx.create_parent(paths::TABLE5)?, &mot)?;
    fs::copy(ctx.path(paths::CLUSTERS), ctx.create_parent(paths::REPORT_CLUSTERS)?)?;
    Ok([paths::TABLE3, paths::TABLE5, paths::REPORT_CLUSTERS].map(String::from).to_vec())
}
