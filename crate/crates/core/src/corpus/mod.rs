//! Call records, clickstream events, JSONL ingestion, deterministic splits
//! and the synthetic corpus generator.
//!
//! `calls.jsonl` holds one [`CallRecord`] per line and `clicks.jsonl` one
//! [`ClickEvent`] per line (field-by-field schema in the repository README).

mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::{tokenize, Normalizer};
use crate::rng::SplitMix64;

pub use synth::{generate_synthetic_corpus, MotivatorProfile, SynthConfig, SynthNoise, MOTIVATOR_PRIORS};

/// Longest cleaned transcript (in tokens) kept for summarizer training.
pub const MAX_TRANSCRIPT_TOKENS: usize = 425;
/// Longest cleaned rep-note (in tokens) kept as a summarizer target.
pub const MAX_REPNOTE_TOKENS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Motivator {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M8,
    M9,
    M10,
    M11,
    Other,
}

impl Motivator {
    pub const ALL: [Motivator; 12] = [
        Motivator::M1,
        Motivator::M2,
        Motivator::M3,
        Motivator::M4,
        Motivator::M5,
        Motivator::M6,
        Motivator::M7,
        Motivator::M8,
        Motivator::M9,
        Motivator::M10,
        Motivator::M11,
        Motivator::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Motivator::M1 => "M1",
            Motivator::M2 => "M2",
            Motivator::M3 => "M3",
            Motivator::M4 => "M4",
            Motivator::M5 => "M5",
            Motivator::M6 => "M6",
            Motivator::M7 => "M7",
            Motivator::M8 => "M8",
            Motivator::M9 => "M9",
            Motivator::M10 => "M10",
            Motivator::M11 => "M11",
            Motivator::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Option<Motivator> {
        Motivator::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Motivator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Customer,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    /// Seconds from call start.
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call_id: String,
    /// Links a call to the caller's clickstream; absent when unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer_id: Option<String>,
    pub utterances: Vec<Utterance>,
    /// Epoch seconds.
    pub call_start: i64,
    pub call_end: i64,
    #[serde(default)]
    pub whisper: Option<String>,
    #[serde(default)]
    pub repnote: Option<String>,
    #[serde(default)]
    pub motivator: Option<Motivator>,
}

impl CallRecord {
    /// Checks the per-record invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.call_id.trim().is_empty() {
            return Err("empty call_id".into());
        }
        if self.call_end < self.call_start {
            return Err(format!("call_end {} precedes call_start {}", self.call_end, self.call_start));
        }
        let mut last = 0.0f64;
        for (i, u) in self.utterances.iter().enumerate() {
            if u.text.trim().is_empty() {
                return Err(format!("utterance {i} has empty text"));
            }
            if !u.offset_s.is_finite() || u.offset_s < 0.0 {
                return Err(format!("utterance {i} has invalid offset {}", u.offset_s));
            }
            if u.offset_s < last {
                return Err(format!("utterance {i} offset {} decreases", u.offset_s));
            }
            last = u.offset_s;
        }
        Ok(())
    }

    /// Utterance texts joined with single spaces, in order.
    pub fn transcript(&self) -> String {
        self.utterances.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub customer_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub page_name: String,
    #[serde(default)]
    pub page_tags: Vec<String>,
    pub dwell_ms: u64,
    pub device: String,
    pub os: String,
    pub browser: String,
    #[serde(default)]
    pub error: bool,
    pub channel: String,
    #[serde(default)]
    pub search_phrase: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
    /// Split each motivator group separately.
    #[serde(default)]
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratio: 0.7,
            seed: 42,
            stratify: false,
        }
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<LineDiagnostic>,
}

fn load_jsonl<T, F>(path: &Path, check: F) -> Result<Loaded<T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> std::result::Result<(), String>,
{
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Loaded {
        records: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(rec) => match check(&rec) {
                Ok(()) => out.records.push(rec),
                Err(message) => out.diagnostics.push(LineDiagnostic { line: i + 1, message }),
            },
            Err(e) => out.diagnostics.push(LineDiagnostic {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Parses `calls.jsonl`; schema or invariant violations become per-line
/// diagnostics and the remaining lines are still loaded.
pub fn load_calls(path: &Path) -> Result<Loaded<CallRecord>> {
    let loaded = load_jsonl(path, CallRecord::validate)?;
    let mut seen = HashSet::new();
    let mut out = Loaded {
        records: Vec::with_capacity(loaded.records.len()),
        diagnostics: loaded.diagnostics,
    };
    for rec in loaded.records {
        if seen.insert(rec.call_id.clone()) {
            out.records.push(rec);
        } else {
            out.diagnostics.push(LineDiagnostic {
                line: 0,
                message: format!("duplicate call_id {}", rec.call_id),
            });
        }
    }
    Ok(out)
}

pub fn load_clicks(path: &Path) -> Result<Loaded<ClickEvent>> {
    load_jsonl(path, |_: &ClickEvent| Ok(()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Seeded train/validation partition.
///
/// Call ids are sorted, shuffled with [`SplitMix64`] seeded by `spec.seed`,
/// and the first `round(ratio * N)` become the training set. Output keeps the
/// input order within each side.
pub fn split_train_validation(
    records: &[CallRecord],
    spec: &SplitSpec,
) -> Result<(Vec<CallRecord>, Vec<CallRecord>)> {
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {} outside (0, 1)", spec.ratio)));
    }
    if records.is_empty() {
        return Err(Error::invalid("cannot split an empty record list"));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut groups: BTreeMap<Option<Motivator>, Vec<&str>> = BTreeMap::new();
    for r in records {
        let key = if spec.stratify { r.motivator } else { None };
        groups.entry(key).or_default().push(r.call_id.as_str());
    }
    let mut train_ids: HashSet<&str> = HashSet::new();
    for ids in groups.values_mut() {
        ids.sort_unstable();
        rng.shuffle(ids);
        let n_train = (spec.ratio * ids.len() as f64).round() as usize;
        train_ids.extend(ids.iter().take(n_train));
    }
    let (train, val): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| train_ids.contains(r.call_id.as_str()));
    Ok((train, val))
}

/// A cleaned (transcript, rep-note) training pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPair {
    pub call_id: String,
    pub transcript: Vec<String>,
    pub repnote: Vec<String>,
}

/// Normalizes and tokenizes each call and keeps pairs within the length
/// limits ([`MAX_TRANSCRIPT_TOKENS`], [`MAX_REPNOTE_TOKENS`]). Calls without a
/// rep-note, or whose cleaned transcript or rep-note is empty, are dropped.
pub fn filter_for_summarizer(calls: &[CallRecord], norm: &Normalizer) -> Vec<SummaryPair> {
    calls
        .iter()
        .filter_map(|c| {
            let repnote = tokenize(&norm.normalize_repnote(c.repnote.as_deref()?));
            let transcript = tokenize(&norm.normalize_transcript(&c.transcript()));
            let keep = !transcript.is_empty()
                && !repnote.is_empty()
                && transcript.len() <= MAX_TRANSCRIPT_TOKENS
                && repnote.len() <= MAX_REPNOTE_TOKENS;
            keep.then(|| SummaryPair {
                call_id: c.call_id.clone(),
                transcript,
                repnote,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn call(id: &str, text: &str, repnote: Option<&str>) -> CallRecord {
        CallRecord {
            call_id: id.into(),
            customer_id: None,
            utterances: vec![Utterance {
                speaker: Speaker::Customer,
                text: text.into(),
                offset_s: 0.0,
            }],
            call_start: 100,
            call_end: 200,
            whisper: None,
            repnote: repnote.map(str::to_string),
            motivator: Some(Motivator::M1),
        }
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_single_valid_line() {
        let rec = call("c1", "hello", Some("password reset"));
        let f = write_lines(&[serde_json::to_string(&rec).unwrap()]);
        let loaded = load_calls(f.path()).unwrap();
        assert_eq!(loaded.records, vec![rec]);
        assert!(loaded.diagnostics.is_empty());
    }

    #[test]
    fn load_empty_file() {
        let f = write_lines(&[]);
        let loaded = load_calls(f.path()).unwrap();
        assert!(loaded.records.is_empty());
        assert!(loaded.diagnostics.is_empty());
    }

    #[test]
    fn malformed_line_gets_a_diagnostic() {
        let rec = call("c1", "hello", None);
        let f = write_lines(&[serde_json::to_string(&rec).unwrap(), r#"{"call_id": "c2", "utterances": 5}"#.into()]);
        let loaded = load_calls(f.path()).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.diagnostics.len(), 1);
        assert_eq!(loaded.diagnostics[0].line, 2);
    }

    #[test]
    fn invariant_violations_are_diagnosed() {
        let mut bad = call("c1", "hello", None);
        bad.call_end = 50;
        let mut unknown = serde_json::to_value(call("c2", "x", None)).unwrap();
        unknown["motivator"] = "M12".into();
        let f = write_lines(&[serde_json::to_string(&bad).unwrap(), unknown.to_string()]);
        let loaded = load_calls(f.path()).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.diagnostics.iter().map(|d| d.line).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(matches!(load_calls(Path::new("/nonexistent/calls.jsonl")), Err(Error::Io { .. })));
    }

    fn ten() -> Vec<CallRecord> {
        (0..10).map(|i| call(&format!("c{i}"), "x", None)).collect()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let recs = ten();
        let spec = SplitSpec { ratio: 0.7, seed: 42, stratify: false };
        let (tr, va) = split_train_validation(&recs, &spec).unwrap();
        assert_eq!((tr.len(), va.len()), (7, 3));
        let a: HashSet<_> = tr.iter().map(|r| &r.call_id).collect();
        assert!(va.iter().all(|r| !a.contains(&r.call_id)));
        let again = split_train_validation(&recs, &spec).unwrap();
        assert_eq!(again, (tr, va));
    }

    #[test]
    fn split_depends_on_seed() {
        let recs = ten();
        let mut differing = 0;
        for s in 0..100u64 {
            let a = split_train_validation(&recs, &SplitSpec { ratio: 0.7, seed: 2 * s + 1, stratify: false }).unwrap();
            let b = split_train_validation(&recs, &SplitSpec { ratio: 0.7, seed: 2 * s + 2, stratify: false }).unwrap();
            if a.0 != b.0 {
                differing += 1;
            }
        }
        assert!(differing >= 1);
        assert!(differing > 90, "only {differing} of 100 seed pairs differ");
    }

    #[test]
    fn split_rejects_bad_ratio() {
        for ratio in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(split_train_validation(&ten(), &SplitSpec { ratio, seed: 1, stratify: false }).is_err());
        }
        assert!(split_train_validation(&[], &SplitSpec::default()).is_err());
    }

    #[test]
    fn stratified_split_balances_groups() {
        let mut recs = ten();
        for (i, r) in recs.iter_mut().enumerate() {
            r.motivator = Some(if i < 5 { Motivator::M1 } else { Motivator::M2 });
        }
        let (tr, _) = split_train_validation(&recs, &SplitSpec { ratio: 0.6, seed: 3, stratify: true }).unwrap();
        assert_eq!(tr.iter().filter(|r| r.motivator == Some(Motivator::M1)).count(), 3);
        assert_eq!(tr.iter().filter(|r| r.motivator == Some(Motivator::M2)).count(), 3);
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn summarizer_length_filter_boundaries() {
        let norm = Normalizer::default();
        let calls = vec![
            call("keep", &words(425), Some("one two three four five six")),
            call("long", &words(426), Some("password reset")),
            call("note", &words(10), Some("one two three four five six seven")),
            call("none", &words(10), None),
        ];
        let kept = filter_for_summarizer(&calls, &norm);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].call_id, "keep");
        assert_eq!(kept[0].transcript.len(), 425);
        assert_eq!(kept[0].repnote.len(), 6);
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..60, ratio in 0.05f64..0.95, seed in 0u64..1000, stratify in proptest::bool::ANY) {
            let recs: Vec<_> = (0..n).map(|i| {
                let mut c = call(&format!("id{i}"), "x", None);
                c.motivator = Some(Motivator::ALL[i % 12]);
                c
            }).collect();
            let (tr, va) = split_train_validation(&recs, &SplitSpec { ratio, seed, stratify }).unwrap();
            let mut all: Vec<_> = tr.iter().chain(va.iter()).map(|r| r.call_id.clone()).collect();
            all.sort();
            let mut want: Vec<_> = recs.iter().map(|r| r.call_id.clone()).collect();
            want.sort();
            proptest::prop_assert_eq!(all, want);
            if !stratify {
                proptest::prop_assert_eq!(tr.len(), (ratio * n as f64).round() as usize);
            }
        }
    }
}
