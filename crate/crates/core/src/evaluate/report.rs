use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Motivator;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::rouge::{rouge, RougeScore};

pub const TABLE3_HEADER: [&str; 5] = ["Model", "Rouge-1 P", "Rouge-1 R", "Rouge-L P", "Rouge-L R"];
/// Row labels in table order: three summarizer variants, then the two
/// extractive baselines standing in for the pre-trained transformer rows.
pub const TABLE3_MODELS: [&str; 5] = ["LSTM", "Bi-LSTM", "stacked Bi-LSTM", "Lead-6 baseline", "Whisper baseline"];
pub const FAMILIES: [&str; 4] = ["CT", "WSR", "CS", "EM"];
pub const TABLE5_HEADER: [&str; 9] = ["Motivator", "CT P", "CT R", "WSR P", "WSR R", "CS P", "CS R", "EM P", "EM R"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub mean: RougeScore,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizationReport {
    pub rows: Vec<SummaryRow>,
    /// Rows with the highest mean Rouge-1 / Rouge-L precision.
    pub best_rouge1_p: usize,
    pub best_rouge_l_p: usize,
    pub sample: Vec<usize>,
}

/// Mean ROUGE per variant over a seeded sample of at most `sample_size`
/// pairs (all pairs when there are fewer).
pub fn summarization_report(
    variants: &[(String, Vec<Vec<String>>)],
    references: &[Vec<String>],
    sample_size: usize,
    seed: u64,
) -> Result<SummarizationReport> {
    if references.is_empty() {
        return Err(Error::invalid("no references to score against"));
    }
    if variants.is_empty() {
        return Err(Error::invalid("no model variants"));
    }
    for (name, out) in variants {
        if out.len() != references.len() {
            return Err(Error::invalid(format!("variant '{name}' has {} outputs for {} references", out.len(), references.len())));
        }
    }
    let mut sample: Vec<usize> = (0..references.len()).collect();
    if sample.len() > sample_size {
        SplitMix64::new(seed).shuffle(&mut sample);
        sample.truncate(sample_size);
        sample.sort_unstable();
    }
    let k = sample.len().max(1) as f64;
    let rows: Vec<SummaryRow> = variants
        .iter()
        .map(|(name, out)| {
            let mut m = RougeScore::default();
            for &i in &sample {
                let s = rouge(&out[i], &references[i]);
                m.rouge1_p += s.rouge1_p;
                m.rouge1_r += s.rouge1_r;
                m.rouge_l_p += s.rouge_l_p;
                m.rouge_l_r += s.rouge_l_r;
            }
            m.rouge1_p /= k;
            m.rouge1_r /= k;
            m.rouge_l_p /= k;
            m.rouge_l_r /= k;
            SummaryRow { model: name.clone(), mean: m, n: sample.len() }
        })
        .collect();
    let argmax = |f: &dyn Fn(&SummaryRow) -> f64| (0..rows.len()).fold(0, |b, i| if f(&rows[i]) > f(&rows[b]) { i } else { b });
    let best_rouge1_p = argmax(&|r| r.mean.rouge1_p);
    let best_rouge_l_p = argmax(&|r| r.mean.rouge_l_p);
    Ok(SummarizationReport { rows, best_rouge1_p, best_rouge_l_p, sample })
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn create_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Table-3 CSV. The best precision in each Rouge column carries a `*`.
pub fn write_summarization_csv(path: &Path, report: &SummarizationReport) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(TABLE3_HEADER)?;
    for (i, r) in report.rows.iter().enumerate() {
        let star = |best: usize, v: f64| if best == i { format!("{}*", fmt(v)) } else { fmt(v) };
        w.write_record([
            r.model.clone(),
            star(report.best_rouge1_p, r.mean.rouge1_p),
            fmt(r.mean.rouge1_r),
            star(report.best_rouge_l_p, r.mean.rouge_l_p),
            fmt(r.mean.rouge_l_r),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Confusion counts for one binary class; 0/0 precision or recall is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

pub fn class_report(pred: &[bool], labels: &[bool]) -> Result<ClassCounts> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: pred.len() });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ClassCounts { tp, fp, fn_, tn, precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_), support: tp + fn_ })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivatorRow {
    pub motivator: Motivator,
    /// One cell per family; `None` when the family has no model.
    pub cells: Vec<Option<ClassCounts>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivatorReport {
    pub families: Vec<String>,
    pub rows: Vec<MotivatorRow>,
}

/// Per-motivator validation precision/recall for each model family.
/// `families[f].1[k]` holds the decisions of family `f` for
/// `Motivator::ALL[k]`. Rows cover M1..M11, plus Other when asked.
pub fn motivator_report(
    families: &[(String, Vec<Option<Vec<bool>>>)],
    labels: &[Motivator],
    include_other: bool,
) -> Result<MotivatorReport> {
    let motivators = if include_other { &Motivator::ALL[..] } else { &Motivator::ALL[..11] };
    for (name, preds) in families {
        if preds.len() != 12 {
            return Err(Error::invalid(format!("family '{name}' needs 12 motivator slots")));
        }
    }
    let mut rows = Vec::new();
    for &m in motivators {
        let truth: Vec<bool> = labels.iter().map(|l| *l == m).collect();
        let cells = families
            .iter()
            .map(|(_, preds)| preds[m.index()].as_ref().map(|p| class_report(p, &truth)).transpose())
            .collect::<Result<Vec<_>>>()?;
        rows.push(MotivatorRow { motivator: m, cells });
    }
    Ok(MotivatorReport { families: families.iter().map(|(n, _)| n.clone()).collect(), rows })
}

/// Table-5 CSV. Missing models leave both cells empty.
pub fn write_motivator_csv(path: &Path, report: &MotivatorReport) -> Result<()> {
    let mut w = create_writer(path)?;
    let mut header = vec!["Motivator".to_string()];
    for f in &report.families {
        header.push(format!("{f} P"));
        header.push(format!("{f} R"));
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![r.motivator.name().to_string()];
        for c in &r.cells {
            match c {
                Some(c) => {
                    rec.push(fmt(c.precision));
                    rec.push(fmt(c.recall));
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
