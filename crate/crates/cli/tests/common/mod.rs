#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const STAGES: [&str; 9] = ["synth", "prepare", "train-summarizer", "intents", "cluster", "train-motivators", "ensemble", "evaluate", "report"];

pub fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small.toml")
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

pub fn callmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_callmine")).args(args).env("RUST_LOG", "warn").output().expect("spawn callmine")
}

pub fn stage(config: &Path, out: &Path, stage: &str) -> Output {
    callmine(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), stage])
}

/// Runs every stage in order; returns the first failing stage and its output.
pub fn run_chain(config: &Path, out: &Path) -> Result<(), (String, Output)> {
    for s in STAGES {
        let o = stage(config, out, s);
        if !o.status.success() {
            return Err((s.to_string(), o));
        }
    }
    Ok(())
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn file_hashes(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, callmine::artifact::hash_file(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Compares a report CSV with its golden file: identical header and first
/// column, same width everywhere, every other cell empty or a 4-decimal
/// value in [0, 1] (optionally marked `*`). Values themselves are not compared.
pub fn check_csv_shape(got: &Path, golden: &Path) -> Result<(), String> {
    let read = |p: &Path| -> Result<Vec<Vec<String>>, String> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(p).map_err(|e| format!("{}: {e}", p.display()))?;
        r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect()).map_err(|e| e.to_string())).collect()
    };
    let (g, w) = (read(got)?, read(golden)?);
    if g.len() != w.len() {
        return Err(format!("{} rows, golden has {}", g.len(), w.len()));
    }
    if g[0] != w[0] {
        return Err(format!("header {:?} != golden {:?}", g[0], w[0]));
    }
    for (i, (gr, wr)) in g.iter().zip(&w).enumerate().skip(1) {
        if gr.len() != wr.len() || gr[0] != wr[0] {
            return Err(format!("row {i}: {gr:?} does not match golden {wr:?}"));
        }
        for cell in &gr[1..] {
            let v = cell.trim_end_matches('*');
            let ok = cell.is_empty() || (v.len() == 6 && v.parse::<f64>().is_ok_and(|x| (0.0..=1.0).contains(&x)));
            if !ok {
                return Err(format!("row {i}: bad cell {cell:?}"));
            }
        }
    }
    Ok(())
}
