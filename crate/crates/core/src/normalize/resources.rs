//! Editable resource tables behind the normalization pipelines.
//!
//! File format: one entry per line; mapping tables use `key<TAB>value`;
//! blank lines and lines starting with `#` are ignored. The shipped defaults
//! live under `resources/` and are compiled in.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CONTRACTIONS: &str = include_str!("../../resources/contractions.tsv");
const ACRONYMS: &str = include_str!("../../resources/acronyms.tsv");
const STOPWORDS: &str = include_str!("../../resources/stopwords.txt");
const PREFIXES: &str = include_str!("../../resources/prefixes.txt");
const SYSTEM_MESSAGES: &str = include_str!("../../resources/system_messages.txt");
const NOISE_MARKERS: &str = include_str!("../../resources/noise_markers.txt");
const MASKED_PATTERNS: &str = include_str!("../../resources/masked_patterns.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub contractions: BTreeMap<String, String>,
    pub acronyms: BTreeMap<String, String>,
    pub stopwords: Vec<String>,
    pub prefixes: Vec<String>,
    pub system_messages: Vec<String>,
    pub noise_markers: Vec<String>,
    pub masked_patterns: Vec<String>,
}

impl Default for Resources {
    fn default() -> Self {
        Self::from_sources(&Sources {
            contractions: CONTRACTIONS,
            acronyms: ACRONYMS,
            stopwords: STOPWORDS,
            prefixes: PREFIXES,
            system_messages: SYSTEM_MESSAGES,
            noise_markers: NOISE_MARKERS,
            masked_patterns: MASKED_PATTERNS,
        })
        .expect("shipped resource tables parse")
    }
}

struct Sources<'a> {
    contractions: &'a str,
    acronyms: &'a str,
    stopwords: &'a str,
    prefixes: &'a str,
    system_messages: &'a str,
    noise_markers: &'a str,
    masked_patterns: &'a str,
}

impl Resources {
    /// Tables with no entries; every table-driven step becomes a no-op.
    pub fn empty() -> Self {
        Self {
            contractions: BTreeMap::new(),
            acronyms: BTreeMap::new(),
            stopwords: Vec::new(),
            prefixes: Vec::new(),
            system_messages: Vec::new(),
            noise_markers: Vec::new(),
            masked_patterns: Vec::new(),
        }
    }

    /// Loads tables from a directory using the shipped file names. Missing
    /// files fall back to the shipped defaults.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str, fallback: &'static str| -> Result<String> {
            let p = dir.join(name);
            if p.exists() {
                std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
            } else {
                Ok(fallback.to_string())
            }
        };
        let c = read("contractions.tsv", CONTRACTIONS)?;
        let a = read("acronyms.tsv", ACRONYMS)?;
        let s = read("stopwords.txt", STOPWORDS)?;
        let p = read("prefixes.txt", PREFIXES)?;
        let m = read("system_messages.txt", SYSTEM_MESSAGES)?;
        let n = read("noise_markers.txt", NOISE_MARKERS)?;
        let r = read("masked_patterns.txt", MASKED_PATTERNS)?;
        Self::from_sources(&Sources {
            contractions: &c,
            acronyms: &a,
            stopwords: &s,
            prefixes: &p,
            system_messages: &m,
            noise_markers: &n,
            masked_patterns: &r,
        })
    }

    fn from_sources(src: &Sources<'_>) -> Result<Self> {
        Ok(Self {
            contractions: parse_map(src.contractions, "contractions")?,
            acronyms: parse_map(src.acronyms, "acronyms")?,
            stopwords: parse_list(src.stopwords),
            prefixes: parse_list(src.prefixes),
            system_messages: parse_list(src.system_messages),
            noise_markers: parse_list(src.noise_markers),
            masked_patterns: parse_list(src.masked_patterns),
        })
    }

    /// Content hash recorded in model artifacts.
    pub fn version_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("resources serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

fn entries(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn parse_map(text: &str, table: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (line, l) in entries(text) {
        let (k, v) = l
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("{table} line {line}: expected key<TAB>value")))?;
        out.insert(k.trim().to_lowercase(), v.trim().to_lowercase());
    }
    Ok(out)
}

pub fn parse_list(text: &str) -> Vec<String> {
    entries(text).map(|(_, l)| l.trim().to_string()).collect()
}
