use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Token ↔ id map for the summarizer. Ids 0..4 are PAD, SOS, EOS, UNK;
/// the rest are ordered by descending count, then lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    min_count: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    min_count: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_tokens(r.tokens, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.tokens,
            min_count: v.min_count,
        }
    }
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_count: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            min_count,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.get(token).is_some_and(|&i| i > UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(SPECIALS[UNK], String::as_str)
    }

    /// Decodes ids up to the first EOS, skipping other specials.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i > UNK)
            .map(|&i| self.token(i).to_string())
            .collect()
    }
}

pub fn build_seq_vocab(texts: &[Vec<String>], min_count: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in texts.iter().flatten() {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && !SPECIALS.contains(t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = SPECIALS
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Ok(Vocabulary::from_tokens(tokens, min_count))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceRole {
    Source,
    /// Targets end with EOS after truncation.
    Target,
}

/// Truncates to `max_len` ids (mapping unknown tokens to UNK) and appends EOS
/// for targets.
pub fn encode_sequence(vocab: &Vocabulary, tokens: &[String], max_len: usize, role: SequenceRole) -> Result<Vec<usize>> {
    if max_len < 1 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.id(t)).collect();
    if role == SequenceRole::Target {
        ids.push(EOS);
    }
    Ok(ids)
}

/// Right-pads every sequence with PAD to the longest length.
pub fn pad_batch(seqs: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
    seqs.iter()
        .map(|s| {
            let mut p = s.clone();
            p.resize(len, PAD);
            p
        })
        .collect()
}
