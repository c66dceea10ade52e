//! Text normalization pipelines for transcripts, rep-notes, generated
//! intents, and motivator-model preprocessing.
//!
//! A [`NormalizationPipeline`] is an ordered list of named steps. Applying a
//! pipeline runs the steps in order and repeats the whole pass until the text
//! stops changing, which makes every pipeline idempotent.

mod resources;

use std::collections::HashSet;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

pub use resources::{parse_list, parse_map, Resources};

use crate::error::{Error, Result};

/// Literal that replaces masked PII placeholders.
pub const MASKED_TOKEN: &str = "masked";

const MAX_PASSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Lowercase,
    RemoveSystemMessages,
    RemoveNoiseMarkers,
    ReplaceMaskedTokens,
    ExpandContractions,
    StripPrefixes,
    RemoveMaskedRemnants,
    CollapseRepeats,
    ExpandAcronyms,
    CollapseWhitespace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationPipeline {
    pub name: String,
    pub steps: Vec<Step>,
}

impl NormalizationPipeline {
    pub fn transcript() -> Self {
        use Step::*;
        Self {
            name: "transcript".into(),
            steps: vec![
                Lowercase,
                RemoveSystemMessages,
                RemoveNoiseMarkers,
                ReplaceMaskedTokens,
                ExpandContractions,
                CollapseWhitespace,
            ],
        }
    }

    pub fn repnote() -> Self {
        use Step::*;
        Self {
            name: "repnote".into(),
            steps: vec![
                Lowercase,
                ReplaceMaskedTokens,
                ExpandContractions,
                CollapseWhitespace,
                StripPrefixes,
                CollapseWhitespace,
            ],
        }
    }

    /// Repeats are collapsed before acronyms expand, so `ira ira rollover`
    /// yields a single expansion.
    pub fn intent() -> Self {
        use Step::*;
        Self {
            name: "intent".into(),
            steps: vec![
                Lowercase,
                RemoveMaskedRemnants,
                CollapseRepeats,
                ExpandAcronyms,
                CollapseWhitespace,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub remove_stopwords: bool,
    pub stem: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            remove_stopwords: true,
            stem: true,
        }
    }
}

impl PreprocessOptions {
    pub const PLAIN: Self = Self {
        remove_stopwords: false,
        stem: false,
    };
}

/// Compiled resource tables plus the shipped pipelines.
pub struct Normalizer {
    resources: Resources,
    masked: Vec<Regex>,
    contractions: Option<Regex>,
    prefixes: Vec<String>,
    stopwords: HashSet<String>,
    stemmer: Stemmer,
    transcript: NormalizationPipeline,
    repnote: NormalizationPipeline,
    intent: NormalizationPipeline,
}

impl std::fmt::Debug for Normalizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Normalizer").field("resources", &self.resources).finish_non_exhaustive()
    }
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::new(Resources::default()).expect("shipped patterns compile")
    }
}

impl Normalizer {
    pub fn new(resources: Resources) -> Result<Self> {
        let masked = resources
            .masked_patterns
            .iter()
            .map(|p| Regex::new(&format!("(?i){p}")).map_err(|e| Error::Format(format!("masked pattern {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let contractions = if resources.contractions.is_empty() {
            None
        } else {
            let mut keys: Vec<&String> = resources.contractions.keys().collect();
            keys.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            let alt = keys.iter().map(|k| regex::escape(k)).collect::<Vec<_>>().join("|");
            Some(
                Regex::new(&format!(r"(?i)\b(?:{alt})\b"))
                    .map_err(|e| Error::Format(format!("contraction table: {e}")))?,
            )
        };
        let mut prefixes: Vec<String> = resources.prefixes.iter().map(|p| p.to_lowercase()).collect();
        prefixes.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let stopwords = resources.stopwords.iter().map(|s| s.to_lowercase()).collect();
        Ok(Self {
            resources,
            masked,
            contractions,
            prefixes,
            stopwords,
            stemmer: Stemmer::create(Algorithm::English),
            transcript: NormalizationPipeline::transcript(),
            repnote: NormalizationPipeline::repnote(),
            intent: NormalizationPipeline::intent(),
        })
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    pub fn normalize_transcript(&self, text: &str) -> String {
        self.apply(&self.transcript, text)
    }

    pub fn normalize_repnote(&self, text: &str) -> String {
        self.apply(&self.repnote, text)
    }

    pub fn normalize_intent(&self, text: &str) -> String {
        self.apply(&self.intent, text)
    }

    /// Tokenize, then optionally drop stop words and stem.
    pub fn motivator_preprocess(&self, text: &str, opts: PreprocessOptions) -> Vec<String> {
        let mut tokens = tokenize(&text.to_lowercase());
        if opts.remove_stopwords {
            tokens.retain(|t| !self.stopwords.contains(t));
        }
        if opts.stem {
            for t in tokens.iter_mut() {
                let s = self.stemmer.stem(t).into_owned();
                *t = s;
            }
            tokens.retain(|t| !t.is_empty());
        }
        tokens
    }

    /// Runs `pipeline` to a fixed point.
    pub fn apply(&self, pipeline: &NormalizationPipeline, text: &str) -> String {
        let mut cur = text.to_string();
        for _ in 0..MAX_PASSES {
            let next = pipeline.steps.iter().fold(cur.clone(), |s, step| self.step(*step, &s));
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    fn step(&self, step: Step, s: &str) -> String {
        match step {
            Step::Lowercase => s.to_lowercase(),
            Step::RemoveSystemMessages => remove_phrases(s, &self.resources.system_messages),
            Step::RemoveNoiseMarkers => remove_phrases(s, &self.resources.noise_markers),
            Step::ReplaceMaskedTokens => {
                let mut out = s.to_string();
                for re in &self.masked {
                    if re.is_match(&out) {
                        out = re.replace_all(&out, format!(" {MASKED_TOKEN} ")).into_owned();
                    }
                }
                out
            }
            Step::ExpandContractions => match &self.contractions {
                None => s.to_string(),
                Some(re) => {
                    let s = s.replace('\u{2019}', "'");
                    re.replace_all(&s, |c: &regex::Captures<'_>| {
                        let key = c[0].to_lowercase();
                        self.resources.contractions.get(&key).cloned().unwrap_or(key)
                    })
                    .into_owned()
                }
            },
            Step::StripPrefixes => {
                let trimmed = s.trim_start();
                for p in &self.prefixes {
                    if let Some(rest) = trimmed.strip_prefix(p.as_str()) {
                        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                            return rest.to_string();
                        }
                    }
                }
                s.to_string()
            }
            Step::RemoveMaskedRemnants => s
                .split_whitespace()
                .filter(|t| *t != MASKED_TOKEN)
                .collect::<Vec<_>>()
                .join(" "),
            Step::CollapseRepeats => {
                let mut out: Vec<&str> = Vec::new();
                for t in s.split_whitespace() {
                    if out.last() != Some(&t) {
                        out.push(t);
                    }
                }
                out.join(" ")
            }
            Step::ExpandAcronyms => s
                .split_whitespace()
                .map(|t| self.resources.acronyms.get(t).map_or(t, String::as_str))
                .collect::<Vec<_>>()
                .join(" "),
            Step::CollapseWhitespace => s.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }
}

fn remove_phrases(s: &str, phrases: &[String]) -> String {
    let mut out = s.to_string();
    loop {
        let before = out.len();
        for p in phrases {
            if !p.is_empty() && out.contains(p.as_str()) {
                out = out.replace(p.as_str(), " ");
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

/// Splits on Unicode whitespace after deleting apostrophes and turning other
/// punctuation into spaces. Hyphens survive only between token characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .map(|c| if c.is_alphanumeric() || c == '-' || c.is_whitespace() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|t| t.trim_matches('-'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n() -> Normalizer {
        Normalizer::default()
    }

    #[test]
    fn transcript_example() {
        assert_eq!(
            n().normalize_transcript("I CAN'T login [MASKED] party has left the session"),
            "i cannot login masked"
        );
        assert_eq!(n().normalize_transcript(""), "");
        let once = n().normalize_transcript("i cannot login masked");
        assert_eq!(once, "i cannot login masked");
    }

    #[test]
    fn transcript_drops_noise_markers_without_masking_them() {
        assert_eq!(n().normalize_transcript("um [noise] my ssn is ***** [Laughter] ok"), "um my ssn is masked ok");
    }

    #[test]
    fn repnote_examples() {
        let n = n();
        assert_eq!(n.normalize_repnote("Customer contacted to get account reset"), "to get account reset");
        assert_eq!(n.normalize_repnote("password reset"), "password reset");
        assert_eq!(n.normalize_repnote("customer asked for statement copy"), "for statement copy");
        // prefix must end on a word boundary
        assert_eq!(n.normalize_repnote("customer askedx y"), "customer askedx y");
    }

    #[test]
    fn intent_examples() {
        let n = n();
        assert_eq!(n.normalize_intent("ira ira rollover"), "individual retirement account rollover");
        assert_eq!(n.normalize_intent("reset reset reset"), "reset");
        assert_eq!(n.normalize_intent("reset masked password"), "reset password");
        let bare = Normalizer::new(Resources::empty()).unwrap();
        assert_eq!(bare.normalize_intent("x"), "x");
    }

    #[test]
    fn motivator_preprocess_examples() {
        let n = n();
        assert_eq!(
            n.motivator_preprocess("the customer was resetting passwords", PreprocessOptions::default()),
            vec!["custom", "reset", "password"]
        );
        assert!(n.motivator_preprocess("", PreprocessOptions::default()).is_empty());
        assert_eq!(
            n.motivator_preprocess("The customer was resetting passwords", PreprocessOptions::PLAIN),
            vec!["the", "customer", "was", "resetting", "passwords"]
        );
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("pin/password reset, e-mail -x- don't"), vec!["pin", "password", "reset", "e-mail", "x", "dont"]);
        assert!(tokenize("  ... ").is_empty());
    }

    #[test]
    fn pipelines_serialize_with_step_order() {
        let p = NormalizationPipeline::transcript();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"lowercase\",\"remove_system_messages\""));
        let back: NormalizationPipeline = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let words = prop::sample::select(vec![
            "I", "CAN'T", "can't", "party", "has", "left", "the", "session", "[MASKED]", "[noise]", "***",
            "customer", "contacted", "asked", "ira", "IRA", "reset", "reset", "masked", "Won't", "x", "{name}",
            "(inaudible)", "<unk>", "àb", "ÉCOLE", "-", "--", "pin/password", "it's",
        ]);
        prop::collection::vec(words, 0..14).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn pipelines_are_idempotent(s in text_strategy(), raw in "[ -~]{0,40}") {
            let n = n();
            for input in [s.as_str(), raw.as_str()] {
                for p in [NormalizationPipeline::transcript(), NormalizationPipeline::repnote(), NormalizationPipeline::intent()] {
                    let once = n.apply(&p, input);
                    prop_assert_eq!(n.apply(&p, &once), once.clone());
                }
            }
        }

        #[test]
        fn transcript_output_is_clean(s in text_strategy(), raw in "[ -~]{0,40}") {
            let n = n();
            let masked: Vec<Regex> = n.resources().masked_patterns.iter().map(|p| Regex::new(&format!("(?i){p}")).unwrap()).collect();
            for input in [s.as_str(), raw.as_str()] {
                let out = n.normalize_transcript(input);
                prop_assert!(!out.chars().any(char::is_uppercase));
                for m in &n.resources().system_messages {
                    prop_assert!(!out.contains(m.as_str()));
                }
                for re in &masked {
                    prop_assert!(!re.is_match(&out), "{} matches {}", out, re);
                }
            }
        }

        #[test]
        fn plain_tokenizer_is_a_fixed_point(s in "\\PC{0,40}") {
            let n = n();
            let toks = n.motivator_preprocess(&s, PreprocessOptions::PLAIN);
            let again = n.motivator_preprocess(&toks.join(" "), PreprocessOptions::PLAIN);
            prop_assert_eq!(again, toks);
        }
    }
}
