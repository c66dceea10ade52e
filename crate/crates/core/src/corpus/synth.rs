//! Synthetic call corpus with planted reason and motivator signal.
//!
//! Every call is drawn from a motivator-conditioned template family. Each
//! family plants a signal phrase in the transcript, a whisper phrase, and a
//! clickstream profile; the three channels miss their signal independently
//! (the `*_signal_miss` rates), so the sources carry complementary evidence.

use serde::{Deserialize, Serialize};

use super::{CallRecord, ClickEvent, Motivator, Speaker, Utterance};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Motivator occurrence shares, M1..M11 then Other. Rounded, so they sum to 0.9999;
/// [`SynthConfig::default`] rescales them to sum to one.
pub const MOTIVATOR_PRIORS: [f64; 12] = [
    0.2294, 0.0121, 0.0247, 0.0102, 0.0391, 0.1844, 0.0668, 0.1390, 0.0167, 0.1409, 0.0742, 0.0624,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthNoise {
    /// Per-word deletion probability in customer utterances.
    pub token_dropout: f64,
    /// Per-word probability of inserting a masked placeholder.
    pub masked_token_rate: f64,
    /// Per-word probability of inserting a non-vocalized noise marker.
    pub noise_marker_rate: f64,
    pub pleasantries: bool,
    /// Probability that the call ends with a system message.
    pub system_message_rate: f64,
    pub ct_signal_miss: f64,
    pub wsr_signal_miss: f64,
    pub cs_signal_miss: f64,
}

impl Default for SynthNoise {
    fn default() -> Self {
        Self {
            token_dropout: 0.03,
            masked_token_rate: 0.03,
            noise_marker_rate: 0.03,
            pleasantries: true,
            system_message_rate: 0.5,
            ct_signal_miss: 0.3,
            wsr_signal_miss: 0.35,
            cs_signal_miss: 0.4,
        }
    }
}

impl SynthNoise {
    pub fn none() -> Self {
        Self {
            token_dropout: 0.0,
            masked_token_rate: 0.0,
            noise_marker_rate: 0.0,
            pleasantries: true,
            system_message_rate: 0.5,
            ct_signal_miss: 0.0,
            wsr_signal_miss: 0.0,
            cs_signal_miss: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let rates = [
            ("token_dropout", self.token_dropout),
            ("masked_token_rate", self.masked_token_rate),
            ("noise_marker_rate", self.noise_marker_rate),
            ("system_message_rate", self.system_message_rate),
            ("ct_signal_miss", self.ct_signal_miss),
            ("wsr_signal_miss", self.wsr_signal_miss),
            ("cs_signal_miss", self.cs_signal_miss),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("synth noise {name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_calls: usize,
    /// Motivator priors in [`Motivator::ALL`] order; must sum to 1 (±1e-6).
    pub priors: Vec<f64>,
    pub noise: SynthNoise,
    /// Probability that a call has a whisper.
    pub whisper_rate: f64,
    /// Probability that the caller has web activity (scaled per motivator).
    pub click_rate: f64,
    pub start_epoch: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let total: f64 = MOTIVATOR_PRIORS.iter().sum();
        Self {
            n_calls: 6000,
            priors: MOTIVATOR_PRIORS.iter().map(|p| p / total).collect(),
            noise: SynthNoise::default(),
            whisper_rate: 0.9,
            click_rate: 0.8,
            start_epoch: 1_625_097_600,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.priors.len() != Motivator::ALL.len() {
            return Err(Error::invalid(format!("expected 12 motivator priors, got {}", self.priors.len())));
        }
        if self.priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("motivator priors must be non-negative"));
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("motivator priors sum to {sum}, not 1")));
        }
        for (name, v) in [("whisper_rate", self.whisper_rate), ("click_rate", self.click_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        self.noise.validate()
    }
}

/// One template: the phrase planted in the transcript, a whisper phrase and
/// the call reasons the template draws rep-notes from.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub signal: &'static str,
    pub whisper: &'static str,
    pub reasons: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct ClickProfile {
    pub tags: &'static [&'static str],
    pub error_rate: f64,
    /// Max run length of repeated clicks on the same page.
    pub max_repeat: u32,
    pub uses_va_chat: f64,
    pub searches: &'static [&'static str],
    pub after_call: bool,
    /// Multiplier on [`SynthConfig::click_rate`].
    pub activity: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MotivatorProfile {
    pub motivator: Motivator,
    pub templates: [Template; 3],
    pub clicks: ClickProfile,
}

const fn t(signal: &'static str, whisper: &'static str, reasons: &'static [&'static str]) -> Template {
    Template { signal, whisper, reasons }
}

pub const PROFILES: [MotivatorProfile; 12] = [
    MotivatorProfile {
        motivator: Motivator::M1,
        templates: [
            t("i tried to do it online but the website kept giving me an error", "website error", &["password reset", "place a trade"]),
            t("i attempted this on the site and it would not go through", "online attempt failed", &["add bank account", "update address"]),
            t("the online form failed every time i submitted it", "site keeps failing", &["password reset", "add bank account"]),
        ],
        clicks: ClickProfile { tags: &["error-page", "trade-ticket"], error_rate: 0.7, max_repeat: 5, uses_va_chat: 0.3, searches: &[], after_call: false, activity: 1.2 },
    },
    MotivatorProfile {
        motivator: Motivator::M2,
        templates: [
            t("i just want to make sure my request went through", "confirm request", &["transfer of assets", "withdrawal request"]),
            t("can you confirm that it was received on your end", "verify submission", &["contribution confirmation"]),
            t("i wanted to double check that everything was processed", "double check processing", &["withdrawal request", "transfer of assets"]),
        ],
        clicks: ClickProfile { tags: &["confirmation", "pending-requests"], error_rate: 0.05, max_repeat: 3, uses_va_chat: 0.1, searches: &[], after_call: false, activity: 1.0 },
    },
    MotivatorProfile {
        motivator: Motivator::M3,
        templates: [
            t("there is no option on the website to do this", "no online option", &["beneficiary change", "trust account setup"]),
            t("the app does not let me do that at all", "app missing feature", &["power of attorney"]),
            t("i could not find any way to do it digitally", "cannot do digitally", &["beneficiary change", "power of attorney"]),
        ],
        clicks: ClickProfile { tags: &["forms-library", "service-center"], error_rate: 0.05, max_repeat: 2, uses_va_chat: 0.4, searches: &["change beneficiary form"], after_call: false, activity: 1.0 },
    },
    MotivatorProfile {
        motivator: Motivator::M4,
        templates: [
            t("i am calling about the letter i received in the mail", "letter received", &["tax form question", "account notice"]),
            t("i got an email from you and have a question about it", "follow up email", &["statement copy"]),
            t("this is a follow up on the notice you sent me", "notice follow up", &["account notice", "tax form question"]),
        ],
        clicks: ClickProfile { tags: &["message-center", "documents"], error_rate: 0.05, max_repeat: 2, uses_va_chat: 0.1, searches: &[], after_call: true, activity: 1.0 },
    },
    MotivatorProfile {
        motivator: Motivator::M5,
        templates: [
            t("i looked everywhere on the site but could not find the information", "cannot find information", &["routing number", "cost basis"]),
            t("i searched for it online and nothing useful came up", "search not helpful", &["fee schedule"]),
            t("where on the website do i find that number", "where to find", &["routing number", "fee schedule"]),
        ],
        clicks: ClickProfile { tags: &["site-search", "help-articles"], error_rate: 0.05, max_repeat: 2, uses_va_chat: 0.5, searches: &["routing number", "cost basis", "fees"], after_call: false, activity: 1.2 },
    },
    MotivatorProfile {
        motivator: Motivator::M6,
        templates: [
            t("i would like to talk to someone about my retirement options", "speak to advisor", &["ira rollover", "retirement planning"]),
            t("i need some guidance on what to do with my portfolio", "portfolio guidance", &["portfolio review"]),
            t("can i speak with an advisor about planning", "planning question", &["retirement planning", "ira rollover"]),
        ],
        clicks: ClickProfile { tags: &["planning-tools", "retirement-calculator"], error_rate: 0.02, max_repeat: 2, uses_va_chat: 0.1, searches: &[], after_call: false, activity: 0.9 },
    },
    MotivatorProfile {
        motivator: Motivator::M7,
        templates: [
            t("i do not really use computers so i prefer to call", "prefer phone", &["check balance", "order checks"]),
            t("i am not good with technology at all", "not tech savvy", &["mailing address update"]),
            t("my grandson usually helps me with the internet", "no computer help", &["check balance", "order checks"]),
        ],
        clicks: ClickProfile { tags: &["large-print", "contact-us"], error_rate: 0.1, max_repeat: 2, uses_va_chat: 0.0, searches: &[], after_call: false, activity: 0.4 },
    },
    MotivatorProfile {
        motivator: Motivator::M8,
        templates: [
            t("my account is locked and i cannot log in", "account locked", &["password reset", "unlock account"]),
            t("it says my username has been disabled", "username disabled", &["unlock account", "two factor setup"]),
            t("i keep getting locked out after too many attempts", "locked out", &["password reset", "two factor setup"]),
        ],
        clicks: ClickProfile { tags: &["login-security", "recover-username"], error_rate: 0.8, max_repeat: 6, uses_va_chat: 0.2, searches: &[], after_call: false, activity: 1.2 },
    },
    MotivatorProfile {
        motivator: Motivator::M9,
        templates: [
            t("i want to file a complaint about how this was handled", "file complaint", &["service complaint"]),
            t("this charge is wrong and i want to dispute it", "dispute charge", &["fee dispute", "incorrect charge"]),
            t("i am very unhappy with the service i received", "unhappy service", &["service complaint", "fee dispute"]),
        ],
        clicks: ClickProfile { tags: &["fee-details", "feedback-form"], error_rate: 0.1, max_repeat: 3, uses_va_chat: 0.2, searches: &["fee refund"], after_call: false, activity: 1.0 },
    },
    MotivatorProfile {
        motivator: Motivator::M10,
        templates: [
            t("i am checking on the status of my request", "status check", &["transfer status", "distribution status"]),
            t("how long until the transfer is completed", "transfer timing", &["transfer status"]),
            t("has my check been mailed out yet", "check mailed", &["check status", "distribution status"]),
        ],
        clicks: ClickProfile { tags: &["request-tracker", "transfer-status"], error_rate: 0.05, max_repeat: 4, uses_va_chat: 0.1, searches: &[], after_call: true, activity: 1.1 },
    },
    MotivatorProfile {
        motivator: Motivator::M11,
        templates: [
            t("i need this done today because of a deadline", "urgent deadline", &["wire transfer", "same day withdrawal"]),
            t("this is urgent and really cannot wait", "urgent request", &["expedite distribution"]),
            t("the money has to arrive by tomorrow morning", "money by tomorrow", &["wire transfer", "expedite distribution"]),
        ],
        clicks: ClickProfile { tags: &["wire-instructions", "cutoff-times"], error_rate: 0.1, max_repeat: 3, uses_va_chat: 0.1, searches: &["wire cutoff"], after_call: false, activity: 1.0 },
    },
    MotivatorProfile {
        motivator: Motivator::Other,
        templates: [
            t("i have a general question about something else", "general question", &["general inquiry"]),
            t("just a quick question for you today", "quick question", &["update phone number", "market hours"]),
            t("i wanted to ask about a couple of unrelated things", "miscellaneous inquiry", &["general inquiry", "market hours"]),
        ],
        clicks: ClickProfile { tags: &["market-news", "quotes"], error_rate: 0.05, max_repeat: 2, uses_va_chat: 0.1, searches: &[], after_call: false, activity: 1.0 },
    },
];

impl MotivatorProfile {
    pub fn of(m: Motivator) -> &'static MotivatorProfile {
        &PROFILES[m.index()]
    }
}

const GREETINGS: &[&str] = &[
    "thank you for calling how can i help you today",
    "good morning thanks for calling how may i help",
    "hello thanks for holding what can i do for you",
];
const CLOSINGS: &[&str] = &[
    "is there anything else i can help you with today",
    "thank you for calling have a great day",
    "you are all set thanks for your patience",
];
const REASON_LEADS: &[&str] = &["i need help with", "i am calling about", "i have a question on", "i want to ask about"];
const AGENT_FILLERS: &[&str] = &[
    "let me pull up your account",
    "one moment please while i look into that",
    "i can help you with that",
    "can you verify your date of birth",
    "thanks for confirming that information",
];
const CUSTOMER_FILLERS: &[&str] = &[
    "sure no problem",
    "yes that is correct",
    "okay thank you",
    "it is for my individual account",
    "i appreciate it",
];
const GENERIC_WHISPERS: &[&str] = &["account question", "help needed", "customer service", "representative"];
const REPNOTE_PREFIXES: &[&str] = &["customer contacted for", "customer asked about", "customer called about", "", "client called for"];
const MASKS: &[&str] = &["[MASKED]", "[NAME]", "[ACCOUNT_NUMBER]", "*****"];
const NOISE_MARKERS: &[&str] = &["[noise]", "[laughter]", "[cough]", "[crosstalk]"];
const SYSTEM_MESSAGES: &[&str] = &["party has left the session", "call is being transferred"];
const BACKGROUND_PAGES: &[(&str, &str)] = &[
    ("home", "home"),
    ("portfolio-summary", "portfolio"),
    ("quotes", "research"),
    ("market-news", "research"),
    ("balances", "portfolio"),
];
const DEVICES: &[&str] = &["desktop", "mobile", "tablet"];
const OSES: &[&str] = &["windows", "macos", "ios", "android"];
const BROWSERS: &[&str] = &["chrome", "safari", "edge", "firefox"];
const CHANNELS: &[&str] = &["direct", "email", "search", "app"];

/// Generates `(calls, clicks)`; a pure function of `(config, seed)`.
pub fn generate_synthetic_corpus(config: &SynthConfig, seed: u64) -> Result<(Vec<CallRecord>, Vec<ClickEvent>)> {
    config.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut calls = Vec::with_capacity(config.n_calls);
    let mut clicks = Vec::new();
    for idx in 0..config.n_calls {
        let motivator = Motivator::ALL[rng.categorical(&config.priors)];
        let profile = MotivatorProfile::of(motivator);
        let template = *rng.choose(&profile.templates);
        let call_start = config.start_epoch + idx as i64 * 3600 + rng.below(1800) as i64;
        let customer_id = format!("cust{idx:05}");
        let reason = *rng.choose(template.reasons);

        let utterances = transcript(&mut rng, config, &template, reason);
        let duration = utterances.last().map_or(0.0, |u| u.offset_s) + rng.uniform(5.0, 60.0);
        let call_end = call_start + duration.ceil() as i64;

        let whisper = rng.bernoulli(config.whisper_rate).then(|| {
            if rng.bernoulli(config.noise.wsr_signal_miss) {
                rng.choose(GENERIC_WHISPERS).to_string()
            } else {
                template.whisper.to_string()
            }
        });
        let prefix = rng.choose(REPNOTE_PREFIXES);
        let repnote = if prefix.is_empty() {
            reason.to_string()
        } else {
            format!("{prefix} {reason}")
        };

        if rng.bernoulli((config.click_rate * profile.clicks.activity).min(1.0)) {
            let signal = !rng.bernoulli(config.noise.cs_signal_miss);
            clickstream(&mut rng, &customer_id, call_start, call_end, &profile.clicks, signal, &mut clicks);
        }

        calls.push(CallRecord {
            call_id: format!("call{idx:05}"),
            customer_id: Some(customer_id),
            utterances,
            call_start,
            call_end,
            whisper,
            repnote: Some(capitalize_first(&repnote)),
            motivator: Some(motivator),
        });
    }
    Ok((calls, clicks))
}

fn capitalize_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn noisy(rng: &mut SplitMix64, noise: &SynthNoise, text: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for w in text.split_whitespace() {
        if rng.bernoulli(noise.masked_token_rate) {
            out.push(rng.choose(MASKS));
        }
        if rng.bernoulli(noise.noise_marker_rate) {
            out.push(rng.choose(NOISE_MARKERS));
        }
        if !rng.bernoulli(noise.token_dropout) {
            out.push(w);
        }
    }
    if out.is_empty() {
        // keep utterances non-empty
        out.push(text.split_whitespace().next().unwrap_or("okay"));
    }
    out.join(" ")
}

fn transcript(rng: &mut SplitMix64, config: &SynthConfig, template: &Template, reason: &str) -> Vec<Utterance> {
    let noise = &config.noise;
    let mut lines: Vec<(Speaker, String)> = Vec::new();
    if noise.pleasantries {
        lines.push((Speaker::Agent, rng.choose(GREETINGS).to_string()));
        lines.push((Speaker::Customer, "hi my name is [NAME]".to_string()));
    }
    let lead = format!("{} {reason}", rng.choose(REASON_LEADS));
    lines.push((Speaker::Customer, noisy(rng, noise, &lead)));
    lines.push((Speaker::Agent, rng.choose(AGENT_FILLERS).to_string()));
    if rng.bernoulli(noise.ct_signal_miss) {
        let filler = *rng.choose(CUSTOMER_FILLERS);
        lines.push((Speaker::Customer, noisy(rng, noise, filler)));
    } else {
        lines.push((Speaker::Customer, noisy(rng, noise, template.signal)));
    }
    for _ in 0..rng.below(3) {
        lines.push((Speaker::Agent, rng.choose(AGENT_FILLERS).to_string()));
        let filler = *rng.choose(CUSTOMER_FILLERS);
        lines.push((Speaker::Customer, noisy(rng, noise, filler)));
    }
    if noise.pleasantries {
        lines.push((Speaker::Agent, rng.choose(CLOSINGS).to_string()));
    }
    if rng.bernoulli(noise.system_message_rate) {
        lines.push((Speaker::System, rng.choose(SYSTEM_MESSAGES).to_string()));
    }
    let mut offset = 0.0f64;
    lines
        .into_iter()
        .map(|(speaker, text)| {
            let u = Utterance {
                speaker,
                text,
                offset_s: (offset * 10.0).round() / 10.0,
            };
            offset += rng.uniform(2.0, 15.0);
            u
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn click(
    rng: &mut SplitMix64,
    customer_id: &str,
    timestamp: i64,
    page: &str,
    tags: Vec<String>,
    error: bool,
    agent: (&str, &str, &str, &str),
    search_phrase: Option<String>,
) -> ClickEvent {
    ClickEvent {
        customer_id: customer_id.to_string(),
        timestamp,
        page_name: page.to_string(),
        page_tags: tags,
        dwell_ms: 2_000 + rng.below(90_000),
        device: agent.0.to_string(),
        os: agent.1.to_string(),
        browser: agent.2.to_string(),
        error,
        channel: agent.3.to_string(),
        search_phrase,
    }
}

fn clickstream(
    rng: &mut SplitMix64,
    customer_id: &str,
    call_start: i64,
    call_end: i64,
    profile: &ClickProfile,
    signal: bool,
    out: &mut Vec<ClickEvent>,
) {
    let agent = (*rng.choose(DEVICES), *rng.choose(OSES), *rng.choose(BROWSERS), *rng.choose(CHANNELS));
    let mut events = Vec::new();

    // background browsing earlier in the day
    let n_bg = rng.below(3) as usize;
    for _ in 0..n_bg {
        let mut ts = call_start - 3 * 3600 - rng.below(18 * 3600) as i64;
        for _ in 0..1 + rng.below(4) {
            let (page, tag) = *rng.choose(BACKGROUND_PAGES);
            events.push(click(rng, customer_id, ts, page, vec![tag.to_string()], false, agent, None));
            ts += 20 + rng.below(120) as i64;
        }
    }

    if signal {
        // a session shortly before the call on the profile's pages
        let mut ts = call_start - 300 - rng.below(2400) as i64;
        let n_pages = 1 + rng.below(3);
        for _ in 0..n_pages {
            let tag = *rng.choose(profile.tags);
            let page = format!("{tag}/view");
            let repeats = 1 + rng.below(profile.max_repeat as u64);
            for _ in 0..repeats {
                let err = rng.bernoulli(profile.error_rate);
                let search = if !profile.searches.is_empty() && rng.bernoulli(0.5) {
                    Some(rng.choose(profile.searches).to_string())
                } else {
                    None
                };
                events.push(click(rng, customer_id, ts, &page, vec![tag.to_string(), "service".to_string()], err, agent, search));
                ts += 5 + rng.below(40) as i64;
            }
        }
        if rng.bernoulli(profile.uses_va_chat) {
            events.push(click(rng, customer_id, ts, "virtual-assistant/chat", vec!["va-chat".to_string()], false, agent, None));
        }
        if profile.after_call {
            let mut ts = call_end + 60 + rng.below(1200) as i64;
            for _ in 0..1 + rng.below(3) {
                let tag = *rng.choose(profile.tags);
                events.push(click(rng, customer_id, ts, &format!("{tag}/view"), vec![tag.to_string()], false, agent, None));
                ts += 10 + rng.below(60) as i64;
            }
        }
    } else if rng.bernoulli(0.5) {
        let mut ts = call_start - 300 - rng.below(2400) as i64;
        for _ in 0..1 + rng.below(3) {
            let (page, tag) = *rng.choose(BACKGROUND_PAGES);
            events.push(click(rng, customer_id, ts, page, vec![tag.to_string()], false, agent, None));
            ts += 10 + rng.below(90) as i64;
        }
    }
    events.sort_by_key(|e| e.timestamp);
    out.extend(events);
}
