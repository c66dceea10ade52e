//! Clickstream sessions and per-call window features.
//!
//! Windows relative to a call: 24h before `[start-24h, start)`, 1h before
//! `[start-1h, start)` and 1h after `(end, end+1h]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ClickEvent;

/// Inter-arrival gap (seconds) that closes a session.
pub const DEFAULT_SESSION_GAP_S: i64 = 1800;

pub const WINDOWS: [&str; 3] = ["24h_before", "1h_before", "1h_after"];

/// Splits one customer's events into sessions: consecutive events (by
/// timestamp) at most `gap_s` apart share a session.
pub fn sessionize(events: &[ClickEvent], gap_s: i64) -> Vec<Vec<&ClickEvent>> {
    let mut sorted: Vec<&ClickEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.timestamp);
    let mut sessions: Vec<Vec<&ClickEvent>> = Vec::new();
    for e in sorted {
        match sessions.last_mut() {
            Some(s) if e.timestamp - s.last().expect("non-empty session").timestamp <= gap_s => s.push(e),
            _ => sessions.push(vec![e]),
        }
    }
    sessions
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub total_dwell_s: f64,
    pub n_clicks: f64,
    pub n_sessions: f64,
    /// Mean session duration in seconds (first click to end of last dwell).
    pub mean_session_len_s: f64,
    /// Mean length of repeated-page runs (length ≥ 2); 0 without repeats.
    pub mean_repetitive_clicks: f64,
    /// Longest run of identical consecutive pages within a session.
    pub max_repetitive_clicks: f64,
    pub n_articles: f64,
    pub n_errors: f64,
    pub used_va_chat: f64,
}

impl WindowStats {
    pub const NAMES: [&'static str; 9] = [
        "total_dwell_s",
        "n_clicks",
        "n_sessions",
        "mean_session_len_s",
        "mean_repetitive_clicks",
        "max_repetitive_clicks",
        "n_articles",
        "n_errors",
        "used_va_chat",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.total_dwell_s,
            self.n_clicks,
            self.n_sessions,
            self.mean_session_len_s,
            self.mean_repetitive_clicks,
            self.max_repetitive_clicks,
            self.n_articles,
            self.n_errors,
            self.used_va_chat,
        ]
    }

    fn from_events(events: &[ClickEvent], gap_s: i64) -> Self {
        let sessions = sessionize(events, gap_s);
        if sessions.is_empty() {
            return Self::default();
        }
        let mut runs: Vec<usize> = Vec::new();
        let mut durations = 0.0;
        for s in &sessions {
            let last = s.last().expect("non-empty session");
            durations += (last.timestamp - s[0].timestamp) as f64 + last.dwell_ms as f64 / 1000.0;
            let mut run = 1;
            for w in s.windows(2) {
                if w[0].page_name == w[1].page_name {
                    run += 1;
                } else {
                    runs.push(run);
                    run = 1;
                }
            }
            runs.push(run);
        }
        let repeats: Vec<usize> = runs.iter().copied().filter(|&r| r >= 2).collect();
        let is_article = |e: &ClickEvent| e.page_tags.iter().any(|t| t.contains("article")) || e.page_name.contains("article");
        let is_va = |e: &ClickEvent| e.page_tags.iter().any(|t| t == "va-chat") || e.page_name.contains("virtual-assistant");
        Self {
            total_dwell_s: events.iter().map(|e| e.dwell_ms as f64 / 1000.0).sum(),
            n_clicks: events.len() as f64,
            n_sessions: sessions.len() as f64,
            mean_session_len_s: durations / sessions.len() as f64,
            mean_repetitive_clicks: if repeats.is_empty() {
                0.0
            } else {
                repeats.iter().sum::<usize>() as f64 / repeats.len() as f64
            },
            max_repetitive_clicks: runs.iter().copied().max().unwrap_or(0) as f64,
            n_articles: events.iter().filter(|e| is_article(e)).count() as f64,
            n_errors: events.iter().filter(|e| e.error).count() as f64,
            used_va_chat: if events.iter().any(is_va) { 1.0 } else { 0.0 },
        }
    }
}

/// Raw click features of one call before vocabulary-dependent encoding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClickFeatureVector {
    pub windows: [WindowStats; 3],
    pub tag_counts: [BTreeMap<String, f64>; 3],
    pub device: Option<String>,
    pub os: Option<String>,
    pub browser: Option<String>,
}

impl ClickFeatureVector {
    pub fn has_activity(&self) -> bool {
        self.windows.iter().any(|w| w.n_clicks > 0.0)
    }
}

fn most_common<'a>(values: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // max count, ties to the lexicographically smallest value
    counts.into_iter().fold(None, |best: Option<(&str, usize)>, (k, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((k, c)),
    })
    .map(|(k, _)| k.to_string())
}

/// Features of one customer's events around a call.
pub fn window_features(events: &[ClickEvent], call_start: i64, call_end: i64, gap_s: i64) -> ClickFeatureVector {
    let day = 24 * 3600;
    let hour = 3600;
    let pick = |f: &dyn Fn(i64) -> bool| -> Vec<ClickEvent> { events.iter().filter(|e| f(e.timestamp)).cloned().collect() };
    let spans: [Vec<ClickEvent>; 3] = [
        pick(&|t| t >= call_start - day && t < call_start),
        pick(&|t| t >= call_start - hour && t < call_start),
        pick(&|t| t > call_end && t <= call_end + hour),
    ];
    let mut out = ClickFeatureVector::default();
    for (w, evs) in spans.iter().enumerate() {
        out.windows[w] = WindowStats::from_events(evs, gap_s);
        for e in evs {
            for t in &e.page_tags {
                *out.tag_counts[w].entry(t.clone()).or_default() += 1.0;
            }
        }
    }
    let relevant: Vec<&ClickEvent> = spans[0].iter().chain(spans[2].iter()).collect();
    out.device = most_common(relevant.iter().map(|e| e.device.as_str()));
    out.os = most_common(relevant.iter().map(|e| e.os.as_str()));
    out.browser = most_common(relevant.iter().map(|e| e.browser.as_str()));
    out
}

/// Fixed-width encoding of [`ClickFeatureVector`]s: window stats, per-window
/// tag counts over the fitted tag vocabulary, and device/os/browser one-hots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickFeaturizer {
    pub tags: Vec<String>,
    pub devices: Vec<String>,
    pub oses: Vec<String>,
    pub browsers: Vec<String>,
}

impl ClickFeaturizer {
    pub fn fit(rows: &[ClickFeatureVector]) -> Self {
        let mut tags = std::collections::BTreeSet::new();
        let mut devices = std::collections::BTreeSet::new();
        let mut oses = std::collections::BTreeSet::new();
        let mut browsers = std::collections::BTreeSet::new();
        for r in rows {
            for tc in &r.tag_counts {
                tags.extend(tc.keys().cloned());
            }
            devices.extend(r.device.clone());
            oses.extend(r.os.clone());
            browsers.extend(r.browser.clone());
        }
        Self {
            tags: tags.into_iter().collect(),
            devices: devices.into_iter().collect(),
            oses: oses.into_iter().collect(),
            browsers: browsers.into_iter().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        3 * WindowStats::NAMES.len() + 3 * self.tags.len() + self.devices.len() + self.oses.len() + self.browsers.len()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for w in WINDOWS {
            names.extend(WindowStats::NAMES.iter().map(|n| format!("{w}:{n}")));
        }
        for w in WINDOWS {
            names.extend(self.tags.iter().map(|t| format!("{w}:tag:{t}")));
        }
        names.extend(self.devices.iter().map(|d| format!("device:{d}")));
        names.extend(self.oses.iter().map(|d| format!("os:{d}")));
        names.extend(self.browsers.iter().map(|d| format!("browser:{d}")));
        names
    }

    pub fn vectorize(&self, f: &ClickFeatureVector) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for w in &f.windows {
            v.extend(w.to_array());
        }
        for tc in &f.tag_counts {
            v.extend(self.tags.iter().map(|t| tc.get(t).copied().unwrap_or(0.0)));
        }
        let one_hot = |vocab: &[String], value: &Option<String>, v: &mut Vec<f64>| {
            v.extend(vocab.iter().map(|x| if value.as_deref() == Some(x.as_str()) { 1.0 } else { 0.0 }));
        };
        one_hot(&self.devices, &f.device, &mut v);
        one_hot(&self.oses, &f.os, &mut v);
        one_hot(&self.browsers, &f.browser, &mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(ts: i64, page: &str) -> ClickEvent {
        ClickEvent {
            customer_id: "c".into(),
            timestamp: ts,
            page_name: page.into(),
            page_tags: vec![format!("tag-{page}")],
            dwell_ms: 1000,
            device: "desktop".into(),
            os: "linux".into(),
            browser: "firefox".into(),
            error: false,
            channel: "direct".into(),
            search_phrase: None,
        }
    }

    #[test]
    fn gap_rule_splits_sessions() {
        let events = vec![ev(0, "a"), ev(10, "b"), ev(3610, "c")];
        let s = sessionize(&events, DEFAULT_SESSION_GAP_S);
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(sessionize(&events[..1], 1800).len(), 1);
        assert!(sessionize(&[], 1800).is_empty());
    }

    #[test]
    fn unsorted_input_is_sorted_first() {
        let events = vec![ev(3610, "c"), ev(0, "a"), ev(10, "b")];
        let s = sessionize(&events, 1800);
        assert_eq!(s[0][0].page_name, "a");
        assert_eq!(s[1][0].page_name, "c");
    }

    #[test]
    fn no_events_gives_zero_vector_of_full_width() {
        let f = window_features(&[], 10_000, 10_100, 1800);
        let fz = ClickFeaturizer {
            tags: vec!["x".into(), "y".into()],
            devices: vec!["desktop".into()],
            oses: vec![],
            browsers: vec!["chrome".into()],
        };
        let v = fz.vectorize(&f);
        assert_eq!(v.len(), fz.dim());
        assert_eq!(v.len(), 27 + 6 + 2);
        assert_eq!(fz.names().len(), v.len());
        assert!(v.iter().all(|x| *x == 0.0));
        assert!(!f.has_activity());
    }

    #[test]
    fn repeated_page_run_before_call() {
        let start = 100_000;
        let events = vec![ev(start - 600, "login"), ev(start - 590, "login"), ev(start - 580, "login"), ev(start - 500, "home")];
        let f = window_features(&events, start, start + 300, 1800);
        assert_eq!(f.windows[1].max_repetitive_clicks, 3.0);
        assert_eq!(f.windows[1].mean_repetitive_clicks, 3.0);
        assert_eq!(f.windows[1].n_clicks, 4.0);
        assert_eq!(f.windows[1].n_sessions, 1.0);
        assert_eq!(f.windows[2].n_clicks, 0.0);
        assert_eq!(f.tag_counts[1]["tag-login"], 3.0);
    }

    #[test]
    fn window_boundaries() {
        let (start, end) = (100_000, 100_600);
        let events = vec![ev(start, "at-start"), ev(start - 3600, "hour-edge"), ev(end, "at-end"), ev(end + 3600, "after-edge")];
        let f = window_features(&events, start, end, 1800);
        // at-start excluded from both before windows; hour-edge included in both
        assert_eq!(f.windows[0].n_clicks, 1.0);
        assert_eq!(f.windows[1].n_clicks, 1.0);
        // after window is (end, end+1h]
        assert_eq!(f.windows[2].n_clicks, 1.0);
        assert!(f.tag_counts[2].contains_key("tag-after-edge"));
    }

    proptest! {
        #[test]
        fn sessions_partition_events(ts in prop::collection::vec(0i64..20_000, 0..40), gap in 1i64..3000) {
            let events: Vec<ClickEvent> = ts.iter().map(|&t| ev(t, "p")).collect();
            let sessions = sessionize(&events, gap);
            prop_assert_eq!(sessions.iter().map(Vec::len).sum::<usize>(), events.len());
            for w in sessions.windows(2) {
                let prev_end = w[0].last().unwrap().timestamp;
                prop_assert!(w[1][0].timestamp > prev_end + gap);
            }
            for s in &sessions {
                for p in s.windows(2) {
                    prop_assert!(p[1].timestamp - p[0].timestamp <= gap);
                }
            }
        }
    }
}
