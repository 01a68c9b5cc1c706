//! In-process stand-in for a chat endpoint, used by tests and `--mock` runs.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{
    ChatEndpoint, ChatRequest, EndpointError, Era, NarrativeAnnotation, Recall, Structure,
    TemporalSyntax, Topic, Valence,
};

/// Deterministic mock: replies are a pure function of the marked target
/// sentence unless a fixture overrides them.
#[derive(Default)]
pub struct MockEndpoint {
    model: String,
    fixed: HashMap<String, NarrativeAnnotation>,
    fail_targets: HashSet<String>,
    malformed_first: usize,
    calls: AtomicUsize,
    per_target: Mutex<HashMap<String, usize>>,
}

impl MockEndpoint {
    pub fn new() -> Self {
        Self {
            model: "mock-annotator".into(),
            ..Default::default()
        }
    }

    /// Reply with `annotation` whenever `target_text` is the marked sentence.
    pub fn with_fixed(mut self, target_text: impl Into<String>, annotation: NarrativeAnnotation) -> Self {
        self.fixed.insert(target_text.into(), annotation);
        self
    }

    /// Return HTTP 500 for these target sentences.
    pub fn failing_on(mut self, targets: impl IntoIterator<Item = String>) -> Self {
        self.fail_targets.extend(targets);
        self
    }

    /// The first `n` calls for every target get an out-of-vocabulary reply.
    pub fn malformed_first(mut self, n: usize) -> Self {
        self.malformed_first = n;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Calls per target sentence so far.
    pub fn calls_by_target(&self) -> HashMap<String, usize> {
        self.per_target.lock().unwrap().clone()
    }
}

/// Text of the sentence wrapped in `>>> <<<`, without its speaker tag.
pub fn marked_target(user_text: &str) -> Option<&str> {
    let line = user_text
        .lines()
        .find(|l| l.starts_with(">>> ") && l.ends_with(" <<<"))?;
    let inner = &line[4..line.len() - 4];
    Some(match inner.split_once("] ") {
        Some((_, text)) if inner.starts_with('[') => text,
        _ => inner,
    })
}

/// Annotation derived from a hash of `text`.
pub fn hashed_annotation(text: &str) -> NarrativeAnnotation {
    let h = Sha256::digest(text.as_bytes());
    let pick = |i: usize, n: usize| h[i] as usize % n;
    let mut topics: Vec<Topic> = Topic::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| h[8 + i] % 5 == 0)
        .map(|(_, t)| *t)
        .collect();
    topics.sort();
    NarrativeAnnotation {
        era: Era::ALL[pick(0, Era::ALL.len())],
        temporal_syntax: TemporalSyntax::ALL[pick(1, TemporalSyntax::ALL.len())],
        structure: Structure::ALL[pick(2, Structure::ALL.len())],
        topics,
        recall: Recall::ALL[pick(3, Recall::ALL.len())],
        narrative_valence: Valence::ALL[pick(4, 3)],
        present_valence: Valence::ALL[pick(5, 3)],
    }
}

impl ChatEndpoint for MockEndpoint {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let target = marked_target(request.user_text())
            .ok_or_else(|| EndpointError::Status {
                status: 400,
                body: "no marked target".into(),
            })?
            .to_string();
        let attempt = {
            let mut map = self.per_target.lock().unwrap();
            let n = map.entry(target.clone()).or_insert(0);
            *n += 1;
            *n
        };
        if self.fail_targets.contains(&target) {
            return Err(EndpointError::Status {
                status: 500,
                body: "mock failure".into(),
            });
        }
        if attempt <= self.malformed_first {
            return Ok(r#"{"era":"medieval"}"#.into());
        }
        let ann = self
            .fixed
            .get(&target)
            .cloned()
            .unwrap_or_else(|| hashed_annotation(&target));
        Ok(serde_json::to_string(&ann).expect("annotation serializes"))
    }

    fn model(&self) -> &str {
        &self.model
    }
}
