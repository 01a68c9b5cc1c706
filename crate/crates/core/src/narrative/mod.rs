//! Sentence-level narrative features produced through a chat-completion
//! endpoint, with closed-vocabulary validation, a response cache and a
//! resumable batch runner.

mod annotate;
mod context;
mod endpoint;
pub mod mock;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{
    annotate_corpus, annotate_sentence, AnnotateOptions, AnnotateSummary, AnnotationCache,
    AnnotationOutcome, AnnotationRow, CacheKey, ErrorRow, attach_annotations, load_annotation_rows,
};
pub use context::{build_context, AnnotationRequest, ContextSentence, ContextWindow};
pub use endpoint::{
    ChatEndpoint, ChatMessage, ChatRequest, EndpointConfig, EndpointError, HttpChatEndpoint,
};
pub use prompt::{parse_prosodic, PromptTemplate, ProsodicScores};

#[derive(Debug, Error)]
pub enum NarrativeError {
    #[error("endpoint error: {0}")]
    Endpoint(EndpointError),
    #[error("endpoint timed out")]
    Timeout,
    #[error("schema violation after {attempts} attempts: {reason}")]
    SchemaViolation { attempts: u32, reason: String },
    #[error("sentence index {index} out of range (transcript has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed store line {line} in {path}: {reason}")]
    MalformedStore {
        path: String,
        line: usize,
        reason: String,
    },
}

impl NarrativeError {
    pub fn code(&self) -> &'static str {
        match self {
            NarrativeError::Endpoint(_) => "EndpointError",
            NarrativeError::Timeout => "Timeout",
            NarrativeError::SchemaViolation { .. } => "SchemaViolation",
            NarrativeError::IndexOutOfRange { .. } => "IndexOutOfRange",
            NarrativeError::OutOfRange(_) => "OutOfRange",
            NarrativeError::UnknownTemplate(_) => "UnknownTemplate",
            NarrativeError::Io { .. } => "Io",
            NarrativeError::MalformedStore { .. } => "MalformedStore",
        }
    }
}

impl From<EndpointError> for NarrativeError {
    fn from(e: EndpointError) -> Self {
        match e {
            EndpointError::Timeout => NarrativeError::Timeout,
            other => NarrativeError::Endpoint(other),
        }
    }
}

macro_rules! closed_vocab {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

closed_vocab!(Era {
    PreWar => "pre-war",
    WartimeCamp => "wartime-camp",
    Liberation => "liberation",
    PostWar => "post-war",
    PresentDay => "present-day",
    Other => "other",
});

closed_vocab!(TemporalSyntax {
    StrictPast => "strict-past",
    HabitualPast => "habitual-past",
    PresentNarration => "present-narration",
    PresentReflection => "present-reflection",
});

closed_vocab!(
    /// Simplified oral-narrative role of a sentence.
    Structure {
        Orientation => "orientation",
        ComplicatingAction => "complicating-action",
        Evaluation => "evaluation",
        ResolutionCoda => "resolution-coda",
        Other => "other",
    }
);

closed_vocab!(Topic {
    Parents => "parents",
    Captivity => "captivity",
    DailyLifeChildhood => "daily-life-childhood",
    DailyLifeImprisonment => "daily-life-imprisonment",
    FeelingsAndThoughts => "feelings-and-thoughts",
    ForcedLabor => "forced-labor",
    Government => "government",
    Health => "health",
    Liberation => "liberation",
    PostConflict => "post-conflict",
    RefugeeExperiences => "refugee-experiences",
});

closed_vocab!(Recall {
    External => "external",
    Internal => "internal",
});

closed_vocab!(Valence {
    Positive => "positive",
    Neutral => "neutral",
    Negative => "negative",
});

impl Valence {
    pub fn score(self) -> f64 {
        match self {
            Valence::Positive => 1.0,
            Valence::Neutral => 0.0,
            Valence::Negative => -1.0,
        }
    }

    pub fn swap(self) -> Valence {
        match self {
            Valence::Positive => Valence::Negative,
            Valence::Neutral => Valence::Neutral,
            Valence::Negative => Valence::Positive,
        }
    }
}

/// The seven per-sentence narrative features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrativeAnnotation {
    pub era: Era,
    pub temporal_syntax: TemporalSyntax,
    pub structure: Structure,
    pub topics: Vec<Topic>,
    pub recall: Recall,
    pub narrative_valence: Valence,
    pub present_valence: Valence,
}

impl NarrativeAnnotation {
    pub fn valence(&self, kind: ValenceType) -> Valence {
        match kind {
            ValenceType::Narrative => self.narrative_valence,
            ValenceType::Present => self.present_valence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValenceType {
    Narrative,
    Present,
}

/// Parse a model reply into an annotation, enforcing the closed vocabularies.
/// Tolerates surrounding whitespace and a single markdown code fence.
pub fn parse_annotation(reply: &str) -> Result<NarrativeAnnotation, String> {
    let body = strip_fence(reply);
    let ann: NarrativeAnnotation = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let mut seen = std::collections::HashSet::new();
    for t in &ann.topics {
        if !seen.insert(*t) {
            return Err(format!("topic {t} listed twice"));
        }
    }
    Ok(ann)
}

pub(crate) fn strip_fence(reply: &str) -> &str {
    let t = reply.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        if let Some(inner) = rest.trim_end().strip_suffix("```") {
            return inner.trim();
        }
    }
    t
}

/// Default half-width of the neutral band.
pub const DEFAULT_VALENCE_BAND: f64 = 0.15;

/// Map a continuous valence in `[-1, 1]` onto three labels with a symmetric
/// neutral band `[-band, band]`.
pub fn discretize_valence(v: f64, band: f64) -> Result<Valence, NarrativeError> {
    if !(0.0..1.0).contains(&band) {
        return Err(NarrativeError::OutOfRange(format!("band {band} not in [0, 1)")));
    }
    if !(-1.0..=1.0).contains(&v) {
        return Err(NarrativeError::OutOfRange(format!("valence {v} not in [-1, 1]")));
    }
    Ok(if v < -band {
        Valence::Negative
    } else if v > band {
        Valence::Positive
    } else {
        Valence::Neutral
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_json() -> serde_json::Value {
        serde_json::json!({
            "era": "wartime-camp",
            "temporal_syntax": "strict-past",
            "structure": "evaluation",
            "topics": ["captivity", "health"],
            "recall": "internal",
            "narrative_valence": "negative",
            "present_valence": "neutral"
        })
    }

    #[test]
    fn parses_valid_reply() {
        let a = parse_annotation(&sample_json().to_string()).unwrap();
        assert_eq!(a.era, Era::WartimeCamp);
        assert_eq!(a.topics, vec![Topic::Captivity, Topic::Health]);
        let fenced = format!("```json\n{}\n```", sample_json());
        assert_eq!(parse_annotation(&fenced).unwrap(), a);
    }

    #[test]
    fn rejects_out_of_vocabulary_era() {
        let mut v = sample_json();
        v["era"] = "medieval".into();
        assert!(parse_annotation(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_extra_and_missing_fields() {
        let mut v = sample_json();
        v["mood"] = "x".into();
        assert!(parse_annotation(&v.to_string()).is_err());
        let mut v = sample_json();
        v.as_object_mut().unwrap().remove("recall");
        assert!(parse_annotation(&v.to_string()).is_err());
        let mut v = sample_json();
        v["topics"] = serde_json::json!(["health", "health"]);
        assert!(parse_annotation(&v.to_string()).is_err());
    }

    #[test]
    fn empty_topics_allowed() {
        let mut v = sample_json();
        v["topics"] = serde_json::json!([]);
        assert!(parse_annotation(&v.to_string()).unwrap().topics.is_empty());
    }

    #[test]
    fn discretize_examples() {
        for band in [0.01, 0.15, 0.5, 0.99] {
            assert_eq!(discretize_valence(0.0, band).unwrap(), Valence::Neutral);
        }
        assert_eq!(discretize_valence(-0.2, 0.15).unwrap(), Valence::Negative);
        assert_eq!(discretize_valence(0.0, 0.0).unwrap(), Valence::Neutral);
        assert_eq!(discretize_valence(1e-12, 0.0).unwrap(), Valence::Positive);
        assert_eq!(discretize_valence(-1e-12, 0.0).unwrap(), Valence::Negative);
        assert_eq!(discretize_valence(0.15, 0.15).unwrap(), Valence::Neutral);
        assert!(discretize_valence(1.5, 0.15).is_err());
        assert!(discretize_valence(0.0, 1.0).is_err());
        assert!(discretize_valence(0.0, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn discretize_is_odd(v in -1.0f64..=1.0, band in 0.0f64..0.99) {
            let a = discretize_valence(v, band).unwrap();
            let b = discretize_valence(-v, band).unwrap();
            prop_assert_eq!(b, a.swap());
        }
    }
}
