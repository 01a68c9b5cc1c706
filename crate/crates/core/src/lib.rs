//! Smile detection over facial Action Unit time series, LLM-assisted
//! narrative annotation of interview transcripts, and the statistics that
//! relate the two.

pub mod analysis;
pub mod corpus;
pub mod learn;
pub mod narrative;
pub mod smile;
pub mod stats;
pub mod synth;

use thiserror::Error;

pub use analysis::AnalysisError;
pub use corpus::{ingest_corpus, Corpus, CorpusError, VideoBundle};
pub use learn::LearnError;
pub use narrative::{NarrativeAnnotation, NarrativeError};
pub use smile::{ExtractionParams, SmileError, SmileSegment};
pub use stats::StatsError;
pub use synth::{SynthConfig, SynthError};

/// Any module error, with a `module.Code` identifier.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Smile(#[from] SmileError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Narrative(#[from] NarrativeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Smile(_) => "smile",
            Error::Learn(_) => "learn",
            Error::Stats(_) => "stats",
            Error::Narrative(_) => "narrative",
            Error::Analysis(_) => "analysis",
            Error::Synth(_) => "synth",
        }
    }

    /// e.g. `analysis.MissingAnnotations`.
    pub fn code(&self) -> String {
        let inner = match self {
            Error::Corpus(e) => e.code(),
            Error::Smile(e) => e.code(),
            Error::Learn(e) => e.code(),
            Error::Stats(e) => e.code(),
            Error::Narrative(e) => e.code(),
            Error::Analysis(e) => e.code(),
            Error::Synth(e) => e.code(),
        };
        format!("{}.{inner}", self.module())
    }
}
