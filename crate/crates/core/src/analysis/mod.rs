//! Corpus studies over detected smiles and sentence annotations. Every report
//! serializes to JSON and renders its plot points as CSV.

mod alignment;
mod gaze;
mod lemma;
mod rates;
mod timeline;
mod topics;
mod trajectory;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Speaker, TranscriptSentence, VideoBundle};
use crate::smile::SmileSegment;
use crate::stats::StatsError;

pub use alignment::{
    majority_vote, modality_alignment, AlignmentCell, AlignmentReport, HumanValenceLabels,
    ValenceSource,
};
pub use gaze::{
    blink_onsets, blink_rate, gaze_blink_delta, gaze_dynamics, GazeBlinkReport, GazeBlinkRow,
    Stratum,
};
pub use lemma::lemmatize;
pub use rates::{structure_syntax_rate_change, CategoryChange, Facet, RateChangeReport};
pub use timeline::{smile_rate_timeline, TimelineBin, TimelineReport};
pub use topics::{topic_smile_delta, TopicDelta, TopicDeltaReport, TopicOptions};
pub use trajectory::{
    valence_trajectories, OffsetPoint, TrajectoryOptions, TrajectoryReport, TrajectorySeries,
    TrajectoryStats, OFFSETS,
};

/// Smiles per video id, each list sorted by start.
pub type SmileIndex = BTreeMap<String, Vec<SmileSegment>>;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("corpus has no videos")]
    EmptyCorpus,
    #[error("video {0} has no sentence annotations")]
    MissingAnnotations(String),
    #[error("video {video} lacks the {modality} track")]
    MissingModality { video: String, modality: String },
    #[error("video {0} has no gaze track")]
    MissingGaze(String),
    #[error("item {video_id}#{index} has no rater labels")]
    NoMajorityPossible { video_id: String, index: u64 },
    #[error("unknown facet {0:?}; expected structure or syntax")]
    UnknownFacet(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl AnalysisError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalysisError::EmptyCorpus => "EmptyCorpus",
            AnalysisError::MissingAnnotations(_) => "MissingAnnotations",
            AnalysisError::MissingModality { .. } => "MissingModality",
            AnalysisError::MissingGaze(_) => "MissingGaze",
            AnalysisError::NoMajorityPossible { .. } => "NoMajorityPossible",
            AnalysisError::UnknownFacet(_) => "UnknownFacet",
            AnalysisError::InvalidParameter(_) => "InvalidParameter",
            AnalysisError::Stats(e) => e.code(),
        }
    }
}

/// When a smile counts as falling on a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapRule {
    /// Any temporal overlap of the two intervals.
    #[default]
    Any,
    /// The smile's midpoint lies inside the sentence.
    Midpoint,
}

impl OverlapRule {
    pub fn hits(self, smile: &SmileSegment, start: f64, end: f64) -> bool {
        match self {
            OverlapRule::Any => smile.start < end && smile.end > start,
            OverlapRule::Midpoint => {
                let m = 0.5 * (smile.start + smile.end);
                m >= start && m < end
            }
        }
    }
}

/// Reports that render as plot-point CSV.
pub trait PlotPoints {
    /// Figure the points correspond to.
    fn figure_id(&self) -> &'static str;
    fn csv_header(&self) -> Vec<&'static str>;
    fn csv_rows(&self) -> Vec<Vec<String>>;

    /// CSV with a `# figure: <id>` first line.
    fn to_csv(&self) -> String {
        let mut out = format!("# figure: {}\n", self.figure_id());
        out.push_str(&self.csv_header().join(","));
        out.push('\n');
        for row in self.csv_rows() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn subject_sentences(bundle: &VideoBundle) -> Vec<&TranscriptSentence> {
    bundle
        .transcript
        .iter()
        .filter(|s| s.speaker == Speaker::Subject)
        .collect()
}

pub(crate) fn require_annotations(bundle: &VideoBundle) -> Result<(), AnalysisError> {
    if bundle.has_annotations() {
        Ok(())
    } else {
        Err(AnalysisError::MissingAnnotations(bundle.video_id.clone()))
    }
}

pub(crate) fn smiles_of<'a>(smiles: &'a SmileIndex, video_id: &str) -> &'a [SmileSegment] {
    smiles.get(video_id).map(Vec::as_slice).unwrap_or(&[])
}

/// Position of the sentence the smile overlaps longest, earliest on ties.
pub(crate) fn center_position(sentences: &[&TranscriptSentence], smile: &SmileSegment) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (pos, s) in sentences.iter().enumerate() {
        let ov = s.end.min(smile.end) - s.start.max(smile.start);
        if ov > 0.0 && best.is_none_or(|(_, b)| ov > b) {
            best = Some((pos, ov));
        }
    }
    best.map(|(p, _)| p)
}

/// Length of the union of intervals after clipping to `[lo, hi]`.
pub(crate) fn union_measure(mut intervals: Vec<(f64, f64)>, lo: f64, hi: f64) -> f64 {
    intervals.retain(|(a, b)| b > a);
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in intervals {
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            continue;
        }
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = cur {
        total += cb - ca;
    }
    total
}
