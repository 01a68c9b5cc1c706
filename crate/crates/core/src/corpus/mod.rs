//! Corpus data model: per-video Action Unit tracks, transcripts, affect and
//! gaze tracks, plus the ingestion and slicing machinery shared by every
//! analysis.
//!
//! All time intervals are half-open `[start, end)` in seconds. Frame `i` of a
//! video sits at `i / fps` seconds and the video lasts `frames / fps`.

mod io;
mod window;
mod zscore;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::narrative::NarrativeAnnotation;

pub use io::{
    ingest_corpus, ingest_video_bundle, load_manifest, write_affect_csv, write_au_csv,
    write_gaze_csv, write_manifest, write_transcript_jsonl, BundlePaths, FormatConfig,
    LinearRescale, Manifest, ManifestEntry,
};
pub use window::{frame_range, slice_window, WindowView};
pub use zscore::{per_subject_au_stats, ChannelStats, PerSubjectAuStats};

/// The 17 intensity-coded Action Units produced by the upstream extractor.
pub const AU_CODES: [&str; 17] = [
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12", "AU14", "AU15",
    "AU17", "AU20", "AU23", "AU25", "AU26", "AU45",
];

/// Channels every downstream operation depends on.
pub const REQUIRED_CHANNELS: [&str; 2] = ["AU12", "AU06"];

/// Upper bound of the AU intensity scale.
pub const AU_MAX_INTENSITY: f64 = 5.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required channel {channel} in {path}")]
    MissingChannel { channel: String, path: String },
    #[error("malformed row in {path} at line {line}: {reason}")]
    MalformedRow {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("misaligned duration in {path}: {reason}")]
    MisalignedDuration { path: String, reason: String },
    #[error("invalid window [{t0}, {t1}) for a video of {duration} s")]
    InvalidWindow { t0: f64, t1: f64, duration: f64 },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid manifest {path}: {reason}")]
    InvalidManifest { path: String, reason: String },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "Io",
            CorpusError::MissingChannel { .. } => "MissingChannel",
            CorpusError::MalformedRow { .. } => "MalformedRow",
            CorpusError::MisalignedDuration { .. } => "MisalignedDuration",
            CorpusError::InvalidWindow { .. } => "InvalidWindow",
            CorpusError::EmptyInput(_) => "EmptyInput",
            CorpusError::InvalidManifest { .. } => "InvalidManifest",
        }
    }
}

/// Frame-indexed AU intensities plus the binary AU45 blink channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AuFrameSeries {
    /// Channel codes (`AU12`, ...), parallel to `intensities`.
    pub codes: Vec<String>,
    /// One intensity vector per channel, each `timestamps.len()` long.
    pub intensities: Vec<Vec<f64>>,
    /// Upstream frame numbers as read from the file.
    pub frame_numbers: Vec<u64>,
    pub timestamps: Vec<f64>,
    /// AU45 presence per frame, when the file carries `AU45_c`.
    pub blink: Option<Vec<u8>>,
}

impl AuFrameSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel(&self, code: &str) -> Option<&[f64]> {
        self.codes
            .iter()
            .position(|c| c == code)
            .map(|i| self.intensities[i].as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Subject,
    Interviewer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordOnset {
    pub word: String,
    pub onset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptSentence {
    pub index: u64,
    pub start: f64,
    pub end: f64,
    pub speaker: Speaker,
    pub text: String,
    pub word_onsets: Vec<WordOnset>,
    /// True when the file carried no onsets and they were spread evenly
    /// across the sentence interval.
    pub onsets_interpolated: bool,
    pub annotation: Option<NarrativeAnnotation>,
}

impl TranscriptSentence {
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && self.end > start
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Spread words evenly over `[start, end)`.
pub fn interpolate_onsets(text: &str, start: f64, end: f64) -> Vec<WordOnset> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let n = words.len().max(1) as f64;
    words
        .iter()
        .enumerate()
        .map(|(k, w)| WordOnset {
            word: (*w).to_string(),
            onset: start + (end - start) * k as f64 / n,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffectModality {
    Audio,
    Eyegaze,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectSample {
    pub time: f64,
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl AffectSample {
    pub fn component(&self, c: AffectComponent) -> f64 {
        match c {
            AffectComponent::Valence => self.valence,
            AffectComponent::Arousal => self.arousal,
            AffectComponent::Dominance => self.dominance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AffectComponent {
    Valence,
    Arousal,
    Dominance,
}

impl AffectComponent {
    pub const ALL: [AffectComponent; 3] = [
        AffectComponent::Valence,
        AffectComponent::Arousal,
        AffectComponent::Dominance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AffectComponent::Valence => "valence",
            AffectComponent::Arousal => "arousal",
            AffectComponent::Dominance => "dominance",
        }
    }
}

/// Valence/arousal/dominance over time from one modality, values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffectTrack {
    pub modality: AffectModality,
    pub samples: Vec<AffectSample>,
}

impl AffectTrack {
    /// Samples with `t0 <= time < t1`.
    pub fn window(&self, t0: f64, t1: f64) -> &[AffectSample] {
        let lo = self.samples.partition_point(|s| s.time < t0);
        let hi = self.samples.partition_point(|s| s.time < t1);
        &self.samples[lo..hi.max(lo)]
    }

    /// Mean of one component over `[t0, t1)`, `None` when no sample falls inside.
    pub fn window_mean(&self, t0: f64, t1: f64, c: AffectComponent) -> Option<f64> {
        let w = self.window(t0, t1);
        if w.is_empty() {
            return None;
        }
        Some(w.iter().map(|s| s.component(c)).sum::<f64>() / w.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub time: f64,
    pub left_yaw: f64,
    pub left_pitch: f64,
    pub right_yaw: f64,
    pub right_pitch: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeTrack {
    pub samples: Vec<GazeSample>,
}

impl GazeTrack {
    pub fn window(&self, t0: f64, t1: f64) -> &[GazeSample] {
        let lo = self.samples.partition_point(|s| s.time < t0);
        let hi = self.samples.partition_point(|s| s.time < t1);
        &self.samples[lo..hi.max(lo)]
    }
}

/// One interview tape with every aligned modality.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoBundle {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub au: AuFrameSeries,
    pub transcript: Vec<TranscriptSentence>,
    pub audio_affect: AffectTrack,
    pub gaze_affect: Option<AffectTrack>,
    pub gaze: Option<GazeTrack>,
}

impl VideoBundle {
    pub fn duration(&self) -> f64 {
        self.au.len() as f64 / self.fps
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    pub fn affect(&self, modality: AffectModality) -> Option<&AffectTrack> {
        match modality {
            AffectModality::Audio => Some(&self.audio_affect),
            AffectModality::Eyegaze => self.gaze_affect.as_ref(),
        }
    }

    pub fn has_annotations(&self) -> bool {
        self.transcript.iter().any(|s| s.annotation.is_some())
    }
}

/// A set of videos in manifest order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub videos: Vec<VideoBundle>,
}

impl Corpus {
    pub fn new(videos: Vec<VideoBundle>) -> Self {
        Self { videos }
    }

    /// Subject ids in first-appearance order.
    pub fn subject_ids(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for v in &self.videos {
            if !seen.contains(&v.subject_id.as_str()) {
                seen.push(v.subject_id.as_str());
            }
        }
        seen
    }

    /// Videos of one subject, in manifest order.
    pub fn subject_videos<'a>(&'a self, subject: &'a str) -> impl Iterator<Item = &'a VideoBundle> {
        self.videos.iter().filter(move |v| v.subject_id == subject)
    }

    /// Subjects sorted by id, each with its videos sorted by id. Analyses that
    /// must not depend on manifest order iterate this view.
    pub fn by_subject_sorted(&self) -> Vec<(&str, Vec<&VideoBundle>)> {
        let mut map: std::collections::BTreeMap<&str, Vec<&VideoBundle>> = Default::default();
        for v in &self.videos {
            map.entry(v.subject_id.as_str()).or_default().push(v);
        }
        map.into_iter()
            .map(|(s, mut vs)| {
                vs.sort_by(|a, b| a.video_id.cmp(&b.video_id));
                (s, vs)
            })
            .collect()
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoBundle> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn has_annotations(&self) -> bool {
        self.videos.iter().any(|v| v.has_annotations())
    }
}
