//! Smile candidate extraction from AU12, detector features and scoring.
//!
//! Frame `i` covers `[i / fps, (i + 1) / fps)`, so a run of frames `a..b`
//! becomes the segment `[a / fps, b / fps)`.

mod detector;
mod features;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, VideoBundle};
use crate::learn::LearnError;

pub use detector::{
    build_training_set, detect_smiles, during_au_means, subject_baselines, train_detector,
    train_specificity_filter, SmileDetector, SpecificityFilter, SubjectBaseline, TrainingSet,
};
pub use features::{
    build_feature_vector, feature_group_columns, feature_names, FeatureGroup, SmileFeatureVector,
    FEATURE_COUNT, FEATURE_LAYOUT_VERSION,
};

#[derive(Debug, Error)]
pub enum SmileError {
    #[error("empty series")]
    EmptySeries,
    #[error("invalid extraction parameter: {0}")]
    InvalidParams(String),
    #[error("segment [{start}, {end}) outside video of {duration} s")]
    SegmentOutOfRange { start: f64, end: f64, duration: f64 },
    #[error("model layout {model} does not match feature layout {features}")]
    LayoutMismatch { model: String, features: String },
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("missing channel {channel} in video {video_id}")]
    MissingChannel { channel: String, video_id: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl SmileError {
    pub fn code(&self) -> &'static str {
        match self {
            SmileError::EmptySeries => "EmptySeries",
            SmileError::InvalidParams(_) => "InvalidParams",
            SmileError::SegmentOutOfRange { .. } => "SegmentOutOfRange",
            SmileError::LayoutMismatch { .. } => "LayoutMismatch",
            SmileError::DegenerateLabels => "DegenerateLabels",
            SmileError::MissingChannel { .. } => "MissingChannel",
            SmileError::Learn(e) => e.code(),
            SmileError::Corpus(e) => e.code(),
        }
    }
}

/// Whether runs are merged before or after the minimum-duration filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeOrder {
    #[default]
    MergeThenFilter,
    FilterThenMerge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    pub sigma: f64,
    pub threshold: f64,
    pub min_duration: f64,
    pub merge_gap: f64,
    pub before_window: f64,
    pub after_window: f64,
    pub merge_order: MergeOrder,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            sigma: 0.133,
            threshold: 1.0,
            min_duration: 0.5,
            merge_gap: 0.5,
            before_window: 3.0,
            after_window: 2.0,
            merge_order: MergeOrder::MergeThenFilter,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<(), SmileError> {
        let named = [
            ("sigma", self.sigma),
            ("threshold", self.threshold),
            ("min_duration", self.min_duration),
            ("merge_gap", self.merge_gap),
            ("before_window", self.before_window),
            ("after_window", self.after_window),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SmileError::InvalidParams(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmileSource {
    Candidate,
    Filtered,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileSegment {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub peak_au12: f64,
    pub mean_au12: f64,
    pub source: SmileSource,
    pub probability: Option<f64>,
}

impl SmileSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && self.end > start
    }
}

/// Truncated (±4 SD) Gaussian convolution whose weights are renormalized
/// over the in-range taps, so constants stay constant at the edges.
pub fn gaussian_smooth(series: &[f64], sigma_seconds: f64, fps: f64) -> Result<Vec<f64>, SmileError> {
    if series.is_empty() {
        return Err(SmileError::EmptySeries);
    }
    if !(sigma_seconds > 0.0 && fps > 0.0) {
        return Err(SmileError::InvalidParams(format!("sigma {sigma_seconds}, fps {fps}")));
    }
    let sd = sigma_seconds * fps;
    let radius = (4.0 * sd).floor() as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sd * sd)).exp())
        .collect();
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (j, &v) in series.iter().enumerate().take(hi + 1).skip(lo) {
            let w = kernel[i.abs_diff(j)];
            acc += w * v;
            wsum += w;
        }
        out.push(acc / wsum);
    }
    Ok(out)
}

fn above_runs(values: &[f64], threshold: f64) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..values.len());
    }
    runs
}

fn merge_runs(runs: Vec<Range<usize>>, merge_gap: f64, fps: f64) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::with_capacity(runs.len());
    for r in runs {
        match out.last_mut() {
            Some(last) if ((r.start - last.end) as f64 / fps) < merge_gap => last.end = r.end,
            _ => out.push(r),
        }
    }
    out
}

fn long_enough(r: &Range<usize>, min_duration: f64, fps: f64) -> bool {
    r.len() as f64 / fps >= min_duration
}

/// Frame ranges of smile candidates on an already smoothed series.
pub fn candidate_runs(smoothed: &[f64], params: &ExtractionParams, fps: f64) -> Vec<Range<usize>> {
    let runs = above_runs(smoothed, params.threshold);
    match params.merge_order {
        MergeOrder::MergeThenFilter => merge_runs(runs, params.merge_gap, fps)
            .into_iter()
            .filter(|r| long_enough(r, params.min_duration, fps))
            .collect(),
        MergeOrder::FilterThenMerge => {
            let kept = runs
                .into_iter()
                .filter(|r| long_enough(r, params.min_duration, fps))
                .collect();
            merge_runs(kept, params.merge_gap, fps)
        }
    }
}

/// Smooth AU12, threshold strictly above `params.threshold`, merge close runs
/// and drop short ones. Segments carry an empty `video_id`.
pub fn extract_candidates(
    au12: &[f64],
    params: &ExtractionParams,
    fps: f64,
) -> Result<Vec<SmileSegment>, SmileError> {
    params.validate()?;
    let smoothed = gaussian_smooth(au12, params.sigma, fps)?;
    Ok(candidate_runs(&smoothed, params, fps)
        .into_iter()
        .map(|r| {
            let w = &smoothed[r.clone()];
            SmileSegment {
                video_id: String::new(),
                start: r.start as f64 / fps,
                end: r.end as f64 / fps,
                peak_au12: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mean_au12: w.iter().sum::<f64>() / w.len() as f64,
                source: SmileSource::Candidate,
                probability: None,
            }
        })
        .collect())
}

pub fn extract_video_candidates(
    bundle: &VideoBundle,
    params: &ExtractionParams,
) -> Result<Vec<SmileSegment>, SmileError> {
    let au12 = bundle.au.channel("AU12").ok_or_else(|| SmileError::MissingChannel {
        channel: "AU12".into(),
        video_id: bundle.video_id.clone(),
    })?;
    let mut segs = extract_candidates(au12, params, bundle.fps)?;
    for s in &mut segs {
        s.video_id = bundle.video_id.clone();
    }
    Ok(segs)
}
