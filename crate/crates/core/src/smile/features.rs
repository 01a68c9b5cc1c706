use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ExtractionParams, SmileError, SmileSegment};
use crate::corpus::{frame_range, AffectComponent, AffectModality, VideoBundle, AU_CODES};

use super::detector::SubjectBaseline;

pub const FEATURE_LAYOUT_VERSION: &str = "au17-vad18-delta17-seg3/v1";

const N_AU: usize = AU_CODES.len();
const WINDOWS: [&str; 3] = ["before", "during", "after"];
const MODALITIES: [AffectModality; 2] = [AffectModality::Audio, AffectModality::Eyegaze];

const RAW: usize = 0;
const Z: usize = RAW + N_AU * 3;
const AFFECT: usize = Z + N_AU * 3;
const DELTA: usize = AFFECT + 2 * 3 * 3;
const SEGMENT: usize = DELTA + N_AU;

/// 51 raw AU means, 51 z-scored AU means, 18 affect means, 17 AU deltas,
/// then duration, peak AU12 and the subject's baseline smile rate.
pub const FEATURE_COUNT: usize = SEGMENT + 3;

/// Named column blocks, used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    AuRaw,
    AuZ,
    AudioAffect,
    EyegazeAffect,
    AuDelta,
    Segment,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::AuRaw,
        FeatureGroup::AuZ,
        FeatureGroup::AudioAffect,
        FeatureGroup::EyegazeAffect,
        FeatureGroup::AuDelta,
        FeatureGroup::Segment,
    ];
}

pub fn feature_group_columns(group: FeatureGroup) -> Range<usize> {
    match group {
        FeatureGroup::AuRaw => RAW..Z,
        FeatureGroup::AuZ => Z..AFFECT,
        FeatureGroup::AudioAffect => AFFECT..AFFECT + 9,
        FeatureGroup::EyegazeAffect => AFFECT + 9..DELTA,
        FeatureGroup::AuDelta => DELTA..SEGMENT,
        FeatureGroup::Segment => SEGMENT..FEATURE_COUNT,
    }
}

pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for kind in ["raw", "z"] {
        for au in AU_CODES {
            for w in WINDOWS {
                names.push(format!("{au}_{w}_{kind}"));
            }
        }
    }
    for m in ["audio", "eyegaze"] {
        for c in AffectComponent::ALL {
            for w in WINDOWS {
                names.push(format!("{m}_{}_{w}", c.name()));
            }
        }
    }
    for au in AU_CODES {
        names.push(format!("{au}_delta_z"));
    }
    names.extend(["duration", "peak_au12", "baseline_smile_rate"].map(String::from));
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileFeatureVector {
    pub layout_version: String,
    pub values: Vec<f64>,
    /// True where the value was imputed as 0 (empty window or absent input).
    pub mask: Vec<bool>,
}

/// Features for one segment. Windows are clipped to the video; empty windows
/// and absent channels or tracks yield 0 with the mask set.
pub fn build_feature_vector(
    segment: &SmileSegment,
    bundle: &VideoBundle,
    baseline: &SubjectBaseline,
    params: &ExtractionParams,
) -> Result<SmileFeatureVector, SmileError> {
    let duration = bundle.duration();
    if !(segment.start >= 0.0 && segment.start < segment.end && segment.end <= duration + 1e-9) {
        return Err(SmileError::SegmentOutOfRange {
            start: segment.start,
            end: segment.end,
            duration,
        });
    }
    let windows = [
        ((segment.start - params.before_window).max(0.0), segment.start),
        (segment.start, segment.end),
        (segment.end, (segment.end + params.after_window).min(duration)),
    ];
    let n = bundle.au.len();
    let frames: Vec<Range<usize>> = windows
        .iter()
        .map(|&(a, b)| if a < b { frame_range(a, b, bundle.fps, n) } else { 0..0 })
        .collect();

    let mut values = vec![0.0; FEATURE_COUNT];
    let mut mask = vec![false; FEATURE_COUNT];
    let mut z_means = [[None::<f64>; 3]; N_AU];
    for (a, code) in AU_CODES.iter().enumerate() {
        let channel = bundle.au.channel(code);
        let stats = baseline.au.get(code);
        for (w, range) in frames.iter().enumerate() {
            let raw = RAW + a * 3 + w;
            let z = Z + a * 3 + w;
            let mean = channel.filter(|_| !range.is_empty()).map(|c| {
                let s = &c[range.clone()];
                s.iter().sum::<f64>() / s.len() as f64
            });
            match mean {
                Some(m) => {
                    values[raw] = m;
                    match stats {
                        Some(st) => {
                            values[z] = st.z(m);
                            z_means[a][w] = Some(values[z]);
                        }
                        None => mask[z] = true,
                    }
                }
                None => {
                    mask[raw] = true;
                    mask[z] = true;
                }
            }
        }
        let d = DELTA + a;
        match (z_means[a][1], z_means[a][0]) {
            (Some(during), Some(before)) => values[d] = during - before,
            _ => mask[d] = true,
        }
    }
    for (mi, modality) in MODALITIES.iter().enumerate() {
        let track = bundle.affect(*modality);
        for (ci, c) in AffectComponent::ALL.iter().enumerate() {
            for (w, &(a, b)) in windows.iter().enumerate() {
                let idx = AFFECT + mi * 9 + ci * 3 + w;
                match track.and_then(|t| t.window_mean(a, b, *c)) {
                    Some(v) => values[idx] = v,
                    None => mask[idx] = true,
                }
            }
        }
    }
    values[SEGMENT] = segment.duration();
    values[SEGMENT + 1] = segment.peak_au12;
    values[SEGMENT + 2] = baseline.smile_rate;
    Ok(SmileFeatureVector {
        layout_version: FEATURE_LAYOUT_VERSION.to_string(),
        values,
        mask,
    })
}
