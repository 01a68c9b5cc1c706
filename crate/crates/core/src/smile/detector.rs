use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_feature_vector, extract_video_candidates, ExtractionParams, SmileError, SmileSegment,
    SmileSource, FEATURE_COUNT, FEATURE_LAYOUT_VERSION,
};
use crate::corpus::{frame_range, per_subject_au_stats, Corpus, PerSubjectAuStats, VideoBundle, AU_CODES};
use crate::learn::{kfold_cv, specificity_threshold, threshold_serde, CvOptions, CvReport, ScaledLogistic};

/// Per-subject normalizers and candidate rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectBaseline {
    pub au: PerSubjectAuStats,
    /// Smile candidates per minute over all of the subject's videos.
    pub smile_rate: f64,
}

pub fn subject_baselines(
    corpus: &Corpus,
    params: &ExtractionParams,
) -> Result<BTreeMap<String, SubjectBaseline>, SmileError> {
    corpus
        .by_subject_sorted()
        .into_par_iter()
        .map(|(subject, videos)| {
            let au = per_subject_au_stats(&videos)?;
            let mut count = 0usize;
            let mut seconds = 0.0;
            for v in &videos {
                count += extract_video_candidates(v, params)?.len();
                seconds += v.duration();
            }
            let smile_rate = if seconds > 0.0 { count as f64 / (seconds / 60.0) } else { 0.0 };
            Ok((subject.to_string(), SubjectBaseline { au, smile_rate }))
        })
        .collect()
}

/// Candidate features with labels, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub y: Vec<bool>,
    /// Subject of each row.
    pub groups: Vec<String>,
    pub segments: Vec<SmileSegment>,
}

/// Extract candidates from every video and label each with `label_of`.
pub fn build_training_set<F>(
    corpus: &Corpus,
    params: &ExtractionParams,
    baselines: &BTreeMap<String, SubjectBaseline>,
    label_of: F,
) -> Result<TrainingSet, SmileError>
where
    F: Fn(&SmileSegment) -> bool + Sync,
{
    let per_video: Vec<Vec<(SmileSegment, Vec<f64>, bool, String)>> = corpus
        .videos
        .par_iter()
        .map(|v| {
            let baseline = &baselines[&v.subject_id];
            extract_video_candidates(v, params)?
                .into_iter()
                .map(|s| {
                    let f = build_feature_vector(&s, v, baseline, params)?;
                    let y = label_of(&s);
                    Ok((s, f.values, y, v.subject_id.clone()))
                })
                .collect()
        })
        .collect::<Result<_, SmileError>>()?;
    let rows: Vec<_> = per_video.into_iter().flatten().collect();
    let mut x = Array2::zeros((rows.len(), FEATURE_COUNT));
    let mut y = Vec::with_capacity(rows.len());
    let mut groups = Vec::with_capacity(rows.len());
    let mut segments = Vec::with_capacity(rows.len());
    for (i, (s, f, l, g)) in rows.into_iter().enumerate() {
        x.row_mut(i).assign(&ArrayView1::from(&f));
        y.push(l);
        groups.push(g);
        segments.push(s);
    }
    Ok(TrainingSet { x, y, groups, segments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileDetector {
    pub layout_version: String,
    pub params: ExtractionParams,
    pub classifier: ScaledLogistic,
    /// F1-optimal threshold from cross-validation.
    #[serde(with = "threshold_serde")]
    pub theta: f64,
}

/// Cross-validate, then refit on all rows. With `group_by_subject`, folds
/// never split a subject.
pub fn train_detector(
    set: &TrainingSet,
    params: &ExtractionParams,
    k: usize,
    group_by_subject: bool,
    opts: CvOptions,
) -> Result<(SmileDetector, CvReport), SmileError> {
    if set.y.iter().all(|&v| v) || set.y.iter().all(|&v| !v) {
        return Err(SmileError::DegenerateLabels);
    }
    let groups = group_by_subject.then_some(set.groups.as_slice());
    let report = kfold_cv(set.x.view(), &set.y, k, groups, opts)?;
    let mut classifier = ScaledLogistic::fit(set.x.view(), &set.y, opts.l2)?;
    classifier.model.feature_layout_version = FEATURE_LAYOUT_VERSION.to_string();
    Ok((
        SmileDetector {
            layout_version: FEATURE_LAYOUT_VERSION.to_string(),
            params: *params,
            classifier,
            theta: report.threshold.theta,
        },
        report,
    ))
}

/// Candidates of one video whose detector probability is at least `theta`.
pub fn detect_smiles(
    bundle: &VideoBundle,
    detector: &SmileDetector,
    baseline: &SubjectBaseline,
    theta: f64,
) -> Result<Vec<SmileSegment>, SmileError> {
    if detector.layout_version != FEATURE_LAYOUT_VERSION
        || detector.classifier.model.weights.len() != FEATURE_COUNT
    {
        return Err(SmileError::LayoutMismatch {
            model: detector.layout_version.clone(),
            features: FEATURE_LAYOUT_VERSION.to_string(),
        });
    }
    let mut out = Vec::new();
    for mut s in extract_video_candidates(bundle, &detector.params)? {
        let f = build_feature_vector(&s, bundle, baseline, &detector.params)?;
        let p = detector.classifier.predict(ArrayView1::from(&f.values));
        if p >= theta {
            s.source = SmileSource::Detected;
            s.probability = Some(p);
            out.push(s);
        }
    }
    Ok(out)
}

/// Mean of each canonical AU over the segment, 0 for absent channels.
pub fn during_au_means(segment: &SmileSegment, bundle: &VideoBundle) -> Vec<f64> {
    let r = frame_range(segment.start, segment.end, bundle.fps, bundle.au.len());
    AU_CODES
        .iter()
        .map(|code| match bundle.au.channel(code) {
            Some(c) if !r.is_empty() => c[r.clone()].iter().sum::<f64>() / r.len() as f64,
            _ => 0.0,
        })
        .collect()
}

/// Logistic screen over during-window AU means with a threshold set for a
/// target specificity on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificityFilter {
    pub classifier: ScaledLogistic,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub specificity: f64,
}

impl SpecificityFilter {
    pub fn passes(&self, during_means: &[f64]) -> bool {
        self.classifier.predict(ArrayView1::from(during_means)) >= self.threshold
    }
}

pub fn train_specificity_filter(
    x: ArrayView2<f64>,
    labels: &[bool],
    target_specificity: f64,
    l2: f64,
) -> Result<SpecificityFilter, SmileError> {
    if labels.iter().all(|&v| v) || labels.iter().all(|&v| !v) {
        return Err(SmileError::DegenerateLabels);
    }
    let classifier = ScaledLogistic::fit(x, labels, l2)?;
    let scores = classifier.predict_all(x);
    let (threshold, specificity) = specificity_threshold(&scores, labels, target_specificity)?;
    Ok(SpecificityFilter {
        classifier,
        threshold,
        specificity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn filter_hits_target_specificity() {
        let x = array![[0.0], [0.1], [0.2], [0.3], [1.0], [1.1], [0.25], [0.9]];
        let y = [false, false, false, false, true, true, true, false];
        let f = train_specificity_filter(x.view(), &y, 0.75, 1.0).unwrap();
        assert!(f.specificity >= 0.75);
        let negatives_rejected = (0..8)
            .filter(|&i| !y[i] && !f.passes(&[x[[i, 0]]]))
            .count();
        assert_eq!(negatives_rejected as f64 / 5.0, f.specificity);
        let all = train_specificity_filter(x.view(), &y, 0.0, 1.0).unwrap();
        assert!((0..8).all(|i| all.passes(&[x[[i, 0]]])));
        assert!(matches!(
            train_specificity_filter(x.view(), &[true; 8], 0.5, 1.0),
            Err(SmileError::DegenerateLabels)
        ));
    }
}
