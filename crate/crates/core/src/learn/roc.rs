use serde::{Deserialize, Serialize};

use super::LearnError;

/// Serialize thresholds so that `±inf` survive JSON as `"inf"` / `"-inf"`.
pub mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad threshold {other}"))),
            },
        }
    }
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), LearnError> {
    if scores.len() != labels.len() {
        return Err(LearnError::DimensionMismatch {
            rows: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(LearnError::NonFiniteFeature { row: i, col: 0 });
    }
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(LearnError::SingleClass);
    }
    Ok((p, n))
}

/// Area under the ROC curve from the Mann-Whitney rank sum, ties counting 1/2.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, LearnError> {
    let (p, n) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block i..=j
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let (p, n) = (p as f64, n as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
}

/// Confusion counts at every candidate threshold, ascending in θ. Candidates
/// are `-inf`, the midpoints of consecutive distinct scores, and `+inf`;
/// a sample is predicted positive iff `score >= θ`.
fn sweep(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    let mut out = vec![(f64::NEG_INFINITY, p, n)];
    let (mut tp, mut fp) = (p, n);
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        let theta = if i < pairs.len() {
            s + (pairs[i].0 - s) / 2.0
        } else {
            f64::INFINITY
        };
        out.push((theta, tp, fp));
    }
    out
}

/// ROC points ordered from (1,1) down to (0,0).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, LearnError> {
    let (p, n) = check(scores, labels)?;
    Ok(sweep(scores, labels)
        .into_iter()
        .map(|(threshold, tp, fp)| RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "threshold_serde")]
    pub theta: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

pub(crate) fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    (f1, precision, recall)
}

/// Threshold maximizing F1; the lowest such θ wins ties.
pub fn f1_optimal_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice, LearnError> {
    let (p, _) = check(scores, labels)?;
    let mut best: Option<ThresholdChoice> = None;
    for (theta, tp, fp) in sweep(scores, labels) {
        let (f1, precision, recall) = prf(tp, fp, p - tp);
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(ThresholdChoice {
                theta,
                f1,
                precision,
                recall,
            });
        }
    }
    Ok(best.expect("sweep is never empty"))
}

/// Precision, recall and F1 when predicting positive iff `score >= theta`.
pub fn scores_at(scores: &[f64], labels: &[bool], theta: f64) -> ThresholdChoice {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= theta, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let (f1, precision, recall) = prf(tp, fp, fn_);
    ThresholdChoice {
        theta,
        f1,
        precision,
        recall,
    }
}

/// Threshold whose specificity is the smallest value still `>= target`; the
/// lowest θ among those. Returns `(theta, achieved specificity)`.
pub fn specificity_threshold(
    scores: &[f64],
    labels: &[bool],
    target: f64,
) -> Result<(f64, f64), LearnError> {
    let (_, n) = check(scores, labels)?;
    if !(0.0..=1.0).contains(&target) {
        return Err(LearnError::InvalidParameter(format!("specificity target {target}")));
    }
    let mut best: Option<(f64, f64)> = None;
    for (theta, _, fp) in sweep(scores, labels) {
        let spec = (n - fp) as f64 / n as f64;
        if spec + 1e-12 >= target && best.is_none_or(|(_, s)| spec < s) {
            best = Some((theta, spec));
        }
    }
    Ok(best.expect("+inf threshold reaches specificity 1"))
}
