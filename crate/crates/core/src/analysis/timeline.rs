use serde::{Deserialize, Serialize};

use super::{smiles_of, AnalysisError, PlotPoints, SmileIndex};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBin {
    /// Bin bounds in normalized interview time.
    pub start: f64,
    pub end: f64,
    /// Cross-subject mean of smiles per minute.
    pub mean_rate: f64,
    /// Sample SD across subjects, 0 with a single subject.
    pub sd_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    pub n_subjects: usize,
    pub bins: Vec<TimelineBin>,
    /// Per-subject rates, `rates[subject][bin]`, subjects in sorted order.
    pub subject_ids: Vec<String>,
    pub rates: Vec<Vec<f64>>,
}

/// Smile rate over normalized interview time. Each subject's tapes are
/// concatenated in manifest order and mapped onto `[0, 1]`; smiles are binned
/// by start time.
pub fn smile_rate_timeline(
    corpus: &Corpus,
    smiles: &SmileIndex,
    n_bins: usize,
) -> Result<TimelineReport, AnalysisError> {
    if corpus.videos.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    if n_bins == 0 {
        return Err(AnalysisError::InvalidParameter("n_bins must be positive".into()));
    }
    let mut subject_ids = Vec::new();
    let mut rates = Vec::new();
    for (subject, _) in corpus.by_subject_sorted() {
        let videos: Vec<_> = corpus.subject_videos(subject).collect();
        let total: f64 = videos.iter().map(|v| v.duration()).sum();
        let mut counts = vec![0usize; n_bins];
        let mut offset = 0.0;
        for v in &videos {
            for s in smiles_of(smiles, &v.video_id) {
                let u = (offset + s.start) / total;
                let b = ((u * n_bins as f64).floor() as usize).min(n_bins - 1);
                counts[b] += 1;
            }
            offset += v.duration();
        }
        let bin_minutes = total / 60.0 / n_bins as f64;
        subject_ids.push(subject.to_string());
        rates.push(counts.iter().map(|&c| c as f64 / bin_minutes).collect::<Vec<_>>());
    }
    let n = rates.len();
    let bins = (0..n_bins)
        .map(|b| {
            let col: Vec<f64> = rates.iter().map(|r| r[b]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            } else {
                0.0
            };
            TimelineBin {
                start: b as f64 / n_bins as f64,
                end: (b + 1) as f64 / n_bins as f64,
                mean_rate: mean,
                sd_rate: sd,
            }
        })
        .collect();
    Ok(TimelineReport {
        n_subjects: n,
        bins,
        subject_ids,
        rates,
    })
}

impl PlotPoints for TimelineReport {
    fn figure_id(&self) -> &'static str {
        "smile-rate-timeline"
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["normalized_time", "mean_smiles_per_min", "sd_smiles_per_min"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.bins
            .iter()
            .map(|b| {
                vec![
                    (0.5 * (b.start + b.end)).to_string(),
                    b.mean_rate.to_string(),
                    b.sd_rate.to_string(),
                ]
            })
            .collect()
    }
}
