use serde::{Deserialize, Serialize};

use super::{center_position, smiles_of, subject_sentences, AnalysisError, PlotPoints, SmileIndex};
use crate::corpus::{Corpus, GazeSample, VideoBundle};
use crate::narrative::Valence;
use crate::stats::{mean_ci95, StatsError};

/// AU45 intensity above which a frame counts as closed when no presence
/// column was ingested.
const BLINK_INTENSITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    All,
    Positive,
    Neutral,
    Negative,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [Stratum::All, Stratum::Positive, Stratum::Neutral, Stratum::Negative];

    fn admits(self, v: Option<Valence>) -> bool {
        match self {
            Stratum::All => true,
            Stratum::Positive => v == Some(Valence::Positive),
            Stratum::Neutral => v == Some(Valence::Neutral),
            Stratum::Negative => v == Some(Valence::Negative),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::All => "all",
            Stratum::Positive => "positive",
            Stratum::Neutral => "neutral",
            Stratum::Negative => "negative",
        }
    }
}

/// Angular speed summed over consecutive valid sample pairs inside the
/// intervals, as `(sum of rad/s values, pair count)`.
fn gaze_pairs(samples: &[GazeSample], intervals: &[(f64, f64)]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for &(a, b) in intervals {
        let lo = samples.partition_point(|s| s.time < a);
        let hi = samples.partition_point(|s| s.time < b);
        for w in samples[lo..hi.max(lo)].windows(2) {
            let (p, q) = (&w[0], &w[1]);
            let dt = q.time - p.time;
            if !(p.valid && q.valid) || dt <= 0.0 {
                continue;
            }
            let left = (q.left_yaw - p.left_yaw).hypot(q.left_pitch - p.left_pitch);
            let right = (q.right_yaw - p.right_yaw).hypot(q.right_pitch - p.right_pitch);
            sum += 0.5 * (left + right) / dt;
            n += 1;
        }
    }
    (sum, n)
}

/// Mean angular speed (rad/s) over consecutive valid sample pairs within
/// `[t0, t1)`, averaged across both eyes. `None` without any valid pair.
pub fn gaze_dynamics(samples: &[GazeSample], t0: f64, t1: f64) -> Option<f64> {
    let (sum, n) = gaze_pairs(samples, &[(t0, t1)]);
    (n > 0).then(|| sum / n as f64)
}

/// Frames where the eye goes from open to closed.
pub fn blink_onsets(closed: &[bool]) -> Vec<usize> {
    (1..closed.len()).filter(|&i| closed[i] && !closed[i - 1]).collect()
}

/// Blinks per second over a frame series.
pub fn blink_rate(closed: &[bool], fps: f64) -> f64 {
    if closed.is_empty() {
        return 0.0;
    }
    blink_onsets(closed).len() as f64 / (closed.len() as f64 / fps)
}

fn closed_frames(v: &VideoBundle) -> Result<Vec<bool>, AnalysisError> {
    if let Some(b) = &v.au.blink {
        return Ok(b.iter().map(|&x| x != 0).collect());
    }
    match v.au.channel("AU45") {
        Some(c) => Ok(c.iter().map(|&x| x >= BLINK_INTENSITY).collect()),
        None => Err(AnalysisError::MissingModality {
            video: v.video_id.clone(),
            modality: "AU45".into(),
        }),
    }
}

/// Complement of sorted intervals within `[0, d)`.
fn complement(intervals: &[(f64, f64)], d: f64) -> Vec<(f64, f64)> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut t = 0.0;
    for (a, b) in sorted {
        if a > t {
            out.push((t, a.min(d)));
        }
        t = t.max(b);
    }
    if t < d {
        out.push((t, d));
    }
    out
}

/// Totals of one measurement condition for a subject.
#[derive(Default, Clone, Copy)]
struct Acc {
    gaze_sum: f64,
    gaze_pairs: usize,
    blinks: usize,
    seconds: f64,
}

impl Acc {
    fn add(&mut self, v: &VideoBundle, closed: &[bool], gaze: &[GazeSample], intervals: &[(f64, f64)]) {
        let (s, n) = gaze_pairs(gaze, intervals);
        self.gaze_sum += s;
        self.gaze_pairs += n;
        let onsets = blink_onsets(closed);
        for &(a, b) in intervals {
            self.seconds += b - a;
            self.blinks += onsets
                .iter()
                .filter(|&&i| {
                    let t = v.frame_time(i);
                    t >= a && t < b
                })
                .count();
        }
    }

    fn gaze(&self) -> Option<f64> {
        (self.gaze_pairs > 0).then(|| self.gaze_sum / self.gaze_pairs as f64)
    }

    fn blink(&self) -> Option<f64> {
        (self.seconds > 0.0).then(|| self.blinks as f64 / self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeBlinkRow {
    pub stratum: Stratum,
    pub n_subjects: usize,
    /// Mean over subjects of smile minus non-smile gaze speed, rad/s.
    pub gaze_delta: Option<f64>,
    pub gaze_ci95: Option<f64>,
    /// Mean over subjects of smile minus non-smile blink rate, blinks/s.
    pub blink_delta: Option<f64>,
    pub blink_ci95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeBlinkReport {
    pub rows: Vec<GazeBlinkRow>,
}

impl GazeBlinkReport {
    pub fn get(&self, stratum: Stratum) -> &GazeBlinkRow {
        self.rows.iter().find(|r| r.stratum == stratum).expect("every stratum reported")
    }
}

/// Per-subject gaze speed and blink rate during smiles minus during
/// non-smile time, stratified by the narrative valence of each smile's
/// center sentence. Measurements are pooled over a subject's videos before
/// differencing.
pub fn gaze_blink_delta(corpus: &Corpus, smiles: &SmileIndex) -> Result<GazeBlinkReport, AnalysisError> {
    if corpus.videos.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    // per stratum: per-subject deltas
    let mut gaze_d: Vec<Vec<f64>> = vec![Vec::new(); Stratum::ALL.len()];
    let mut blink_d: Vec<Vec<f64>> = vec![Vec::new(); Stratum::ALL.len()];
    for (_subject, videos) in corpus.by_subject_sorted() {
        let mut during = [Acc::default(); 4];
        let mut outside = Acc::default();
        for v in &videos {
            let gaze = v.gaze.as_ref().ok_or_else(|| AnalysisError::MissingGaze(v.video_id.clone()))?;
            let closed = closed_frames(v)?;
            let list = smiles_of(smiles, &v.video_id);
            let sents = subject_sentences(v);
            let d = v.duration();
            let spans: Vec<(f64, f64)> = list.iter().map(|m| (m.start.max(0.0), m.end.min(d))).collect();
            outside.add(v, &closed, &gaze.samples, &complement(&spans, d));
            for (k, stratum) in Stratum::ALL.iter().enumerate() {
                let chosen: Vec<(f64, f64)> = list
                    .iter()
                    .zip(&spans)
                    .filter(|(m, _)| {
                        let valence = center_position(&sents, m)
                            .and_then(|c| sents[c].annotation.as_ref())
                            .map(|a| a.narrative_valence);
                        stratum.admits(valence)
                    })
                    .map(|(_, s)| *s)
                    .collect();
                during[k].add(v, &closed, &gaze.samples, &chosen);
            }
        }
        for k in 0..Stratum::ALL.len() {
            if let (Some(a), Some(b)) = (during[k].gaze(), outside.gaze()) {
                gaze_d[k].push(a - b);
            }
            if let (Some(a), Some(b)) = (during[k].blink(), outside.blink()) {
                blink_d[k].push(a - b);
            }
        }
    }
    let summarize = |x: &[f64]| -> Result<(Option<f64>, Option<f64>), AnalysisError> {
        match mean_ci95(x) {
            Ok((m, h)) => Ok((Some(m), Some(h))),
            Err(StatsError::TooFew { .. }) => Ok((x.first().copied(), None)),
            Err(e) => Err(e.into()),
        }
    };
    let rows = Stratum::ALL
        .iter()
        .enumerate()
        .map(|(k, stratum)| {
            let (gaze_delta, gaze_ci95) = summarize(&gaze_d[k])?;
            let (blink_delta, blink_ci95) = summarize(&blink_d[k])?;
            Ok(GazeBlinkRow {
                stratum: *stratum,
                n_subjects: gaze_d[k].len().max(blink_d[k].len()),
                gaze_delta,
                gaze_ci95,
                blink_delta,
                blink_ci95,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(GazeBlinkReport { rows })
}

impl PlotPoints for GazeBlinkReport {
    fn figure_id(&self) -> &'static str {
        "gaze-blink-delta"
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["valence", "gaze_delta_rad_s", "gaze_ci95", "blink_delta_per_s", "blink_ci95", "n_subjects"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.stratum.as_str().to_string(),
                    super::fmt_opt(r.gaze_delta),
                    super::fmt_opt(r.gaze_ci95),
                    super::fmt_opt(r.blink_delta),
                    super::fmt_opt(r.blink_ci95),
                    r.n_subjects.to_string(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(omega: f64, rate: f64, n: usize) -> Vec<GazeSample> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                GazeSample {
                    time: t,
                    left_yaw: omega * t,
                    left_pitch: 0.0,
                    right_yaw: omega * t,
                    right_pitch: 0.0,
                    valid: true,
                }
            })
            .collect()
    }

    #[test]
    fn constant_sweep_gives_omega() {
        let g = gaze_dynamics(&sweep(0.7, 30.0, 300), 0.0, 10.0).unwrap();
        assert!((g - 0.7).abs() < 1e-9);
        let frozen = gaze_dynamics(&sweep(0.0, 30.0, 300), 0.0, 10.0).unwrap();
        assert_eq!(frozen, 0.0);
    }

    #[test]
    fn invalid_samples_break_pairs() {
        let mut s = sweep(1.0, 10.0, 5);
        s[2].valid = false;
        let (_, n) = gaze_pairs(&s, &[(0.0, 1.0)]);
        assert_eq!(n, 2);
        assert_eq!(gaze_dynamics(&s[..1], 0.0, 1.0), None);
    }

    #[test]
    fn blink_transitions() {
        let closed = [false, true, true, false, true];
        assert_eq!(blink_onsets(&closed), vec![1, 4]);
        assert!((blink_rate(&closed, 1.0) - 0.4).abs() < 1e-15);
        assert_eq!(blink_onsets(&[true, true, false]), Vec::<usize>::new());
    }

    #[test]
    fn complement_covers_gaps() {
        assert_eq!(complement(&[(1.0, 2.0), (1.5, 3.0), (5.0, 6.0)], 10.0), vec![(0.0, 1.0), (3.0, 5.0), (6.0, 10.0)]);
        assert_eq!(complement(&[], 4.0), vec![(0.0, 4.0)]);
    }
}
