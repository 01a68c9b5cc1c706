use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    center_position, require_annotations, smiles_of, subject_sentences, AnalysisError,
    PlotPoints, SmileIndex, ValenceSource,
};
use crate::corpus::{AffectComponent, Corpus, TranscriptSentence, VideoBundle};
use crate::narrative::{discretize_valence, Valence, ValenceType, DEFAULT_VALENCE_BAND};
use crate::stats::{cohens_d, wilcoxon_signed_rank, StatsError, WilcoxonOptions};

/// Sentence offsets of a cluster relative to its stimulus sentence.
pub const OFFSETS: [i32; 7] = [-3, -2, -1, 0, 1, 2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub valence_type: ValenceType,
    pub modalities: Vec<ValenceSource>,
    /// Neutral band used when the filter discretizes audio valence.
    pub band: f64,
}

impl TrajectoryOptions {
    pub fn new(valence_type: ValenceType) -> Self {
        Self {
            valence_type,
            modalities: ValenceSource::ALL.to_vec(),
            band: DEFAULT_VALENCE_BAND,
        }
    }

    /// Source deciding which sentences count as negative: transcript labels
    /// for narrative valence, discretized audio for present-day valence.
    pub fn filter_source(&self) -> ValenceSource {
        match self.valence_type {
            ValenceType::Narrative => ValenceSource::Transcript,
            ValenceType::Present => ValenceSource::Audio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetPoint {
    pub offset: i32,
    pub smile_mean: Option<f64>,
    pub control_mean: Option<f64>,
    pub smile_n: usize,
    pub control_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// Subjects with at least one smile and one control cluster valued at +1.
    pub n_subjects: usize,
    pub p_value: Option<f64>,
    pub cohens_d: Option<f64>,
    /// Percent of subjects whose smile-cluster mean exceeds their control mean.
    pub pct_improved: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    /// `None` for the filter series, the labels the clusters were selected on.
    pub modality: Option<ValenceSource>,
    pub points: Vec<OffsetPoint>,
    /// Within-subject comparison at +1.
    pub stats: TrajectoryStats,
}

impl TrajectorySeries {
    pub fn at(&self, offset: i32) -> &OffsetPoint {
        self.points.iter().find(|p| p.offset == offset).expect("offsets complete")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub valence_type: ValenceType,
    pub filter: ValenceSource,
    pub smile_clusters: usize,
    pub control_clusters: usize,
    /// Filter labels as scores, then one series per requested modality.
    pub series: Vec<TrajectorySeries>,
}

impl TrajectoryReport {
    pub fn filter_series(&self) -> &TrajectorySeries {
        &self.series[0]
    }

    pub fn modality(&self, m: ValenceSource) -> Option<&TrajectorySeries> {
        self.series.iter().find(|s| s.modality == Some(m))
    }
}

/// Valence of a sentence under one source: the annotation label score for the
/// transcript, the track's mean valence over the sentence otherwise.
pub(crate) fn sentence_value(
    bundle: &VideoBundle,
    s: &TranscriptSentence,
    source: ValenceSource,
    kind: ValenceType,
) -> Option<f64> {
    match source {
        ValenceSource::Transcript => s.annotation.as_ref().map(|a| a.valence(kind).score()),
        ValenceSource::Audio | ValenceSource::Eyegaze => bundle
            .affect(source.affect_modality().expect("track source"))
            .and_then(|t| t.window_mean(s.start, s.end, AffectComponent::Valence)),
    }
}

struct Cluster<'a> {
    subject: &'a str,
    video: &'a VideoBundle,
    sentences: Vec<&'a TranscriptSentence>,
    filter: Vec<f64>,
}

/// Seven-sentence trajectories around smiles on negative sentences, against
/// control clusters centred on negative sentences with no smile anywhere in
/// the cluster. Clusters use subject sentences only and must fit inside one
/// video; smiles sharing a center sentence form one cluster.
pub fn valence_trajectories(
    corpus: &Corpus,
    smiles: &SmileIndex,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryReport, AnalysisError> {
    let filter = opts.filter_source();
    for v in &corpus.videos {
        require_annotations(v)?;
        for m in opts.modalities.iter().chain(std::iter::once(&filter)) {
            if let Some(am) = m.affect_modality() {
                if v.affect(am).is_none() {
                    return Err(AnalysisError::MissingModality {
                        video: v.video_id.clone(),
                        modality: m.as_str().to_string(),
                    });
                }
            }
        }
    }
    let label_of = |v: &VideoBundle, s: &TranscriptSentence| -> Result<Option<Valence>, AnalysisError> {
        match filter {
            ValenceSource::Transcript => Ok(s.annotation.as_ref().map(|a| a.valence(opts.valence_type))),
            _ => match sentence_value(v, s, filter, opts.valence_type) {
                Some(x) => discretize_valence(x.clamp(-1.0, 1.0), opts.band)
                    .map(Some)
                    .map_err(|e| AnalysisError::InvalidParameter(e.to_string())),
                None => Ok(None),
            },
        }
    };

    let mut smile_clusters: Vec<Cluster> = Vec::new();
    let mut control_clusters: Vec<Cluster> = Vec::new();
    for v in corpus.by_subject_sorted().into_iter().flat_map(|(_, vs)| vs) {
        let sents = subject_sentences(v);
        let labels: Vec<Option<Valence>> = sents.iter().map(|s| label_of(v, s)).collect::<Result<_, _>>()?;
        let list = smiles_of(smiles, &v.video_id);
        let has_smile: Vec<bool> = sents
            .iter()
            .map(|s| list.iter().any(|m| m.start < s.end && m.end > s.start))
            .collect();
        let make = |c: usize| Cluster {
            subject: &v.subject_id,
            video: v,
            sentences: sents[c - 3..=c + 3].to_vec(),
            filter: labels[c - 3..=c + 3]
                .iter()
                .map(|l| l.map_or(f64::NAN, Valence::score))
                .collect(),
        };
        let fits = |c: usize| c >= 3 && c + 3 < sents.len();
        let centers: BTreeSet<usize> = list.iter().filter_map(|m| center_position(&sents, m)).collect();
        for c in centers {
            if fits(c) && labels[c] == Some(Valence::Negative) {
                smile_clusters.push(make(c));
            }
        }
        for c in 0..sents.len() {
            if fits(c) && labels[c] == Some(Valence::Negative) && !has_smile[c - 3..=c + 3].iter().any(|&h| h) {
                control_clusters.push(make(c));
            }
        }
    }

    let mut series = Vec::new();
    let sources: Vec<Option<ValenceSource>> =
        std::iter::once(None).chain(opts.modalities.iter().copied().map(Some)).collect();
    for source in sources {
        let values = |c: &Cluster| -> Vec<Option<f64>> {
            match source {
                None => c.filter.iter().map(|x| (!x.is_nan()).then_some(*x)).collect(),
                Some(m) => c
                    .sentences
                    .iter()
                    .map(|s| sentence_value(c.video, s, m, opts.valence_type))
                    .collect(),
            }
        };
        let sv: Vec<(&str, Vec<Option<f64>>)> = smile_clusters.iter().map(|c| (c.subject, values(c))).collect();
        let cv: Vec<(&str, Vec<Option<f64>>)> = control_clusters.iter().map(|c| (c.subject, values(c))).collect();
        let points = OFFSETS
            .iter()
            .enumerate()
            .map(|(k, &offset)| {
                let col = |set: &[(&str, Vec<Option<f64>>)]| -> Vec<f64> { set.iter().filter_map(|(_, v)| v[k]).collect() };
                let (s, c) = (col(&sv), col(&cv));
                let mean = |x: &[f64]| (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64);
                OffsetPoint {
                    offset,
                    smile_mean: mean(&s),
                    control_mean: mean(&c),
                    smile_n: s.len(),
                    control_n: c.len(),
                }
            })
            .collect();
        let stats = plus_one_stats(&sv, &cv)?;
        series.push(TrajectorySeries {
            modality: source,
            points,
            stats,
        });
    }
    Ok(TrajectoryReport {
        valence_type: opts.valence_type,
        filter,
        smile_clusters: smile_clusters.len(),
        control_clusters: control_clusters.len(),
        series,
    })
}

/// Mean per subject of the values at offset index `k`.
fn per_subject_at<'a>(set: &[(&'a str, Vec<Option<f64>>)], k: usize) -> BTreeMap<&'a str, f64> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (subject, v) in set {
        if let Some(x) = v[k] {
            let e = acc.entry(subject).or_default();
            e.0 += x;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

fn plus_one_stats(
    smile: &[(&str, Vec<Option<f64>>)],
    control: &[(&str, Vec<Option<f64>>)],
) -> Result<TrajectoryStats, AnalysisError> {
    let k = OFFSETS.iter().position(|&o| o == 1).unwrap();
    let (s, c) = (per_subject_at(smile, k), per_subject_at(control, k));
    let pairs: Vec<(f64, f64)> = s.iter().filter_map(|(subj, a)| c.get(subj).map(|b| (*a, *b))).collect();
    let n = pairs.len();
    let p_value = match wilcoxon_signed_rank(&pairs, WilcoxonOptions::default()) {
        Ok(r) => Some(r.p_two_sided),
        Err(StatsError::AllZeroDifferences) => None,
        Err(e) => return Err(e.into()),
    };
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d = match cohens_d(&a, &b) {
        Ok(d) => Some(d),
        Err(StatsError::TooFew { .. } | StatsError::ZeroPooledVariance) => None,
        Err(e) => return Err(e.into()),
    };
    let improved = pairs.iter().filter(|(a, b)| a > b).count();
    Ok(TrajectoryStats {
        n_subjects: n,
        p_value,
        cohens_d: d,
        pct_improved: (n > 0).then(|| 100.0 * improved as f64 / n as f64),
    })
}

impl PlotPoints for TrajectoryReport {
    fn figure_id(&self) -> &'static str {
        match self.valence_type {
            ValenceType::Narrative => "valence-trajectory-narrative",
            ValenceType::Present => "valence-trajectory-present",
        }
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["modality", "offset", "smile_mean", "control_mean", "smile_n", "control_n"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for s in &self.series {
            let name = s.modality.map_or("filter", |m| m.as_str());
            for p in &s.points {
                rows.push(vec![
                    name.to_string(),
                    p.offset.to_string(),
                    super::fmt_opt(p.smile_mean),
                    super::fmt_opt(p.control_mean),
                    p.smile_n.to_string(),
                    p.control_n.to_string(),
                ]);
            }
        }
        rows
    }
}
