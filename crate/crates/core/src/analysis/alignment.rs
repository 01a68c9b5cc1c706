use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trajectory::sentence_value;
use super::{AnalysisError, PlotPoints};
use crate::corpus::{AffectModality, Corpus};
use crate::narrative::{discretize_valence, Valence, ValenceType};
use crate::stats::{classification_scores, ClassificationScores};

/// Where a sentence valence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValenceSource {
    /// The sentence annotation.
    Transcript,
    Audio,
    Eyegaze,
}

impl ValenceSource {
    pub const ALL: [ValenceSource; 3] = [ValenceSource::Transcript, ValenceSource::Audio, ValenceSource::Eyegaze];

    pub fn as_str(self) -> &'static str {
        match self {
            ValenceSource::Transcript => "transcript",
            ValenceSource::Audio => "audio",
            ValenceSource::Eyegaze => "eyegaze",
        }
    }

    pub fn affect_modality(self) -> Option<AffectModality> {
        match self {
            ValenceSource::Transcript => None,
            ValenceSource::Audio => Some(AffectModality::Audio),
            ValenceSource::Eyegaze => Some(AffectModality::Eyegaze),
        }
    }
}

impl std::str::FromStr for ValenceSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValenceSource::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown modality {s:?}"))
    }
}

/// Human valence judgments for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanValenceLabels {
    pub video_id: String,
    pub index: u64,
    pub valence_type: ValenceType,
    pub labels: Vec<Valence>,
}

/// Plurality label; ties between the top classes resolve to neutral and are
/// flagged.
pub fn majority_vote(labels: &[Valence]) -> Option<(Valence, bool)> {
    if labels.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<Valence, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let leaders: Vec<Valence> = counts.iter().filter(|(_, c)| **c == top).map(|(v, _)| *v).collect();
    if leaders.len() == 1 {
        Some((leaders[0], false))
    } else {
        Some((Valence::Neutral, true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCell {
    pub valence_type: ValenceType,
    pub modality: ValenceSource,
    /// Items with both a gold label and a prediction.
    pub n: usize,
    pub scores: Option<ClassificationScores<Valence>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub band: f64,
    pub cells: Vec<AlignmentCell>,
    /// Items whose majority vote was a tie, per valence type.
    pub ties: BTreeMap<ValenceType, usize>,
    /// Items that matched no sentence of the corpus.
    pub unmatched: usize,
}

impl AlignmentReport {
    pub fn cell(&self, kind: ValenceType, modality: ValenceSource) -> Option<&AlignmentCell> {
        self.cells.iter().find(|c| c.valence_type == kind && c.modality == modality)
    }
}

/// Accuracy and macro-F1 of each source against human majority labels.
/// Affect tracks are discretized at their mean over the sentence.
pub fn modality_alignment(
    corpus: &Corpus,
    human: &[HumanValenceLabels],
    band: f64,
) -> Result<AlignmentReport, AnalysisError> {
    if !(0.0..1.0).contains(&band) {
        return Err(AnalysisError::InvalidParameter(format!("band {band}")));
    }
    let mut ties: BTreeMap<ValenceType, usize> = BTreeMap::new();
    let mut unmatched = 0;
    // (type, modality) -> (pred, gold)
    let mut grid: BTreeMap<(ValenceType, ValenceSource), (Vec<Valence>, Vec<Valence>)> = BTreeMap::new();
    for item in human {
        let (gold, tie) = majority_vote(&item.labels).ok_or_else(|| AnalysisError::NoMajorityPossible {
            video_id: item.video_id.clone(),
            index: item.index,
        })?;
        if tie {
            *ties.entry(item.valence_type).or_default() += 1;
        }
        let found = corpus
            .video(&item.video_id)
            .and_then(|v| v.transcript.iter().find(|s| s.index == item.index).map(|s| (v, s)));
        let Some((video, sentence)) = found else {
            unmatched += 1;
            continue;
        };
        for m in ValenceSource::ALL {
            let pred = match m {
                ValenceSource::Transcript => sentence.annotation.as_ref().map(|a| a.valence(item.valence_type)),
                _ => sentence_value(video, sentence, m, item.valence_type)
                    .and_then(|x| discretize_valence(x.clamp(-1.0, 1.0), band).ok()),
            };
            if let Some(p) = pred {
                let e = grid.entry((item.valence_type, m)).or_default();
                e.0.push(p);
                e.1.push(gold);
            }
        }
    }
    let mut cells = Vec::new();
    for kind in [ValenceType::Narrative, ValenceType::Present] {
        for m in ValenceSource::ALL {
            let (pred, gold) = grid.remove(&(kind, m)).unwrap_or_default();
            let scores = if pred.is_empty() {
                None
            } else {
                Some(classification_scores(&pred, &gold, Valence::ALL, false)?)
            };
            cells.push(AlignmentCell {
                valence_type: kind,
                modality: m,
                n: pred.len(),
                scores,
            });
        }
    }
    Ok(AlignmentReport {
        band,
        cells,
        ties,
        unmatched,
    })
}

impl PlotPoints for AlignmentReport {
    fn figure_id(&self) -> &'static str {
        "modality-alignment"
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["valence_type", "modality", "accuracy", "macro_f1", "n"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                let kind = match c.valence_type {
                    ValenceType::Narrative => "narrative",
                    ValenceType::Present => "present",
                };
                vec![
                    kind.to_string(),
                    c.modality.as_str().to_string(),
                    super::fmt_opt(c.scores.as_ref().map(|s| s.accuracy)),
                    super::fmt_opt(c.scores.as_ref().map(|s| s.macro_f1)),
                    c.n.to_string(),
                ]
            })
            .collect()
    }
}
