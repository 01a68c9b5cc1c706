use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    lemmatize, require_annotations, smiles_of, subject_sentences, union_measure, AnalysisError,
    PlotPoints, SmileIndex,
};
use crate::corpus::{interpolate_onsets, Corpus};
use crate::narrative::Topic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicOptions {
    /// Half-width of the window around each word onset, seconds.
    pub window: f64,
    /// Require the smile to start inside the window instead of merely overlapping it.
    pub strict_onset: bool,
}

impl Default for TopicOptions {
    fn default() -> Self {
        Self {
            window: 0.5,
            strict_onset: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDelta {
    pub topic: Topic,
    /// Mean over topic sentences of the summed lemma deltas; 0 without sentences.
    pub delta: f64,
    pub sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDeltaReport {
    pub options: TopicOptions,
    pub topics: Vec<TopicDelta>,
    /// Per-subject probability that a uniformly placed onset is activated.
    pub baselines: BTreeMap<String, f64>,
}

impl TopicDeltaReport {
    pub fn get(&self, topic: Topic) -> &TopicDelta {
        self.topics.iter().find(|t| t.topic == topic).expect("every topic reported")
    }
}

/// Change in smile presence around topic words relative to each subject's
/// baseline.
///
/// A word occurrence is activated when a smile falls within `window` of its
/// onset. Per subject and lemma, the activation rate minus the subject's
/// baseline is the lemma delta; the baseline is the exact fraction of the
/// subject's recorded time at which an onset would be activated. A topic
/// sentence scores the sum of its distinct lemmas' deltas, and a topic the
/// mean over its sentences. Only subject sentences count.
pub fn topic_smile_delta(
    corpus: &Corpus,
    smiles: &SmileIndex,
    opts: TopicOptions,
) -> Result<TopicDeltaReport, AnalysisError> {
    if !(opts.window > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!("window {}", opts.window)));
    }
    for v in &corpus.videos {
        require_annotations(v)?;
    }
    let w = opts.window;
    let activated = |smile_list: &[crate::smile::SmileSegment], t: f64| {
        smile_list.iter().any(|s| {
            if opts.strict_onset {
                s.start >= t - w && s.start <= t + w
            } else {
                s.start <= t + w && s.end >= t - w
            }
        })
    };

    let mut baselines = BTreeMap::new();
    // (subject, lemma) -> (activated, occurrences)
    let mut lemma_counts: BTreeMap<(&str, String), (usize, usize)> = BTreeMap::new();
    let mut topic_sentences: Vec<(&str, Vec<Topic>, BTreeSet<String>)> = Vec::new();
    for (subject, videos) in corpus.by_subject_sorted() {
        let mut covered = 0.0;
        let mut total = 0.0;
        for v in &videos {
            let list = smiles_of(smiles, &v.video_id);
            let d = v.duration();
            let spans = list
                .iter()
                .map(|s| {
                    if opts.strict_onset {
                        (s.start - w, s.start + w)
                    } else {
                        (s.start - w, s.end + w)
                    }
                })
                .collect();
            covered += union_measure(spans, 0.0, d);
            total += d;
            for s in subject_sentences(v) {
                let onsets = if s.word_onsets.is_empty() {
                    interpolate_onsets(&s.text, s.start, s.end)
                } else {
                    s.word_onsets.clone()
                };
                let mut lemmas = BTreeSet::new();
                for wo in &onsets {
                    let lemma = lemmatize(&wo.word);
                    if lemma.is_empty() {
                        continue;
                    }
                    let e = lemma_counts.entry((subject, lemma.clone())).or_default();
                    e.0 += activated(list, wo.onset) as usize;
                    e.1 += 1;
                    lemmas.insert(lemma);
                }
                if let Some(a) = &s.annotation {
                    if !a.topics.is_empty() {
                        topic_sentences.push((subject, a.topics.clone(), lemmas));
                    }
                }
            }
        }
        baselines.insert(subject.to_string(), if total > 0.0 { covered / total } else { 0.0 });
    }

    let mut sums: BTreeMap<Topic, (f64, usize)> = BTreeMap::new();
    for (subject, topics, lemmas) in &topic_sentences {
        let b = baselines[*subject];
        let score: f64 = lemmas
            .iter()
            .map(|l| {
                let (a, n) = lemma_counts[&(*subject, l.clone())];
                a as f64 / n as f64 - b
            })
            .sum();
        for t in topics {
            let e = sums.entry(*t).or_default();
            e.0 += score;
            e.1 += 1;
        }
    }
    let topics = Topic::ALL
        .iter()
        .map(|t| {
            let (sum, n) = sums.get(t).copied().unwrap_or((0.0, 0));
            TopicDelta {
                topic: *t,
                delta: if n > 0 { sum / n as f64 } else { 0.0 },
                sentences: n,
            }
        })
        .collect();
    Ok(TopicDeltaReport {
        options: opts,
        topics,
        baselines,
    })
}

impl PlotPoints for TopicDeltaReport {
    fn figure_id(&self) -> &'static str {
        "topic-smile-delta"
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["topic", "delta_smile_probability", "sentences"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| vec![t.topic.to_string(), t.delta.to_string(), t.sentences.to_string()])
            .collect()
    }
}
