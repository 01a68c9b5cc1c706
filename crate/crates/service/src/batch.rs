use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smilescope_core::corpus::{frame_range, Corpus, Speaker, VideoBundle};
use smilescope_core::smile::SmileSegment;

use crate::taxonomy::Taxonomy;
use crate::ServiceError;

/// Seconds of context shown before and after the smile.
pub const CLIP_BEFORE: f64 = 3.0;
pub const CLIP_AFTER: f64 = 2.0;
/// Sample rate of the fallback AU traces.
pub const TRACE_RATE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcerptSentence {
    pub start: f64,
    pub end: f64,
    pub speaker: Speaker,
    pub text: String,
}

/// AU12/AU06 intensities over the clip window, for rendering without media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipTrace {
    pub times: Vec<f64>,
    pub au12: Vec<f64>,
    pub au06: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub video_id: String,
    pub segment_start: f64,
    pub segment_end: f64,
    /// Clip window, clipped to the video.
    pub clip_start: f64,
    pub clip_end: f64,
    pub taxonomy: Taxonomy,
    pub excerpt: Vec<ExcerptSentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ClipTrace>,
}

impl AnnotationTask {
    pub fn from_segment(segment: &SmileSegment, video: &VideoBundle, taxonomy: Taxonomy) -> Self {
        let clip_start = (segment.start - CLIP_BEFORE).max(0.0);
        let clip_end = (segment.end + CLIP_AFTER).min(video.duration());
        let excerpt = video
            .transcript
            .iter()
            .filter(|s| s.overlaps(clip_start, clip_end))
            .map(|s| ExcerptSentence {
                start: s.start,
                end: s.end,
                speaker: s.speaker,
                text: s.text.clone(),
            })
            .collect();
        let task_id = task_id(&video.video_id, segment.start, segment.end, taxonomy);
        Self {
            task_id,
            video_id: video.video_id.clone(),
            segment_start: segment.start,
            segment_end: segment.end,
            clip_start,
            clip_end,
            taxonomy,
            excerpt,
            trace: Some(trace(video, clip_start, clip_end)),
        }
    }
}

fn task_id(video_id: &str, start: f64, end: f64, taxonomy: Taxonomy) -> String {
    let mut h = Sha256::new();
    h.update(video_id.as_bytes());
    h.update(start.to_le_bytes());
    h.update(end.to_le_bytes());
    h.update(format!("{taxonomy:?}").as_bytes());
    format!("t-{}", &hex::encode(h.finalize())[..16])
}

fn trace(video: &VideoBundle, t0: f64, t1: f64) -> ClipTrace {
    let range = frame_range(t0, t1, video.fps, video.au.len());
    let step = ((video.fps / TRACE_RATE).round() as usize).max(1);
    let frames: Vec<usize> = range.step_by(step).collect();
    let pick = |code: &str| -> Vec<f64> {
        video
            .au
            .channel(code)
            .map(|c| frames.iter().map(|&i| c[i]).collect())
            .unwrap_or_default()
    };
    ClipTrace {
        times: frames.iter().map(|&i| video.frame_time(i)).collect(),
        au12: pick("AU12"),
        au06: pick("AU06"),
    }
}

/// Tasks for every candidate whose video is in the corpus, in input order.
pub fn build_tasks(
    corpus: &Corpus,
    candidates: &[SmileSegment],
    taxonomy: Taxonomy,
) -> Result<Vec<AnnotationTask>, ServiceError> {
    candidates
        .iter()
        .map(|c| {
            let v = corpus
                .video(&c.video_id)
                .ok_or_else(|| ServiceError::UnknownVideo(c.video_id.clone()))?;
            Ok(AnnotationTask::from_segment(c, v, taxonomy))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: String,
    pub taxonomy: Taxonomy,
    pub raters_per_task: usize,
    pub seed: u64,
    /// Tasks in presentation order.
    pub tasks: Vec<AnnotationTask>,
    /// Annotators per task id.
    pub assignments: BTreeMap<String, Vec<String>>,
}

impl Batch {
    pub fn task(&self, task_id: &str) -> Option<&AnnotationTask> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Task ids assigned to one annotator, in presentation order.
    pub fn queue<'a>(&'a self, annotator: &'a str) -> impl Iterator<Item = &'a AnnotationTask> + 'a {
        self.tasks
            .iter()
            .filter(move |t| self.assignments[&t.task_id].iter().any(|a| a == annotator))
    }
}

/// Shuffle tasks with `seed` and give each exactly `n` distinct annotators,
/// always choosing the least loaded (ties in a seeded annotator order).
pub fn create_batch(
    batch_id: &str,
    mut tasks: Vec<AnnotationTask>,
    taxonomy: Taxonomy,
    annotators: &[String],
    n: usize,
    seed: u64,
) -> Result<Batch, ServiceError> {
    if tasks.is_empty() {
        return Err(ServiceError::EmptyBatch);
    }
    let mut pool: Vec<String> = annotators.to_vec();
    pool.sort();
    pool.dedup();
    if n == 0 || n > pool.len() {
        return Err(ServiceError::NotEnoughAnnotators {
            needed: n,
            available: pool.len(),
        });
    }
    if let Some(t) = tasks.iter().find(|t| t.taxonomy != taxonomy) {
        return Err(ServiceError::TaxonomyMismatch(t.task_id.clone()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(t) = tasks.iter().find(|t| !seen.insert(t.task_id.clone())) {
        return Err(ServiceError::DuplicateTask(t.task_id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tasks.shuffle(&mut rng);
    pool.shuffle(&mut rng);
    let mut load = vec![0usize; pool.len()];
    let mut assignments = BTreeMap::new();
    for (k, t) in tasks.iter().enumerate() {
        // rotate the tie order so equal loads spread evenly
        let mut order: Vec<usize> = (0..pool.len()).map(|i| (i + k) % pool.len()).collect();
        order.sort_by_key(|&i| load[i]);
        let chosen: Vec<String> = order[..n]
            .iter()
            .map(|&i| {
                load[i] += 1;
                pool[i].clone()
            })
            .collect();
        assignments.insert(t.task_id.clone(), chosen);
    }
    Ok(Batch {
        batch_id: batch_id.to_string(),
        taxonomy,
        raters_per_task: n,
        seed,
        tasks,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks(n: usize) -> Vec<AnnotationTask> {
        (0..n)
            .map(|i| AnnotationTask {
                task_id: format!("t{i:02}"),
                video_id: "v".into(),
                segment_start: i as f64,
                segment_end: i as f64 + 1.0,
                clip_start: 0.0,
                clip_end: 2.0,
                taxonomy: Taxonomy::Social,
                excerpt: vec![],
                trace: None,
            })
            .collect()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i}")).collect()
    }

    fn per_annotator(b: &Batch) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for list in b.assignments.values() {
            for a in list {
                *m.entry(a.clone()).or_default() += 1;
            }
        }
        m
    }

    #[test]
    fn two_raters_two_annotators_get_everything() {
        let b = create_batch("b", tasks(10), Taxonomy::Social, &names(2), 2, 1).unwrap();
        assert!(per_annotator(&b).values().all(|&c| c == 10));
    }

    #[test]
    fn single_rater_is_balanced() {
        let b = create_batch("b", tasks(9), Taxonomy::Social, &names(3), 1, 5).unwrap();
        assert!(per_annotator(&b).values().all(|&c| c == 3));
    }

    #[test]
    fn assignment_is_seeded_partition() {
        let a = create_batch("b", tasks(20), Taxonomy::Social, &names(5), 3, 9).unwrap();
        let b = create_batch("b", tasks(20), Taxonomy::Social, &names(5), 3, 9).unwrap();
        assert_eq!(a, b);
        for list in a.assignments.values() {
            let mut l = list.clone();
            l.sort();
            l.dedup();
            assert_eq!(l.len(), 3);
        }
        let loads: Vec<usize> = per_annotator(&a).into_values().collect();
        assert!(loads.iter().max().unwrap() - loads.iter().min().unwrap() <= 1);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(matches!(
            create_batch("b", tasks(3), Taxonomy::Social, &names(1), 2, 0),
            Err(ServiceError::NotEnoughAnnotators { .. })
        ));
        assert!(matches!(
            create_batch("b", vec![], Taxonomy::Social, &names(2), 1, 0),
            Err(ServiceError::EmptyBatch)
        ));
        assert!(matches!(
            create_batch("b", tasks(2), Taxonomy::Authenticity, &names(2), 1, 0),
            Err(ServiceError::TaxonomyMismatch(_))
        ));
    }
}
