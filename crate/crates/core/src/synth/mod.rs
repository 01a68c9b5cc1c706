//! Synthetic corpora with known smiles, annotations and planted effects.

mod text;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    write_affect_csv, write_au_csv, write_gaze_csv, write_manifest, write_transcript_jsonl,
    AffectModality, AffectSample, AffectTrack, AuFrameSeries, BundlePaths, Corpus, CorpusError,
    FormatConfig, GazeSample, GazeTrack, Manifest, ManifestEntry, Speaker, TranscriptSentence,
    VideoBundle, WordOnset, AU_CODES, AU_MAX_INTENSITY,
};
use crate::narrative::{
    AnnotationRow, Era, NarrativeAnnotation, Recall, Structure, TemporalSyntax, Topic, Valence,
};
use crate::smile::{SmileSegment, SmileSource};

pub use text::{topic_words, INTERVIEWER_WORDS, NEUTRAL_WORDS};

/// Template hash recorded on ground-truth annotation rows.
pub const SYNTH_TEMPLATE_HASH: &str = "synth-ground-truth";
pub const SYNTH_MODEL: &str = "synth";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("ledger has no entry for video {0}")]
    LedgerMissing(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::InvalidConfig(_) => "InvalidConfig",
            SynthError::LedgerMissing(_) => "LedgerMissing",
            SynthError::Corpus(e) => e.code(),
            SynthError::Io { .. } => "Io",
        }
    }
}

/// AU12 plateau height, AU06 plateau height and plateau length of one event class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventShape {
    /// Uniform range of the AU12 amplitude.
    pub au12: (f64, f64),
    pub au06_mean: f64,
    pub au06_sd: f64,
    /// Uniform range of the plateau duration in seconds.
    pub duration: (f64, f64),
}

impl EventShape {
    /// Joint density of the latent `(au12, au06, duration)`.
    pub fn density(&self, au12: f64, au06: f64, duration: f64) -> f64 {
        let unif = |x: f64, (lo, hi): (f64, f64)| {
            if x >= lo && x <= hi {
                1.0 / (hi - lo)
            } else {
                0.0
            }
        };
        let z = (au06 - self.au06_mean) / self.au06_sd;
        let normal = (-0.5 * z * z).exp() / (self.au06_sd * (2.0 * std::f64::consts::PI).sqrt());
        unif(au12, self.au12) * normal * unif(duration, self.duration)
    }

    fn validate(&self, name: &str) -> Result<(), SynthError> {
        let ok = self.au12.0 > 0.0
            && self.au12.0 < self.au12.1
            && self.duration.0 > 0.0
            && self.duration.0 < self.duration.1
            && self.au06_sd > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(format!("{name} shape {self:?}")))
        }
    }
}

/// Additive change per valence of the smile's center sentence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValenceDelta {
    pub negative: f64,
    pub neutral: f64,
    pub positive: f64,
}

impl ValenceDelta {
    pub fn get(&self, v: Valence) -> f64 {
        match v {
            Valence::Negative => self.negative,
            Valence::Neutral => self.neutral,
            Valence::Positive => self.positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedEffects {
    /// Added to the affect valence of the three subject sentences after each
    /// smile's center sentence.
    pub valence_bump: f64,
    pub bump_modalities: Vec<AffectModality>,
    /// Place smiles only in subject sentences with this topic.
    pub smile_topic: Option<Topic>,
    /// Place smiles only in subject sentences with this structure.
    pub smile_structure: Option<Structure>,
    /// Gaze speed reduction (rad/s) during smiles on positive sentences.
    pub gaze_suppression: f64,
    /// Blink-rate change (blinks/s) during smiles, by center valence.
    pub blink_delta: ValenceDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub videos_per_subject: usize,
    /// Seconds per video.
    pub duration: f64,
    pub fps: f64,
    /// Events per minute.
    pub smile_rate: f64,
    pub distractor_rate: f64,
    pub subthreshold_rate: f64,
    pub smile_shape: EventShape,
    pub distractor_shape: EventShape,
    pub subthreshold_shape: EventShape,
    /// Raised-cosine ramp on each side of an event plateau, seconds.
    pub ramp: f64,
    /// Minimum clearance between event extents, seconds.
    pub min_gap: f64,
    pub au_noise_sd: f64,
    /// Per-subject AU baseline offsets are uniform on `[0, au_offset_max]`.
    pub au_offset_max: f64,
    /// Probabilities of negative, neutral, positive sentence valence.
    pub valence_probs: [f64; 3],
    pub affect_rate: f64,
    pub affect_noise_sd: f64,
    pub sentence_valence_sd: f64,
    pub audio_gain: f64,
    pub eyegaze_gain: f64,
    pub gaze_rate: f64,
    pub gaze_speed: f64,
    pub gaze_speed_sd: f64,
    pub gaze_invalid_prob: f64,
    /// Blinks per second outside smiles.
    pub blink_rate: f64,
    pub blink_duration: f64,
    pub effects: PlantedEffects,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 2,
            videos_per_subject: 1,
            duration: 600.0,
            fps: 30.0,
            smile_rate: 2.0,
            distractor_rate: 2.0,
            subthreshold_rate: 2.0,
            smile_shape: EventShape {
                au12: (1.8, 3.6),
                au06_mean: 1.8,
                au06_sd: 0.4,
                duration: (1.0, 3.0),
            },
            distractor_shape: EventShape {
                au12: (1.4, 2.4),
                au06_mean: 0.3,
                au06_sd: 0.3,
                duration: (0.8, 2.0),
            },
            subthreshold_shape: EventShape {
                au12: (0.2, 0.5),
                au06_mean: 0.1,
                au06_sd: 0.1,
                duration: (0.5, 1.5),
            },
            ramp: 0.25,
            min_gap: 1.5,
            au_noise_sd: 0.15,
            au_offset_max: 0.3,
            valence_probs: [0.4, 0.3, 0.3],
            affect_rate: 2.0,
            affect_noise_sd: 0.1,
            sentence_valence_sd: 0.15,
            audio_gain: 0.45,
            eyegaze_gain: 0.3,
            gaze_rate: 10.0,
            gaze_speed: 0.5,
            gaze_speed_sd: 0.1,
            gaze_invalid_prob: 0.02,
            blink_rate: 0.25,
            blink_duration: 0.1,
            effects: PlantedEffects::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_subjects == 0 || self.videos_per_subject == 0 {
            return bad("need at least one subject and one video".into());
        }
        for (name, v) in [
            ("duration", self.duration),
            ("fps", self.fps),
            ("ramp", self.ramp),
            ("affect_rate", self.affect_rate),
            ("gaze_rate", self.gaze_rate),
            ("blink_duration", self.blink_duration),
            ("au_noise_sd", self.au_noise_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("smile_rate", self.smile_rate),
            ("distractor_rate", self.distractor_rate),
            ("subthreshold_rate", self.subthreshold_rate),
            ("min_gap", self.min_gap),
            ("au_offset_max", self.au_offset_max),
            ("affect_noise_sd", self.affect_noise_sd),
            ("sentence_valence_sd", self.sentence_valence_sd),
            ("gaze_speed", self.gaze_speed),
            ("gaze_speed_sd", self.gaze_speed_sd),
            ("blink_rate", self.blink_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.gaze_invalid_prob) {
            return bad(format!("gaze_invalid_prob {}", self.gaze_invalid_prob));
        }
        let psum: f64 = self.valence_probs.iter().sum();
        if self.valence_probs.iter().any(|p| *p < 0.0) || (psum - 1.0).abs() > 1e-9 {
            return bad(format!("valence_probs {:?}", self.valence_probs));
        }
        self.smile_shape.validate("smile")?;
        self.distractor_shape.validate("distractor")?;
        self.subthreshold_shape.validate("subthreshold")?;
        if self.smile_shape.duration.1 + 2.0 * self.ramp >= self.duration {
            return bad("video shorter than one smile".into());
        }
        let blink_frames = self.blink_frames() as f64 + 1.0;
        let worst = self.blink_rate
            + [self.effects.blink_delta.negative, self.effects.blink_delta.neutral, self.effects.blink_delta.positive]
                .iter()
                .fold(0.0f64, |m, d| m.max(*d));
        if worst * blink_frames / self.fps >= 0.5 {
            return bad("blink rate too high for the blink duration".into());
        }
        Ok(())
    }

    fn blink_frames(&self) -> usize {
        ((self.blink_duration * self.fps).round() as usize).max(1)
    }

    pub fn video_id(subject: usize, video: usize) -> String {
        format!("s{subject:03}_v{video:02}")
    }

    pub fn subject_id(subject: usize) -> String {
        format!("s{subject:03}")
    }

    /// Prior probability that an event is a smile.
    pub fn smile_prior(&self) -> f64 {
        let total = self.smile_rate + self.distractor_rate + self.subthreshold_rate;
        if total > 0.0 {
            self.smile_rate / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Smile,
    Distractor,
    Subthreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub kind: EventKind,
    /// Plateau start and end, seconds.
    pub start: f64,
    pub end: f64,
    pub au12_amplitude: f64,
    /// Latent AU06 amplitude before clamping at 0.
    pub au06_amplitude: f64,
    /// Subject sentence overlapping the plateau most (earliest on ties).
    pub center_sentence: Option<u64>,
    pub center_valence: Option<Valence>,
}

impl LedgerEvent {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && self.end > start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoLedger {
    pub video_id: String,
    pub subject_id: String,
    pub events: Vec<LedgerEvent>,
}

impl VideoLedger {
    pub fn smiles(&self) -> impl Iterator<Item = &LedgerEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Smile)
    }
}

/// Ground truth for a generated corpus. True sentence annotations are
/// written alongside as an annotation store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub config: SynthConfig,
    pub videos: Vec<VideoLedger>,
}

impl Ledger {
    pub fn video(&self, video_id: &str) -> Option<&VideoLedger> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn smile_count(&self) -> usize {
        self.videos.iter().map(|v| v.smiles().count()).sum()
    }

    /// Planted smiles as segments, keyed by video id.
    pub fn smile_segments(&self) -> BTreeMap<String, Vec<SmileSegment>> {
        self.videos
            .iter()
            .map(|v| {
                let segs = v
                    .smiles()
                    .map(|e| SmileSegment {
                        video_id: v.video_id.clone(),
                        start: e.start,
                        end: e.end,
                        peak_au12: e.au12_amplitude,
                        mean_au12: e.au12_amplitude,
                        source: SmileSource::Detected,
                        probability: Some(1.0),
                    })
                    .collect();
                (v.video_id.clone(), segs)
            })
            .collect()
    }

    /// Whether a candidate overlaps a planted smile.
    pub fn label(&self, candidate: &SmileSegment) -> Result<bool, SynthError> {
        let v = self
            .video(&candidate.video_id)
            .ok_or_else(|| SynthError::LedgerMissing(candidate.video_id.clone()))?;
        Ok(v.smiles().any(|e| e.overlaps(candidate.start, candidate.end)))
    }
}

/// Posterior probability that each candidate is a planted smile, from the
/// generative densities of the events it overlaps. Several events combine as
/// `1 - prod(1 - p)`; a candidate over no event gets the prior.
pub fn bayes_scores(ledger: &Ledger, candidates: &[SmileSegment]) -> Result<Vec<f64>, SynthError> {
    let cfg = &ledger.config;
    let prior = cfg.smile_prior();
    let classes = [
        (cfg.smile_rate, &cfg.smile_shape),
        (cfg.distractor_rate, &cfg.distractor_shape),
        (cfg.subthreshold_rate, &cfg.subthreshold_shape),
    ];
    candidates
        .iter()
        .map(|c| {
            let v = ledger
                .video(&c.video_id)
                .ok_or_else(|| SynthError::LedgerMissing(c.video_id.clone()))?;
            let mut none = 1.0;
            let mut any = false;
            for e in v.events.iter().filter(|e| e.overlaps(c.start, c.end)) {
                any = true;
                let w: Vec<f64> = classes
                    .iter()
                    .map(|(rate, shape)| rate * shape.density(e.au12_amplitude, e.au06_amplitude, e.duration()))
                    .collect();
                let total: f64 = w.iter().sum();
                let p = if total > 0.0 { w[0] / total } else { prior };
                none *= 1.0 - p;
            }
            Ok(if any { 1.0 - none } else { prior })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub detected: usize,
    pub planted: usize,
    /// Detections overlapping a planted smile.
    pub true_detections: usize,
    /// Planted smiles overlapped by a detection.
    pub recovered: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Overlap-based precision and recall of detections against planted smiles.
pub fn score_detections(
    ledger: &Ledger,
    detections: &BTreeMap<String, Vec<SmileSegment>>,
) -> DetectionScore {
    let mut detected = 0;
    let mut planted = 0;
    let mut true_detections = 0;
    let mut recovered = 0;
    for v in &ledger.videos {
        let dets = detections.get(&v.video_id).map(Vec::as_slice).unwrap_or(&[]);
        detected += dets.len();
        true_detections += dets
            .iter()
            .filter(|d| v.smiles().any(|e| e.overlaps(d.start, d.end)))
            .count();
        for e in v.smiles() {
            planted += 1;
            if dets.iter().any(|d| e.overlaps(d.start, d.end)) {
                recovered += 1;
            }
        }
    }
    let precision = if detected == 0 { 0.0 } else { true_detections as f64 / detected as f64 };
    let recall = if planted == 0 { 0.0 } else { recovered as f64 / planted as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    DetectionScore {
        detected,
        planted,
        true_detections,
        recovered,
        precision,
        recall,
        f1,
    }
}

/// A generated corpus with annotations attached, plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub ledger: Ledger,
}

impl SynthOutput {
    /// Ground-truth annotations in annotation-store form, sorted by video and index.
    pub fn annotation_rows(&self) -> Vec<AnnotationRow> {
        let mut rows: Vec<AnnotationRow> = self
            .corpus
            .videos
            .iter()
            .flat_map(|v| {
                v.transcript.iter().filter_map(move |s| {
                    s.annotation.as_ref().map(|a| AnnotationRow {
                        video_id: v.video_id.clone(),
                        index: s.index,
                        annotation: a.clone(),
                        template_hash: SYNTH_TEMPLATE_HASH.into(),
                        model: SYNTH_MODEL.into(),
                    })
                })
            })
            .collect();
        rows.sort_by(|a, b| (&a.video_id, a.index).cmp(&(&b.video_id, b.index)));
        rows
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            videos: self
                .corpus
                .videos
                .iter()
                .map(|v| {
                    let p = |ext: &str| PathBuf::from(format!("videos/{}.{ext}", v.video_id));
                    ManifestEntry {
                        video_id: v.video_id.clone(),
                        subject_id: v.subject_id.clone(),
                        fps: v.fps,
                        paths: BundlePaths {
                            au: p("au.csv"),
                            transcript: p("transcript.jsonl"),
                            audio_affect: p("audio.csv"),
                            gaze_affect: Some(p("gaze_affect.csv")),
                            gaze: Some(p("gaze.csv")),
                        },
                    }
                })
                .collect(),
            format: FormatConfig::default(),
        }
    }

    /// Write `manifest.json`, `videos/*`, `ledger.json` and `annotations.jsonl`.
    /// Transcripts are written without annotations.
    pub fn write(&self, out_dir: &Path) -> Result<(), SynthError> {
        let io = |p: &Path, e| SynthError::Io {
            path: p.display().to_string(),
            source: e,
        };
        std::fs::create_dir_all(out_dir.join("videos")).map_err(|e| io(out_dir, e))?;
        let manifest = self.manifest();
        for (v, entry) in self.corpus.videos.iter().zip(&manifest.videos) {
            let p = entry.paths.resolve(out_dir);
            write_au_csv(&p.au, &v.au)?;
            let bare: Vec<TranscriptSentence> = v
                .transcript
                .iter()
                .map(|s| TranscriptSentence {
                    annotation: None,
                    ..s.clone()
                })
                .collect();
            write_transcript_jsonl(&p.transcript, &bare)?;
            write_affect_csv(&p.audio_affect, &v.audio_affect)?;
            if let (Some(path), Some(track)) = (&p.gaze_affect, &v.gaze_affect) {
                write_affect_csv(path, track)?;
            }
            if let (Some(path), Some(track)) = (&p.gaze, &v.gaze) {
                write_gaze_csv(path, track)?;
            }
        }
        write_manifest(&out_dir.join("manifest.json"), &manifest)?;
        let ledger_path = out_dir.join("ledger.json");
        let text = serde_json::to_string_pretty(&self.ledger).expect("ledger serializes");
        std::fs::write(&ledger_path, text + "\n").map_err(|e| io(&ledger_path, e))?;
        let ann_path = out_dir.join("annotations.jsonl");
        let mut lines = String::new();
        for r in self.annotation_rows() {
            lines.push_str(&serde_json::to_string(&r).expect("row serializes"));
            lines.push('\n');
        }
        std::fs::write(&ann_path, lines).map_err(|e| io(&ann_path, e))?;
        Ok(())
    }
}

pub fn load_ledger(path: &Path) -> Result<Ledger, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| SynthError::InvalidConfig(format!("{}: {e}", path.display())))
}

struct SubjectTraits {
    au_offsets: Vec<f64>,
    valence_offset: f64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate a corpus. Each video draws from its own seeded stream, so the
/// output depends only on the config.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let traits: Vec<SubjectTraits> = (0..cfg.n_subjects)
        .map(|s| {
            let mut rng = rng_for(cfg.seed, (1 << 32) + s as u64);
            SubjectTraits {
                au_offsets: (0..AU_CODES.len()).map(|_| rng.gen_range(0.0..=cfg.au_offset_max)).collect(),
                valence_offset: Normal::new(0.0, 0.1).unwrap().sample(&mut rng),
            }
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.n_subjects)
        .flat_map(|s| (0..cfg.videos_per_subject).map(move |v| (s, v)))
        .collect();
    let results: Vec<(VideoBundle, VideoLedger)> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, v))| generate_video(cfg, s, v, &traits[s], rng_for(cfg.seed, i as u64)))
        .collect();
    let (videos, ledgers): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(SynthOutput {
        corpus: Corpus::new(videos),
        ledger: Ledger {
            config: cfg.clone(),
            videos: ledgers,
        },
    })
}

fn pick_valence(rng: &mut ChaCha8Rng, probs: &[f64; 3]) -> Valence {
    let u: f64 = rng.gen();
    if u < probs[0] {
        Valence::Negative
    } else if u < probs[0] + probs[1] {
        Valence::Neutral
    } else {
        Valence::Positive
    }
}

fn sentence_stream(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<TranscriptSentence> {
    let len = Exp::new(1.0 / 1.5).unwrap();
    let mut out = Vec::new();
    let mut t: f64 = 0.3;
    let mut speaker = Speaker::Interviewer;
    'outer: loop {
        let turns = match speaker {
            Speaker::Interviewer => rng.gen_range(1..=2),
            Speaker::Subject => rng.gen_range(2..=7),
        };
        for _ in 0..turns {
            let dur = 1.5 + len.sample(rng);
            let end = (t + dur).min(cfg.duration - 0.05);
            if end - t < 0.5 {
                break 'outer;
            }
            let annotation = match speaker {
                Speaker::Subject => NarrativeAnnotation {
                    era: *Era::ALL.choose(rng).unwrap(),
                    temporal_syntax: *TemporalSyntax::ALL.choose(rng).unwrap(),
                    structure: *Structure::ALL.choose(rng).unwrap(),
                    topics: if rng.gen_bool(0.75) {
                        vec![*Topic::ALL.choose(rng).unwrap()]
                    } else {
                        vec![]
                    },
                    recall: *Recall::ALL.choose(rng).unwrap(),
                    narrative_valence: pick_valence(rng, &cfg.valence_probs),
                    present_valence: pick_valence(rng, &cfg.valence_probs),
                },
                Speaker::Interviewer => NarrativeAnnotation {
                    era: Era::Other,
                    temporal_syntax: TemporalSyntax::PresentReflection,
                    structure: Structure::Other,
                    topics: vec![],
                    recall: Recall::External,
                    narrative_valence: Valence::Neutral,
                    present_valence: Valence::Neutral,
                },
            };
            let vocab: &[&str] = match (speaker, annotation.topics.first()) {
                (Speaker::Interviewer, _) => INTERVIEWER_WORDS,
                (Speaker::Subject, Some(topic)) => topic_words(*topic),
                (Speaker::Subject, None) => NEUTRAL_WORDS,
            };
            let n_words = ((end - t) * 2.2).round().clamp(3.0, 14.0) as usize;
            let step = (end - t) / n_words as f64;
            let word_onsets: Vec<WordOnset> = (0..n_words)
                .map(|k| WordOnset {
                    word: vocab.choose(rng).unwrap().to_string(),
                    onset: t + step * (k as f64 + rng.gen_range(0.0..0.5)),
                })
                .collect();
            let text = word_onsets.iter().map(|w| w.word.as_str()).collect::<Vec<_>>().join(" ");
            out.push(TranscriptSentence {
                index: out.len() as u64,
                start: t,
                end,
                speaker,
                text,
                word_onsets,
                onsets_interpolated: false,
                annotation: Some(annotation),
            });
            t = end + rng.gen_range(0.1..0.4);
        }
        speaker = match speaker {
            Speaker::Interviewer => Speaker::Subject,
            Speaker::Subject => Speaker::Interviewer,
        };
    }
    out
}

/// Place events of one class by rejection against already placed extents.
#[allow(clippy::too_many_arguments)]
fn place_events(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    kind: EventKind,
    rate: f64,
    shape: &EventShape,
    eligible: Option<&[(f64, f64)]>,
    placed: &mut Vec<LedgerEvent>,
) {
    if rate <= 0.0 {
        return;
    }
    let n = Poisson::new(rate / 60.0 * cfg.duration).unwrap().sample(rng) as usize;
    let normal = Normal::new(shape.au06_mean, shape.au06_sd).unwrap();
    for _ in 0..n {
        let duration = rng.gen_range(shape.duration.0..shape.duration.1);
        let au12 = rng.gen_range(shape.au12.0..shape.au12.1);
        let au06 = normal.sample(rng);
        for _attempt in 0..100 {
            let start = match eligible {
                Some([]) => break,
                Some(spans) => {
                    let (a, b) = spans[rng.gen_range(0..spans.len())];
                    if b - a > duration {
                        rng.gen_range(a..b - duration)
                    } else {
                        a
                    }
                }
                None => rng.gen_range(cfg.ramp..cfg.duration - duration - cfg.ramp),
            };
            let end = start + duration;
            if start - cfg.ramp < 0.0 || end + cfg.ramp > cfg.duration {
                continue;
            }
            let clear = placed.iter().all(|e| {
                start - cfg.ramp >= e.end + cfg.ramp + cfg.min_gap
                    || end + cfg.ramp + cfg.min_gap <= e.start - cfg.ramp
            });
            if clear {
                placed.push(LedgerEvent {
                    kind,
                    start,
                    end,
                    au12_amplitude: au12,
                    au06_amplitude: au06,
                    center_sentence: None,
                    center_valence: None,
                });
                break;
            }
        }
    }
}

/// Envelope of an event at time `t`: 1 on the plateau, raised-cosine ramps.
fn envelope(e: &LedgerEvent, ramp: f64, t: f64) -> f64 {
    if t >= e.start && t < e.end {
        1.0
    } else if t >= e.start - ramp && t < e.start {
        0.5 * (1.0 - (std::f64::consts::PI * (t - (e.start - ramp)) / ramp).cos())
    } else if t >= e.end && t < e.end + ramp {
        0.5 * (1.0 + (std::f64::consts::PI * (t - e.end) / ramp).cos())
    } else {
        0.0
    }
}

fn generate_video(
    cfg: &SynthConfig,
    subject: usize,
    video: usize,
    traits: &SubjectTraits,
    mut rng: ChaCha8Rng,
) -> (VideoBundle, VideoLedger) {
    let video_id = SynthConfig::video_id(subject, video);
    let subject_id = SynthConfig::subject_id(subject);
    let transcript = sentence_stream(cfg, &mut rng);
    let subject_idx: Vec<usize> = transcript
        .iter()
        .enumerate()
        .filter(|(_, s)| s.speaker == Speaker::Subject)
        .map(|(i, _)| i)
        .collect();

    let fx = &cfg.effects;
    let restricted = fx.smile_topic.is_some() || fx.smile_structure.is_some();
    let eligible: Vec<(f64, f64)> = subject_idx
        .iter()
        .map(|&i| &transcript[i])
        .filter(|s| {
            let a = s.annotation.as_ref().unwrap();
            fx.smile_topic.is_none_or(|t| a.topics.contains(&t))
                && fx.smile_structure.is_none_or(|st| a.structure == st)
        })
        .map(|s| (s.start, s.end))
        .collect();
    let mut events = Vec::new();
    place_events(
        cfg,
        &mut rng,
        EventKind::Smile,
        cfg.smile_rate,
        &cfg.smile_shape,
        restricted.then_some(eligible.as_slice()),
        &mut events,
    );
    place_events(cfg, &mut rng, EventKind::Distractor, cfg.distractor_rate, &cfg.distractor_shape, None, &mut events);
    place_events(cfg, &mut rng, EventKind::Subthreshold, cfg.subthreshold_rate, &cfg.subthreshold_shape, None, &mut events);
    events.sort_by(|a, b| a.start.total_cmp(&b.start));

    // center sentence position (in the subject-only list) for each smile
    let mut bump = vec![0.0; transcript.len()];
    for e in events.iter_mut().filter(|e| e.kind == EventKind::Smile) {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &i) in subject_idx.iter().enumerate() {
            let s = &transcript[i];
            let ov = s.end.min(e.end) - s.start.max(e.start);
            if ov > 0.0 && best.is_none_or(|(_, b)| ov > b) {
                best = Some((pos, ov));
            }
        }
        if let Some((pos, _)) = best {
            let s = &transcript[subject_idx[pos]];
            e.center_sentence = Some(s.index);
            e.center_valence = Some(s.annotation.as_ref().unwrap().narrative_valence);
            for k in 1..=3 {
                if let Some(&j) = subject_idx.get(pos + k) {
                    bump[j] += fx.valence_bump;
                }
            }
        }
    }

    let n = (cfg.duration * cfg.fps).round() as usize;
    let fps = cfg.fps;
    let smile_at = |t: f64| -> Option<&LedgerEvent> {
        let k = events.partition_point(|e| e.end <= t);
        events.get(k).filter(|e| e.kind == EventKind::Smile && e.start <= t)
    };

    // AU intensities
    let noise = Normal::new(0.0, cfg.au_noise_sd).unwrap();
    let au12_i = AU_CODES.iter().position(|c| *c == "AU12").unwrap();
    let au06_i = AU_CODES.iter().position(|c| *c == "AU06").unwrap();
    let au45_i = AU_CODES.iter().position(|c| *c == "AU45").unwrap();
    let mut intensities: Vec<Vec<f64>> = (0..AU_CODES.len())
        .map(|c| (0..n).map(|_| traits.au_offsets[c] + noise.sample(&mut rng)).collect())
        .collect();
    for e in &events {
        let lo = (((e.start - cfg.ramp) * fps).floor().max(0.0)) as usize;
        let hi = (((e.end + cfg.ramp) * fps).ceil() as usize + 1).min(n);
        for i in lo..hi {
            let w = envelope(e, cfg.ramp, i as f64 / fps);
            intensities[au12_i][i] += w * e.au12_amplitude;
            intensities[au06_i][i] += w * e.au06_amplitude.max(0.0);
        }
    }

    // blinks: a frame may start a blink only after an open frame, so each
    // blink blocks blink_len + 1 frames; q compensates to hit the target rate
    let blink_len = cfg.blink_frames();
    let mut blink = vec![0u8; n];
    let mut i = 0;
    while i < n {
        let t = i as f64 / fps;
        let delta = smile_at(t).map_or(0.0, |e| fx.blink_delta.get(e.center_valence.unwrap_or(Valence::Neutral)));
        let lambda = ((cfg.blink_rate + delta).max(0.0)) / fps;
        let q = lambda / (1.0 - lambda * (blink_len + 1) as f64);
        let open_before = i == 0 || blink[i - 1] == 0;
        if open_before && rng.gen_bool(q.clamp(0.0, 1.0)) {
            for b in blink.iter_mut().skip(i).take(blink_len) {
                *b = 1;
            }
            i += blink_len;
        } else {
            i += 1;
        }
    }
    for (v, &b) in intensities[au45_i].iter_mut().zip(&blink) {
        *v += 2.0 * b as f64;
    }
    for ch in &mut intensities {
        for v in ch.iter_mut() {
            *v = v.clamp(0.0, AU_MAX_INTENSITY);
        }
    }
    let au = AuFrameSeries {
        codes: AU_CODES.iter().map(|c| c.to_string()).collect(),
        intensities,
        frame_numbers: (0..n as u64).collect(),
        timestamps: (0..n).map(|i| i as f64 / fps).collect(),
        blink: Some(blink),
    };

    // affect tracks
    let sent_noise = Normal::new(0.0, cfg.sentence_valence_sd.max(1e-12)).unwrap();
    let sample_noise = Normal::new(0.0, cfg.affect_noise_sd.max(1e-12)).unwrap();
    let mut sentence_values = |gain: f64, present: bool, modality: AffectModality| -> Vec<f64> {
        transcript
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let a = s.annotation.as_ref().unwrap();
                let label = if present { a.present_valence } else { a.narrative_valence };
                let b = if fx.bump_modalities.contains(&modality) { bump[j] } else { 0.0 };
                gain * label.score() + traits.valence_offset + sent_noise.sample(&mut rng) + b
            })
            .collect()
    };
    let audio_values = sentence_values(cfg.audio_gain, true, AffectModality::Audio);
    let eyegaze_values = sentence_values(cfg.eyegaze_gain, false, AffectModality::Eyegaze);
    let mut track = |values: &[f64], modality: AffectModality| -> AffectTrack {
        let m = (cfg.duration * cfg.affect_rate).floor() as usize;
        let samples = (0..m)
            .map(|j| {
                let t = j as f64 / cfg.affect_rate;
                let k = transcript.partition_point(|s| s.end <= t);
                let base = match transcript.get(k) {
                    Some(s) if s.start <= t => values[k],
                    _ => traits.valence_offset,
                };
                AffectSample {
                    time: t,
                    valence: (base + sample_noise.sample(&mut rng)).clamp(-1.0, 1.0),
                    arousal: (0.2 * sample_noise.sample(&mut rng)).clamp(-1.0, 1.0),
                    dominance: (0.2 * sample_noise.sample(&mut rng)).clamp(-1.0, 1.0),
                }
            })
            .collect();
        AffectTrack { modality, samples }
    };
    let audio_affect = track(&audio_values, AffectModality::Audio);
    let gaze_affect = track(&eyegaze_values, AffectModality::Eyegaze);

    // gaze: fixed-magnitude steps in a random direction, both eyes together
    let speed_noise = Normal::new(0.0, cfg.gaze_speed_sd.max(1e-12)).unwrap();
    let m = (cfg.duration * cfg.gaze_rate).floor() as usize;
    let dt = 1.0 / cfg.gaze_rate;
    let (mut yaw, mut pitch) = (0.0f64, 0.0f64);
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let t = j as f64 * dt;
        if j > 0 {
            let suppress = smile_at(t)
                .filter(|e| e.center_valence == Some(Valence::Positive))
                .map_or(0.0, |_| fx.gaze_suppression);
            let v = (cfg.gaze_speed + speed_noise.sample(&mut rng) - suppress).max(0.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (mut dy, mut dp) = (v * dt * phi.cos(), v * dt * phi.sin());
            if (yaw + dy).abs() > 0.6 {
                dy = -dy;
            }
            if (pitch + dp).abs() > 0.4 {
                dp = -dp;
            }
            yaw += dy;
            pitch += dp;
        }
        samples.push(GazeSample {
            time: t,
            left_yaw: yaw,
            left_pitch: pitch,
            right_yaw: yaw,
            right_pitch: pitch,
            valid: !rng.gen_bool(cfg.gaze_invalid_prob),
        });
    }

    let bundle = VideoBundle {
        video_id: video_id.clone(),
        subject_id: subject_id.clone(),
        fps,
        au,
        transcript,
        audio_affect,
        gaze_affect: Some(gaze_affect),
        gaze: Some(GazeTrack { samples }),
    };
    (
        bundle,
        VideoLedger {
            video_id,
            subject_id,
            events,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smile::{extract_video_candidates, ExtractionParams};

    fn small() -> SynthConfig {
        SynthConfig {
            duration: 120.0,
            fps: 10.0,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.ledger, c.ledger);
    }

    #[test]
    fn no_events_no_candidates() {
        let cfg = SynthConfig {
            smile_rate: 0.0,
            distractor_rate: 0.0,
            ..small()
        };
        let out = generate_corpus(&cfg).unwrap();
        assert_eq!(out.ledger.smile_count(), 0);
        for v in &out.corpus.videos {
            assert!(extract_video_candidates(v, &ExtractionParams::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn events_are_separated_and_inside() {
        let out = generate_corpus(&small()).unwrap();
        let cfg = &out.ledger.config;
        for v in &out.ledger.videos {
            for w in v.events.windows(2) {
                assert!(w[1].start - cfg.ramp - (w[0].end + cfg.ramp) >= cfg.min_gap - 1e-9);
            }
            for e in &v.events {
                assert!(e.start - cfg.ramp >= 0.0 && e.end + cfg.ramp <= cfg.duration);
            }
        }
    }

    #[test]
    fn every_smile_is_a_candidate() {
        let out = generate_corpus(&SynthConfig { seed: 4, ..small() }).unwrap();
        let p = ExtractionParams::default();
        for (v, l) in out.corpus.videos.iter().zip(&out.ledger.videos) {
            let cands = extract_video_candidates(v, &p).unwrap();
            for e in l.smiles() {
                assert!(
                    cands.iter().any(|c| c.start <= e.start + 1e-9 && c.end >= e.end - 1e-9),
                    "smile {e:?} not covered"
                );
            }
        }
    }

    #[test]
    fn topic_restriction_places_smiles_in_topic_sentences() {
        let cfg = SynthConfig {
            effects: PlantedEffects {
                smile_topic: Some(Topic::Health),
                ..Default::default()
            },
            ..small()
        };
        let out = generate_corpus(&cfg).unwrap();
        assert!(out.ledger.smile_count() > 0);
        for (v, l) in out.corpus.videos.iter().zip(&out.ledger.videos) {
            for e in l.smiles() {
                let s = v
                    .transcript
                    .iter()
                    .find(|s| s.speaker == Speaker::Subject && s.start <= e.start && e.start < s.end.max(s.start + 1e-9))
                    .or_else(|| v.transcript.iter().find(|s| s.start == e.start));
                let s = s.expect("smile starts inside a sentence");
                assert!(s.annotation.as_ref().unwrap().topics.contains(&Topic::Health));
            }
        }
    }

    #[test]
    fn bayes_scores_behave() {
        let out = generate_corpus(&small()).unwrap();
        let v = &out.ledger.videos[0];
        let smile = v.smiles().next().unwrap();
        let seg = SmileSegment {
            video_id: v.video_id.clone(),
            start: smile.start,
            end: smile.end,
            peak_au12: 0.0,
            mean_au12: 0.0,
            source: SmileSource::Candidate,
            probability: None,
        };
        let far = SmileSegment {
            start: -10.0,
            end: -9.0,
            ..seg.clone()
        };
        let s = bayes_scores(&out.ledger, &[seg.clone(), far]).unwrap();
        assert!(s[0] > 0.9, "{}", s[0]);
        assert_eq!(s[1], out.ledger.config.smile_prior());
        let missing = SmileSegment {
            video_id: "nope".into(),
            ..seg
        };
        assert!(matches!(bayes_scores(&out.ledger, &[missing]), Err(SynthError::LedgerMissing(_))));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_corpus(&SynthConfig { n_subjects: 0, ..small() }).is_err());
        assert!(generate_corpus(&SynthConfig { fps: 0.0, ..small() }).is_err());
        assert!(generate_corpus(&SynthConfig { smile_rate: -1.0, ..small() }).is_err());
    }
}
