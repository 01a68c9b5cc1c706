use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smilescope_core::corpus::{load_manifest, Corpus};
use smilescope_core::learn::{kfold_cv, univariate_auc_scan, CvOptions};
use smilescope_core::narrative::mock::MockEndpoint;
use smilescope_core::narrative::{
    annotate_corpus, AnnotateOptions, ChatEndpoint, HttpChatEndpoint, PromptTemplate,
};
use smilescope_core::smile::{
    build_training_set, detect_smiles, extract_video_candidates, feature_group_columns,
    feature_names, subject_baselines, train_detector, SmileDetector,
};
use smilescope_core::synth::{generate_corpus, load_ledger, score_detections, Ledger};
use smilescope_core::{ingest_corpus, SmileSegment};

use crate::error::CliError;
use crate::record::Run;

/// Ingest the manifest, hashing it and every file it references.
pub(crate) fn load_corpus(run: &mut Run) -> Result<Corpus, CliError> {
    let manifest = run.config.manifest()?.to_path_buf();
    let corpus = ingest_corpus(&manifest)?;
    run.input(&manifest)?;
    let m = load_manifest(&manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    for e in &m.videos {
        for p in e.paths.resolve(base).all() {
            run.input(p)?;
        }
    }
    Ok(corpus)
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::malformed(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e))
}

#[derive(Serialize)]
struct VideoSummary<'a> {
    video_id: &'a str,
    subject_id: &'a str,
    fps: f64,
    frames: usize,
    duration: f64,
    channels: &'a [String],
    sentences: usize,
    has_blink_channel: bool,
    has_gaze: bool,
    has_gaze_affect: bool,
}

pub fn ingest_check(run: &mut Run) -> Result<(), CliError> {
    let corpus = load_corpus(run)?;
    let videos: Vec<VideoSummary> = corpus
        .videos
        .iter()
        .map(|v| VideoSummary {
            video_id: &v.video_id,
            subject_id: &v.subject_id,
            fps: v.fps,
            frames: v.au.len(),
            duration: v.duration(),
            channels: &v.au.codes,
            sentences: v.transcript.len(),
            has_blink_channel: v.au.blink.is_some(),
            has_gaze: v.gaze.is_some(),
            has_gaze_affect: v.gaze_affect.is_some(),
        })
        .collect();
    run.report(
        "ingest.json",
        &serde_json::json!({
            "subjects": corpus.subject_ids().len(),
            "videos": videos,
        }),
    )
}

#[derive(Serialize)]
struct CountRow {
    video_id: String,
    count: usize,
}

pub fn extract(run: &mut Run) -> Result<(), CliError> {
    let corpus = load_corpus(run)?;
    let params = run.config.extraction;
    let per_video: Vec<Vec<SmileSegment>> = corpus
        .videos
        .par_iter()
        .map(|v| extract_video_candidates(v, &params))
        .collect::<Result<_, _>>()?;
    let counts: Vec<CountRow> = corpus
        .videos
        .iter()
        .zip(&per_video)
        .map(|(v, s)| CountRow {
            video_id: v.video_id.clone(),
            count: s.len(),
        })
        .collect();
    let all: Vec<SmileSegment> = per_video.into_iter().flatten().collect();
    run.jsonl("candidates.jsonl", &all)?;
    run.report(
        "extract.json",
        &serde_json::json!({ "params": params, "total": all.len(), "videos": counts }),
    )
}

/// A labeled interval; candidates overlapping a `smile: true` interval are positives.
#[derive(Debug, Clone, Deserialize)]
struct LabeledSegment {
    video_id: String,
    start: f64,
    end: f64,
    smile: bool,
}

#[derive(Serialize)]
struct AblationResult {
    name: String,
    columns: usize,
    pooled_auc: f64,
    mean_auc: Option<f64>,
}

pub fn train(run: &mut Run, ledger: Option<PathBuf>, labels: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(run)?;
    let params = run.config.extraction;
    let baselines = subject_baselines(&corpus, &params)?;
    let set = match (ledger, labels) {
        (Some(p), _) => {
            run.input(&p)?;
            let ledger = load_ledger(&p)?;
            // every video must be in the ledger before labels are drawn
            for v in &corpus.videos {
                if ledger.video(&v.video_id).is_none() {
                    return Err(smilescope_core::SynthError::LedgerMissing(v.video_id.clone()).into());
                }
            }
            build_training_set(&corpus, &params, &baselines, |s| ledger.label(s).unwrap_or(false))?
        }
        (None, Some(p)) => {
            run.input(&p)?;
            let rows: Vec<LabeledSegment> = read_jsonl(&p)?;
            let mut by_video: BTreeMap<&str, Vec<&LabeledSegment>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.smile) {
                by_video.entry(&r.video_id).or_default().push(r);
            }
            build_training_set(&corpus, &params, &baselines, |s| {
                by_video
                    .get(s.video_id.as_str())
                    .is_some_and(|l| l.iter().any(|r| s.overlaps(r.start, r.end)))
            })?
        }
        (None, None) => return Err(CliError::Usage("train-detector needs --ledger or --labels".into())),
    };
    let tc = run.config.training.clone();
    let opts = CvOptions {
        l2: tc.l2,
        seed: run.config.seed,
    };
    let (detector, report) = train_detector(&set, &params, tc.k, tc.group_by_subject, opts)?;
    run.json("detector.json", &detector)?;
    run.report("cv.json", &report)?;

    let names = feature_names();
    let scan = univariate_auc_scan(set.x.view(), &set.y, &names)?;
    run.report("univariate.json", &scan)?;

    if !tc.ablations.is_empty() {
        let groups = tc.group_by_subject.then_some(set.groups.as_slice());
        let mut results = Vec::new();
        for a in &tc.ablations {
            let mut cols: Vec<usize> = a.groups.iter().flat_map(|g| feature_group_columns(*g)).collect();
            cols.sort_unstable();
            cols.dedup();
            if cols.is_empty() {
                return Err(CliError::InvalidConfig(format!("ablation {} keeps no columns", a.name)));
            }
            let x = set.x.select(Axis(1), &cols);
            let r = kfold_cv(x.view(), &set.y, tc.k, groups, opts)?;
            results.push(AblationResult {
                name: a.name.clone(),
                columns: cols.len(),
                pooled_auc: r.pooled_auc,
                mean_auc: r.mean_auc,
            });
        }
        run.report("ablation.json", &results)?;
    }
    Ok(())
}

pub fn detect(run: &mut Run, ledger: Option<PathBuf>) -> Result<(), CliError> {
    let model_path = run
        .config
        .model
        .clone()
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    run.input(&model_path)?;
    let detector: SmileDetector = read_json(&model_path)?;
    let corpus = load_corpus(run)?;
    let theta = run.config.theta.unwrap_or(detector.theta);
    let baselines = subject_baselines(&corpus, &detector.params)?;
    let per_video: Vec<Vec<SmileSegment>> = corpus
        .videos
        .par_iter()
        .map(|v| detect_smiles(v, &detector, &baselines[&v.subject_id], theta))
        .collect::<Result<_, _>>()?;
    let counts: Vec<CountRow> = corpus
        .videos
        .iter()
        .zip(&per_video)
        .map(|(v, s)| CountRow {
            video_id: v.video_id.clone(),
            count: s.len(),
        })
        .collect();
    let score = match ledger {
        Some(p) => {
            run.input(&p)?;
            let ledger: Ledger = load_ledger(&p)?;
            let map: BTreeMap<String, Vec<SmileSegment>> = corpus
                .videos
                .iter()
                .zip(&per_video)
                .map(|(v, s)| (v.video_id.clone(), s.clone()))
                .collect();
            Some(score_detections(&ledger, &map))
        }
        None => None,
    };
    let all: Vec<SmileSegment> = per_video.into_iter().flatten().collect();
    run.jsonl("smiles.jsonl", &all)?;
    run.report(
        "detect.json",
        &serde_json::json!({
            "theta": theta,
            "total": all.len(),
            "videos": counts,
            "ledger_score": score,
        }),
    )
}

pub fn annotate(run: &mut Run, mock: bool) -> Result<(), CliError> {
    let corpus = load_corpus(run)?;
    let ac = run.config.annotate.clone();
    let template = PromptTemplate::builtin(&ac.template)?;
    let client: Box<dyn ChatEndpoint> = if mock {
        Box::new(MockEndpoint::new())
    } else {
        Box::new(HttpChatEndpoint::new(run.config.endpoint()?))
    };
    let mut opts = AnnotateOptions::new(run.out.clone());
    opts.batch_size = ac.batch_size;
    opts.retries = ac.retries;
    opts.window = ac.window;
    opts.concurrency_limit = run.config.jobs.unwrap_or_else(rayon::current_num_threads);
    let summary = annotate_corpus(&corpus, client.as_ref(), &template, &opts)?;
    for f in ["annotations.jsonl", "errors.jsonl", "cache.jsonl", "journal.jsonl"] {
        if run.path(f).exists() {
            run.produced(f);
        }
    }
    run.detail("annotate", &summary);
    run.report(
        "annotate.json",
        &serde_json::json!({
            "template": template.id,
            "template_hash": template.hash,
            "model": client.model(),
            "sentences": summary.sentences,
            "annotated": summary.annotated,
            "failed": summary.failed,
        }),
    )
}

pub fn synth(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config.synth.clone();
    let out = generate_corpus(&cfg)?;
    out.write(&run.out)?;
    for f in ["manifest.json", "ledger.json", "annotations.jsonl"] {
        run.produced(f);
    }
    let per_video: Vec<CountRow> = out
        .ledger
        .videos
        .iter()
        .map(|v| CountRow {
            video_id: v.video_id.clone(),
            count: v.smiles().count(),
        })
        .collect();
    run.report(
        "synth.json",
        &serde_json::json!({
            "subjects": cfg.n_subjects,
            "videos": out.corpus.videos.len(),
            "planted_smiles": out.ledger.smile_count(),
            "smiles_per_video": per_video,
        }),
    )
}
