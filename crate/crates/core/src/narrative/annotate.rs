use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    build_context, parse_annotation, AnnotationRequest, ChatEndpoint, ChatMessage, ChatRequest,
    ContextWindow, NarrativeAnnotation, NarrativeError, PromptTemplate,
};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub template_hash: String,
    pub sentence_hash: String,
}

impl CacheKey {
    fn for_messages(template: &PromptTemplate, messages: &[ChatMessage]) -> Self {
        let mut h = Sha256::new();
        for m in messages.iter().filter(|m| m.role != "system") {
            h.update(m.role.as_bytes());
            h.update([0u8]);
            h.update(m.content.as_bytes());
            h.update([0u8]);
        }
        Self {
            template_hash: template.hash.clone(),
            sentence_hash: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    #[serde(flatten)]
    key: CacheKey,
    annotation: NarrativeAnnotation,
    model: String,
}

/// Reply cache keyed by (template hash, sentence hash), optionally persisted
/// as an append-only JSONL file.
pub struct AnnotationCache {
    entries: HashMap<CacheKey, (NarrativeAnnotation, String)>,
    writer: Option<(PathBuf, BufWriter<File>)>,
}

impl AnnotationCache {
    pub fn in_memory() -> Self {
        Self {
            entries: HashMap::new(),
            writer: None,
        }
    }

    /// Load `path` if present and append new entries to it. A torn final line
    /// from an interrupted run is cut off.
    pub fn open(path: &Path) -> Result<Self, NarrativeError> {
        let io = |e| NarrativeError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut entries = HashMap::new();
        let mut keep_len = None;
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(io)?;
            let mut offset = 0;
            let lines: Vec<&str> = text.split_inclusive('\n').collect();
            for (i, raw) in lines.iter().enumerate() {
                let line = raw.trim();
                if !line.is_empty() {
                    match serde_json::from_str::<CacheLine>(line) {
                        Ok(c) => {
                            entries.insert(c.key, (c.annotation, c.model));
                        }
                        Err(_) if i + 1 == lines.len() => {
                            keep_len = Some(offset as u64);
                            break;
                        }
                        Err(e) => {
                            return Err(NarrativeError::MalformedStore {
                                path: path.display().to_string(),
                                line: i + 1,
                                reason: e.to_string(),
                            })
                        }
                    }
                }
                offset += raw.len();
            }
            if keep_len.is_none() && !text.is_empty() && !text.ends_with('\n') {
                OpenOptions::new()
                    .append(true)
                    .open(path)
                    .and_then(|mut f| f.write_all(b"\n"))
                    .map_err(io)?;
            }
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if let Some(n) = keep_len {
            file.set_len(n).map_err(io)?;
        }
        Ok(Self {
            entries,
            writer: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<&(NarrativeAnnotation, String)> {
        self.entries.get(key)
    }

    pub fn insert(
        &mut self,
        key: CacheKey,
        annotation: NarrativeAnnotation,
        model: &str,
    ) -> Result<(), NarrativeError> {
        if let Some((path, w)) = self.writer.as_mut() {
            let line = CacheLine {
                key: key.clone(),
                annotation: annotation.clone(),
                model: model.to_string(),
            };
            let io = |e| NarrativeError::Io {
                path: path.display().to_string(),
                source: e,
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("cache line serializes"))
                .map_err(io)?;
            w.flush().map_err(io)?;
        }
        self.entries.insert(key, (annotation, model.to_string()));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationOutcome {
    pub annotation: NarrativeAnnotation,
    /// Malformed replies discarded before the accepted one.
    pub retries: u32,
    pub from_cache: bool,
}

fn request_annotation(
    messages: Vec<ChatMessage>,
    client: &dyn ChatEndpoint,
    retries: u32,
) -> Result<(NarrativeAnnotation, u32), NarrativeError> {
    let request = ChatRequest::deterministic(messages);
    let mut last = String::new();
    for attempt in 0..=retries {
        let reply = client.complete(&request)?;
        match parse_annotation(&reply) {
            Ok(a) => return Ok((a, attempt)),
            Err(reason) => last = reason,
        }
    }
    Err(NarrativeError::SchemaViolation {
        attempts: retries + 1,
        reason: last,
    })
}

/// Annotate one sentence, consulting and filling `cache`.
pub fn annotate_sentence(
    req: &AnnotationRequest,
    template: &PromptTemplate,
    client: &dyn ChatEndpoint,
    cache: &mut AnnotationCache,
    retries: u32,
) -> Result<AnnotationOutcome, NarrativeError> {
    let messages = template.render(req);
    let key = CacheKey::for_messages(template, &messages);
    if let Some((a, _)) = cache.get(&key) {
        return Ok(AnnotationOutcome {
            annotation: a.clone(),
            retries: 0,
            from_cache: true,
        });
    }
    let (annotation, retries) = request_annotation(messages, client, retries)?;
    cache.insert(key, annotation.clone(), client.model())?;
    Ok(AnnotationOutcome {
        annotation,
        retries,
        from_cache: false,
    })
}

/// One line of the annotation store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub video_id: String,
    pub index: u64,
    pub annotation: NarrativeAnnotation,
    pub template_hash: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub video_id: String,
    pub index: u64,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub out_dir: PathBuf,
    pub concurrency_limit: usize,
    pub batch_size: usize,
    pub retries: u32,
    pub window: ContextWindow,
}

impl AnnotateOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            concurrency_limit: 4,
            batch_size: 64,
            retries: 2,
            window: ContextWindow::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub sentences: usize,
    pub cache_hits: usize,
    pub requested: usize,
    pub annotated: usize,
    pub failed: usize,
    pub batches: usize,
}

#[derive(Serialize)]
struct JournalLine {
    batch: usize,
    requested: usize,
    succeeded: usize,
    failed: usize,
}

struct Job {
    video_id: String,
    index: u64,
    key: CacheKey,
    messages: Vec<ChatMessage>,
}

/// Annotate every sentence of `corpus`, skipping sentences already in the
/// cache. Writes `cache.jsonl` and `journal.jsonl` incrementally and
/// `annotations.jsonl` / `errors.jsonl` (sorted by video and index) at the
/// end. Per-sentence failures land in the error ledger without aborting.
pub fn annotate_corpus(
    corpus: &Corpus,
    client: &dyn ChatEndpoint,
    template: &PromptTemplate,
    opts: &AnnotateOptions,
) -> Result<AnnotateSummary, NarrativeError> {
    let out = &opts.out_dir;
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e| NarrativeError::Io {
            path: p.clone(),
            source: e,
        }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut cache = AnnotationCache::open(&out.join("cache.jsonl"))?;
    let journal_path = out.join("journal.jsonl");
    let mut journal = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&journal_path)
        .map_err(io(&journal_path))?;

    let mut jobs = Vec::new();
    for v in &corpus.videos {
        for i in 0..v.transcript.len() {
            let req = build_context(&v.transcript, i, opts.window)?;
            let messages = template.render(&req);
            let key = CacheKey::for_messages(template, &messages);
            jobs.push(Job {
                video_id: v.video_id.clone(),
                index: v.transcript[i].index,
                key,
                messages,
            });
        }
    }

    let mut summary = AnnotateSummary {
        sentences: jobs.len(),
        ..Default::default()
    };
    let mut pending: Vec<&Job> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for j in &jobs {
        if cache.get(&j.key).is_some() {
            summary.cache_hits += 1;
        } else if queued.insert(&j.key) {
            pending.push(j);
        }
    }

    let mut failures: HashMap<CacheKey, NarrativeError> = HashMap::new();
    let batch_size = opts.batch_size.max(1);
    let workers = opts.concurrency_limit.max(1);
    for (b, batch) in pending.chunks(batch_size).enumerate() {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<(NarrativeAnnotation, u32), NarrativeError>>>> =
            Mutex::new((0..batch.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..workers.min(batch.len()) {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    if k >= batch.len() {
                        break;
                    }
                    let r = request_annotation(batch[k].messages.clone(), client, opts.retries);
                    slots.lock().unwrap()[k] = Some(r);
                });
            }
        });
        let mut ok = 0;
        let mut bad = 0;
        for (job, slot) in batch.iter().zip(slots.into_inner().unwrap()) {
            match slot.expect("every slot filled") {
                Ok((a, _)) => {
                    cache.insert(job.key.clone(), a, client.model())?;
                    ok += 1;
                }
                Err(e) => {
                    failures.insert(job.key.clone(), e);
                    bad += 1;
                }
            }
        }
        summary.requested += batch.len();
        summary.batches += 1;
        let line = JournalLine {
            batch: b,
            requested: batch.len(),
            succeeded: ok,
            failed: bad,
        };
        writeln!(journal, "{}", serde_json::to_string(&line).unwrap()).map_err(io(&journal_path))?;
        journal.flush().map_err(io(&journal_path))?;
    }

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for j in &jobs {
        match cache.get(&j.key) {
            Some((a, model)) => rows.push(AnnotationRow {
                video_id: j.video_id.clone(),
                index: j.index,
                annotation: a.clone(),
                template_hash: j.key.template_hash.clone(),
                model: model.clone(),
            }),
            None => {
                let e = failures.get(&j.key);
                errors.push(ErrorRow {
                    video_id: j.video_id.clone(),
                    index: j.index,
                    code: e.map(|e| e.code()).unwrap_or("Unknown").to_string(),
                    message: e.map(|e| e.to_string()).unwrap_or_default(),
                });
            }
        }
    }
    rows.sort_by(|a, b| (&a.video_id, a.index).cmp(&(&b.video_id, b.index)));
    errors.sort_by(|a, b| (&a.video_id, a.index).cmp(&(&b.video_id, b.index)));
    summary.annotated = rows.len();
    summary.failed = errors.len();
    write_jsonl(&out.join("annotations.jsonl"), &rows)?;
    write_jsonl(&out.join("errors.jsonl"), &errors)?;
    Ok(summary)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), NarrativeError> {
    let io = |e| NarrativeError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in rows {
        writeln!(w, "{}", serde_json::to_string(r).expect("row serializes")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read an annotation store written by [`annotate_corpus`].
pub fn load_annotation_rows(path: &Path) -> Result<Vec<AnnotationRow>, NarrativeError> {
    let text = std::fs::read_to_string(path).map_err(|e| NarrativeError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| NarrativeError::MalformedStore {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Copy store rows onto matching transcript sentences. Returns how many
/// sentences were annotated.
pub fn attach_annotations(corpus: &mut Corpus, rows: &[AnnotationRow]) -> usize {
    let mut by_video: HashMap<&str, HashMap<u64, &NarrativeAnnotation>> = HashMap::new();
    for r in rows {
        by_video
            .entry(r.video_id.as_str())
            .or_default()
            .insert(r.index, &r.annotation);
    }
    let mut n = 0;
    for v in &mut corpus.videos {
        if let Some(map) = by_video.get(v.video_id.as_str()) {
            for s in &mut v.transcript {
                if let Some(a) = map.get(&s.index) {
                    s.annotation = Some((*a).clone());
                    n += 1;
                }
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Speaker, TranscriptSentence};
    use crate::narrative::mock::{hashed_annotation, MockEndpoint};

    fn transcript(n: usize) -> Vec<TranscriptSentence> {
        (0..n)
            .map(|i| TranscriptSentence {
                index: i as u64,
                start: i as f64 * 3.0,
                end: i as f64 * 3.0 + 2.5,
                speaker: Speaker::Subject,
                text: format!("we walked to the station number {i}"),
                word_onsets: vec![],
                onsets_interpolated: true,
                annotation: None,
            })
            .collect()
    }

    #[test]
    fn valid_mock_reply_round_trips() {
        let t = transcript(5);
        let req = build_context(&t, 2, ContextWindow::default()).unwrap();
        let mock = MockEndpoint::new();
        let mut cache = AnnotationCache::in_memory();
        let out = annotate_sentence(&req, &PromptTemplate::narrative(), &mock, &mut cache, 2).unwrap();
        assert_eq!(out.annotation, hashed_annotation(&t[2].text));
        assert_eq!(out.retries, 0);
        assert!(!out.from_cache);
        let again = annotate_sentence(&req, &PromptTemplate::narrative(), &mock, &mut cache, 2).unwrap();
        assert!(again.from_cache);
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn schema_violation_after_retries() {
        let t = transcript(3);
        let req = build_context(&t, 0, ContextWindow::default()).unwrap();
        let mock = MockEndpoint::new().malformed_first(10);
        let mut cache = AnnotationCache::in_memory();
        let err = annotate_sentence(&req, &PromptTemplate::narrative(), &mock, &mut cache, 2).unwrap_err();
        assert!(matches!(err, NarrativeError::SchemaViolation { attempts: 3, .. }));
        assert_eq!(mock.calls(), 3);
        assert!(cache.is_empty());
    }

    #[test]
    fn succeeds_on_second_attempt() {
        let t = transcript(3);
        let req = build_context(&t, 1, ContextWindow::default()).unwrap();
        let mock = MockEndpoint::new().malformed_first(1);
        let mut cache = AnnotationCache::in_memory();
        let out = annotate_sentence(&req, &PromptTemplate::narrative(), &mock, &mut cache, 2).unwrap();
        assert_eq!(out.retries, 1);
    }

    #[test]
    fn endpoint_errors_surface() {
        let t = transcript(3);
        let req = build_context(&t, 1, ContextWindow::default()).unwrap();
        let mock = MockEndpoint::new().failing_on([t[1].text.clone()]);
        let mut cache = AnnotationCache::in_memory();
        let err = annotate_sentence(&req, &PromptTemplate::narrative(), &mock, &mut cache, 2).unwrap_err();
        assert_eq!(err.code(), "EndpointError");
    }

    #[test]
    fn cache_survives_torn_last_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let key = CacheKey {
            template_hash: "t".into(),
            sentence_hash: "s".into(),
        };
        {
            let mut c = AnnotationCache::open(&path).unwrap();
            c.insert(key.clone(), hashed_annotation("x"), "m").unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"template_hash\":\"t\",\"sent").unwrap();
        drop(f);
        let mut c = AnnotationCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
        let key2 = CacheKey {
            template_hash: "t".into(),
            sentence_hash: "s2".into(),
        };
        c.insert(key2, hashed_annotation("y"), "m").unwrap();
        drop(c);
        let c = AnnotationCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
    }
}
