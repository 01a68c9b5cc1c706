use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smilescope_core::stats::{fleiss_kappa, RatingMatrix, StatsError};

use crate::batch::{AnnotationTask, Batch};
use crate::taxonomy::{collapse_binary, BinaryLabel, Taxonomy};
use crate::ServiceError;

const JOURNAL: &str = "journal.jsonl";
const SNAPSHOT: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub task_id: String,
    pub annotator_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
    /// Seconds since the Unix epoch.
    pub submitted_at: u64,
    /// 1 for the first submission, incremented by each resubmission.
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Event {
    Batch(Batch),
    Label(LabelRecord),
}

#[derive(Debug, Clone, Default, PartialEq)]
struct State {
    /// Batches in creation order.
    batches: Vec<Batch>,
    /// Latest record per task and annotator.
    labels: BTreeMap<(String, String), LabelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    batches: Vec<Batch>,
    labels: Vec<LabelRecord>,
}

impl State {
    fn apply(&mut self, e: Event) {
        match e {
            Event::Batch(b) => {
                if !self.batches.iter().any(|x| x.batch_id == b.batch_id) {
                    self.batches.push(b);
                }
            }
            Event::Label(r) => {
                let key = (r.task_id.clone(), r.annotator_id.clone());
                if self.labels.get(&key).is_none_or(|cur| r.revision > cur.revision) {
                    self.labels.insert(key, r);
                }
            }
        }
    }
}

/// Outcome of a label submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub record: LabelRecord,
    /// False when an identical submission at this revision already existed.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub labeled: usize,
    pub assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub batch_id: String,
    /// Tasks rated by every assigned annotator; only these enter the matrices.
    pub complete_items: usize,
    pub raters_per_item: usize,
    pub categories: Vec<String>,
    pub four_class_kappa: Option<f64>,
    pub binary_kappa: Option<f64>,
    /// Complete items on which raters gave more than one label.
    pub disagreements: Vec<String>,
}

/// Label store: an append-only JSONL journal plus a periodic snapshot.
/// Replaying the journal over the snapshot reconstructs the state.
pub struct Store {
    dir: Option<PathBuf>,
    state: State,
    journal: Option<File>,
    since_snapshot: usize,
    snapshot_every: usize,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            state: State::default(),
            journal: None,
            since_snapshot: 0,
            snapshot_every: usize::MAX,
        }
    }

    pub fn open(dir: &Path, snapshot_every: usize) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
        let mut state = State::default();
        let snap = dir.join(SNAPSHOT);
        if snap.exists() {
            let text = std::fs::read_to_string(&snap).map_err(|e| ServiceError::io(&snap, e))?;
            let s: Snapshot = serde_json::from_str(&text).map_err(|e| ServiceError::Corrupt(format!("snapshot: {e}")))?;
            for b in s.batches {
                state.apply(Event::Batch(b));
            }
            for r in s.labels {
                state.apply(Event::Label(r));
            }
        }
        let jpath = dir.join(JOURNAL);
        let mut replayed = 0;
        if jpath.exists() {
            let f = File::open(&jpath).map_err(|e| ServiceError::io(&jpath, e))?;
            let lines: Vec<String> = BufReader::new(f)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| ServiceError::io(&jpath, e))?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(line) {
                    Ok(e) => {
                        state.apply(e);
                        replayed += 1;
                    }
                    // a torn final line is an interrupted write
                    Err(_) if i + 1 == last => {}
                    Err(e) => return Err(ServiceError::Corrupt(format!("journal line {}: {e}", i + 1))),
                }
            }
        }
        let journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&jpath)
            .map_err(|e| ServiceError::io(&jpath, e))?;
        let mut store = Self {
            dir: Some(dir.to_path_buf()),
            state,
            journal: Some(journal),
            since_snapshot: replayed,
            snapshot_every: snapshot_every.max(1),
        };
        if replayed > 0 {
            store.snapshot()?;
        }
        Ok(store)
    }

    /// Journal the event, apply it, and snapshot when due.
    fn commit(&mut self, e: Event) -> Result<(), ServiceError> {
        if let (Some(f), Some(dir)) = (&mut self.journal, &self.dir) {
            let line = serde_json::to_string(&e).expect("event serializes");
            writeln!(f, "{line}")
                .and_then(|_| f.flush())
                .map_err(|err| ServiceError::io(&dir.join(JOURNAL), err))?;
            self.since_snapshot += 1;
        }
        self.state.apply(e);
        if self.journal.is_some() && self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Write the full state atomically, then empty the journal.
    pub fn snapshot(&mut self) -> Result<(), ServiceError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let snap = Snapshot {
            batches: self.state.batches.clone(),
            labels: self.state.labels.values().cloned().collect(),
        };
        let tmp = dir.join("snapshot.json.tmp");
        let path = dir.join(SNAPSHOT);
        std::fs::write(&tmp, serde_json::to_string(&snap).expect("snapshot serializes"))
            .map_err(|e| ServiceError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))?;
        let jpath = dir.join(JOURNAL);
        let f = OpenOptions::new()
            .write(true)
            .truncate(true)
            .open(&jpath)
            .map_err(|e| ServiceError::io(&jpath, e))?;
        drop(f);
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn add_batch(&mut self, batch: Batch) -> Result<(), ServiceError> {
        if self.state.batches.iter().any(|b| b.batch_id == batch.batch_id) {
            return Err(ServiceError::DuplicateBatch(batch.batch_id));
        }
        for t in &batch.tasks {
            if self.find_task(&t.task_id).is_some() {
                return Err(ServiceError::DuplicateTask(t.task_id.clone()));
            }
        }
        self.commit(Event::Batch(batch))
    }

    pub fn batches(&self) -> &[Batch] {
        &self.state.batches
    }

    pub fn batch(&self, batch_id: &str) -> Option<&Batch> {
        self.state.batches.iter().find(|b| b.batch_id == batch_id)
    }

    pub fn find_task(&self, task_id: &str) -> Option<(&Batch, &AnnotationTask)> {
        self.state
            .batches
            .iter()
            .find_map(|b| b.task(task_id).map(|t| (b, t)))
    }

    fn is_assigned(batch: &Batch, task_id: &str, annotator: &str) -> bool {
        batch
            .assignments
            .get(task_id)
            .is_some_and(|l| l.iter().any(|a| a == annotator))
    }

    /// Earliest assigned task without a label, across batches in creation order.
    pub fn next_task<'a>(&'a self, annotator: &'a str) -> Option<&'a AnnotationTask> {
        self.state.batches.iter().flat_map(|b| b.queue(annotator)).find(|t| {
            !self
                .state
                .labels
                .contains_key(&(t.task_id.clone(), annotator.to_string()))
        })
    }

    pub fn progress(&self, annotator: &str) -> Progress {
        let mut p = Progress { labeled: 0, assigned: 0 };
        for t in self.state.batches.iter().flat_map(|b| b.queue(annotator)) {
            p.assigned += 1;
            if self.state.labels.contains_key(&(t.task_id.clone(), annotator.to_string())) {
                p.labeled += 1;
            }
        }
        p
    }

    pub fn label(&self, task_id: &str, annotator: &str) -> Option<&LabelRecord> {
        self.state.labels.get(&(task_id.to_string(), annotator.to_string()))
    }

    /// Record a label. `revision` must be one past the stored revision; the
    /// stored revision with identical content is accepted as a no-op.
    pub fn submit(
        &mut self,
        task_id: &str,
        annotator: &str,
        label: &str,
        free_text: Option<String>,
        revision: u64,
        now: u64,
    ) -> Result<Submitted, ServiceError> {
        let (batch, task) = self
            .find_task(task_id)
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        if !Self::is_assigned(batch, task_id, annotator) {
            return Err(ServiceError::UnknownTask(task_id.to_string()));
        }
        if !task.taxonomy.accepts(label) {
            return Err(ServiceError::UnknownLabel {
                label: label.to_string(),
                taxonomy: task.taxonomy,
            });
        }
        let current = self.label(task_id, annotator);
        let cur_rev = current.map_or(0, |r| r.revision);
        if let Some(cur) = current {
            if revision == cur_rev && cur.label == label && cur.free_text == free_text {
                return Ok(Submitted {
                    record: cur.clone(),
                    created: false,
                });
            }
        }
        if revision != cur_rev + 1 {
            return Err(ServiceError::StaleRevision {
                current: cur_rev,
                submitted: revision,
            });
        }
        let record = LabelRecord {
            task_id: task_id.to_string(),
            annotator_id: annotator.to_string(),
            label: label.to_string(),
            free_text,
            submitted_at: now,
            revision,
        };
        self.commit(Event::Label(record.clone()))?;
        Ok(Submitted { record, created: true })
    }

    /// Latest record per task and annotator, ordered by task then annotator.
    pub fn export(&self, batch_id: &str) -> Result<Vec<LabelRecord>, ServiceError> {
        let batch = self
            .batch(batch_id)
            .ok_or_else(|| ServiceError::UnknownBatch(batch_id.to_string()))?;
        let mut out: Vec<LabelRecord> = batch
            .tasks
            .iter()
            .flat_map(|t| {
                batch.assignments[&t.task_id]
                    .iter()
                    .filter_map(|a| self.label(&t.task_id, a).cloned())
            })
            .collect();
        out.sort_by(|a, b| (&a.task_id, &a.annotator_id).cmp(&(&b.task_id, &b.annotator_id)));
        Ok(out)
    }

    pub fn agreement(&self, batch_id: &str) -> Result<AgreementReport, ServiceError> {
        let batch = self
            .batch(batch_id)
            .ok_or_else(|| ServiceError::UnknownBatch(batch_id.to_string()))?;
        let records = self.export(batch_id)?;
        agreement_from_records(batch_id, batch.taxonomy, batch.raters_per_task, &records)
    }
}

/// Rating-matrix rows from exported records: four-class over the taxonomy plus
/// `not-a-smile`, and binary smile versus no-smile. Items count only when
/// rated by `n` annotators.
pub fn rating_matrices(
    taxonomy: Taxonomy,
    n: usize,
    records: &[LabelRecord],
) -> (Vec<String>, Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let cats = taxonomy.categories();
    let mut by_task: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_task.entry(&r.task_id).or_default().push(&r.label);
    }
    let mut four = Vec::new();
    let mut two = Vec::new();
    let mut ids = Vec::new();
    for (task, labels) in by_task {
        if labels.len() != n {
            continue;
        }
        let mut c4 = vec![0u32; cats.len()];
        let mut c2 = vec![0u32; 2];
        for l in labels {
            if let Some(i) = cats.iter().position(|c| c == &l) {
                c4[i] += 1;
            }
            c2[(collapse_binary(l) == BinaryLabel::NoSmile) as usize] += 1;
        }
        ids.push(task.to_string());
        four.push(c4);
        two.push(c2);
    }
    (ids, four, two)
}

pub fn agreement_from_records(
    batch_id: &str,
    taxonomy: Taxonomy,
    n: usize,
    records: &[LabelRecord],
) -> Result<AgreementReport, ServiceError> {
    let (ids, m4, m2) = rating_matrices(taxonomy, n, records);
    let kappa = |counts: &[Vec<u32>]| -> Result<Option<f64>, ServiceError> {
        let checked = match RatingMatrix::new(counts.to_vec()) {
            Ok(c) => c,
            Err(StatsError::EmptyMatrix | StatsError::TooFewRaters(_)) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        match fleiss_kappa(&checked) {
            Ok(k) => Ok(Some(k)),
            Err(StatsError::DegenerateExpectation) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let disagreements = ids
        .iter()
        .zip(&m4)
        .filter(|(_, row)| row.iter().filter(|&&c| c > 0).count() > 1)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(AgreementReport {
        batch_id: batch_id.to_string(),
        complete_items: ids.len(),
        raters_per_item: n,
        categories: taxonomy.categories().iter().map(|s| s.to_string()).collect(),
        four_class_kappa: kappa(&m4)?,
        binary_kappa: kappa(&m2)?,
        disagreements,
    })
}
