//! HTTP backend for human smile labeling: task queues per annotator, a
//! journaled label store, JSONL export and agreement statistics.

mod api;
mod batch;
mod store;
mod taxonomy;

use std::path::Path;

use axum::http::StatusCode;
use thiserror::Error;

pub use api::{router, AppState, Auth, BatchRequest, LabelRequest, NextTask};
pub use batch::{
    build_tasks, create_batch, AnnotationTask, Batch, ClipTrace, ExcerptSentence, CLIP_AFTER,
    CLIP_BEFORE, TRACE_RATE,
};
pub use store::{
    agreement_from_records, rating_matrices, AgreementReport, LabelRecord, Progress, Store,
    Submitted,
};
pub use taxonomy::{collapse_binary, BinaryLabel, Taxonomy, NOT_A_SMILE};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("label {label:?} is not in the {taxonomy:?} taxonomy")]
    UnknownLabel { label: String, taxonomy: Taxonomy },
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown batch {0}")]
    UnknownBatch(String),
    #[error("unknown video {0}")]
    UnknownVideo(String),
    #[error("revision {submitted} does not follow stored revision {current}")]
    StaleRevision { current: u64, submitted: u64 },
    #[error("missing or unknown token")]
    BadToken,
    #[error("need {needed} annotators per task, have {available}")]
    NotEnoughAnnotators { needed: usize, available: usize },
    #[error("batch has no tasks")]
    EmptyBatch,
    #[error("batch {0} already exists")]
    DuplicateBatch(String),
    #[error("task {0} already exists")]
    DuplicateTask(String),
    #[error("task {0} does not use the batch taxonomy")]
    TaxonomyMismatch(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("requested range not satisfiable")]
    RangeNotSatisfiable,
    #[error("store is corrupt: {0}")]
    Corrupt(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stats(#[from] smilescope_core::stats::StatsError),
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownLabel { .. } => "UnknownLabel",
            ServiceError::UnknownTask(_) => "UnknownTask",
            ServiceError::UnknownBatch(_) => "UnknownBatch",
            ServiceError::UnknownVideo(_) => "UnknownVideo",
            ServiceError::StaleRevision { .. } => "StaleRevision",
            ServiceError::BadToken => "BadToken",
            ServiceError::NotEnoughAnnotators { .. } => "NotEnoughAnnotators",
            ServiceError::EmptyBatch => "EmptyBatch",
            ServiceError::DuplicateBatch(_) => "DuplicateBatch",
            ServiceError::DuplicateTask(_) => "DuplicateTask",
            ServiceError::TaxonomyMismatch(_) => "TaxonomyMismatch",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::RangeNotSatisfiable => "RangeNotSatisfiable",
            ServiceError::Corrupt(_) => "Corrupt",
            ServiceError::Io { .. } => "Io",
            ServiceError::Stats(e) => e.code(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownLabel { .. }
            | ServiceError::NotEnoughAnnotators { .. }
            | ServiceError::EmptyBatch
            | ServiceError::TaxonomyMismatch(_)
            | ServiceError::UnknownVideo(_)
            | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownTask(_) | ServiceError::UnknownBatch(_) => StatusCode::NOT_FOUND,
            ServiceError::StaleRevision { .. }
            | ServiceError::DuplicateBatch(_)
            | ServiceError::DuplicateTask(_) => StatusCode::CONFLICT,
            ServiceError::BadToken => StatusCode::UNAUTHORIZED,
            ServiceError::RangeNotSatisfiable => StatusCode::RANGE_NOT_SATISFIABLE,
            ServiceError::Stats(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Corrupt(_) | ServiceError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}
