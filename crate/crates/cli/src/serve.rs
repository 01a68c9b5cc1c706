use std::path::{Path, PathBuf};

use smilescope_core::corpus::ingest_corpus;
use smilescope_core::SmileSegment;
use smilescope_service::{
    agreement_from_records, build_tasks, create_batch, router, AppState, Auth, LabelRecord,
    ServiceError, Store, Taxonomy,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::read_jsonl;
use crate::record::Run;

const SNAPSHOT_EVERY: usize = 500;

pub fn agreement(run: &mut Run, export: &Path, taxonomy: Taxonomy, raters: usize, batch_id: &str) -> Result<(), CliError> {
    run.input(export)?;
    let records: Vec<LabelRecord> = read_jsonl(export)?;
    let report = agreement_from_records(batch_id, taxonomy, raters, &records)?;
    run.report("agreement.json", &report)
}

pub struct ServeArgs {
    pub port: u16,
    pub bind: String,
    pub data_dir: PathBuf,
    pub tokens: PathBuf,
    pub clips: Option<PathBuf>,
    pub tasks_from: Option<PathBuf>,
    pub taxonomy: Taxonomy,
    pub annotators: Vec<String>,
    pub raters: usize,
    pub batch_id: String,
}

pub fn serve(cfg: &RunConfig, a: ServeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.tokens).map_err(|e| CliError::io(&a.tokens, e))?;
    let auth: Auth = serde_json::from_str(&text).map_err(|e| CliError::malformed(&a.tokens, e))?;
    let mut store = Store::open(&a.data_dir, SNAPSHOT_EVERY)?;
    if let Some(path) = &a.tasks_from {
        if store.batch(&a.batch_id).is_none() {
            let corpus = ingest_corpus(cfg.manifest()?)?;
            let segments: Vec<SmileSegment> = read_jsonl(path)?;
            let tasks = build_tasks(&corpus, &segments, a.taxonomy)?;
            let batch = create_batch(&a.batch_id, tasks, a.taxonomy, &a.annotators, a.raters, cfg.seed)?;
            store.add_batch(batch)?;
        }
    }
    let mut state = AppState::new(store, auth);
    state.clips_dir = a.clips;
    let app = router(state);
    let addr = format!("{}:{}", a.bind, a.port);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(Path::new(&addr), e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(Path::new(&addr), e))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Service(ServiceError::io(Path::new(&addr), e)))
    })
}
