//! `smilescope` command line: each subcommand reads a corpus manifest and
//! writes its reports plus a `run.json` into `--out`.

mod analyze;
mod config;
mod error;
mod pipeline;
mod record;
mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{Ablation, AnalysisConfig, AnnotateConfig, Overrides, RunConfig, TrainingConfig, TOKEN_ENV};
pub use error::CliError;
pub use record::{sha256_file, Run, TOOL, VERSION};

#[derive(Debug, Parser)]
#[command(name = "smilescope", version, about = "Smile detection and narrative analysis over AU time series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML (or JSON) run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Detector probability threshold in [0, 1].
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Trained detector file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Timeline,
    Topics,
    Rates,
    Trajectories,
    GazeBlink,
    Alignment,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Timeline => "timeline",
            Study::Topics => "topics",
            Study::Rates => "rates",
            Study::Trajectories => "trajectories",
            Study::GazeBlink => "gaze-blink",
            Study::Alignment => "alignment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaxonomyArg {
    Social,
    Authenticity,
}

impl From<TaxonomyArg> for smilescope_service::Taxonomy {
    fn from(t: TaxonomyArg) -> Self {
        match t {
            TaxonomyArg::Social => smilescope_service::Taxonomy::Social,
            TaxonomyArg::Authenticity => smilescope_service::Taxonomy::Authenticity,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate every bundle of the manifest.
    IngestCheck,
    /// Smile candidates from smoothed AU12.
    Extract,
    /// Fit the candidate classifier with cross-validation.
    TrainDetector {
        /// Synthetic ledger supplying ground-truth labels.
        #[arg(long, conflicts_with = "labels")]
        ledger: Option<PathBuf>,
        /// JSONL of `{video_id, start, end, smile}`; a candidate is positive
        /// when it overlaps a segment marked as a smile.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Keep candidates the detector scores at or above θ.
    Detect {
        /// Score detections against a synthetic ledger.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Narrative annotation of every transcript sentence through a chat endpoint.
    Annotate {
        /// Use the deterministic in-process endpoint.
        #[arg(long)]
        mock: bool,
    },
    /// Run one corpus study.
    Analyze {
        study: Study,
        /// Smile segments (JSONL), e.g. `detect` output.
        #[arg(long)]
        smiles: Option<PathBuf>,
        /// Narrative annotations (JSONL), e.g. `annotate` output.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Human valence judgments (JSONL) for `alignment`.
        #[arg(long)]
        human: Option<PathBuf>,
    },
    /// Write a synthetic corpus with planted effects and its ground-truth ledger.
    Synth,
    /// Fleiss' kappa from an exported label file.
    Agreement {
        #[arg(long)]
        export: PathBuf,
        #[arg(long, value_enum)]
        taxonomy: TaxonomyArg,
        /// Raters per task.
        #[arg(long)]
        raters: usize,
        #[arg(long, default_value = "offline")]
        batch_id: String,
    },
    /// Start the annotation HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long)]
        data_dir: PathBuf,
        /// JSON `{"annotators": {token: id}, "admins": [token]}`.
        #[arg(long)]
        tokens: PathBuf,
        /// Directory of pre-cut `<task_id>.mp4` clips.
        #[arg(long)]
        clips: Option<PathBuf>,
        /// Create a batch from these smile segments at startup (needs --manifest).
        #[arg(long)]
        tasks_from: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "social")]
        taxonomy: TaxonomyArg,
        #[arg(long, value_delimiter = ',')]
        annotators: Vec<String>,
        #[arg(long, default_value_t = 2)]
        raters: usize,
        #[arg(long, default_value = "batch-1")]
        batch_id: String,
    },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::IngestCheck => "ingest-check".into(),
            Command::Extract => "extract".into(),
            Command::TrainDetector { .. } => "train-detector".into(),
            Command::Detect { .. } => "detect".into(),
            Command::Annotate { .. } => "annotate".into(),
            Command::Analyze { study, .. } => format!("analyze {}", study.name()),
            Command::Synth => "synth".into(),
            Command::Agreement { .. } => "agreement".into(),
            Command::Serve { .. } => "serve".into(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let cfg = RunConfig::load(
        g.config.as_deref(),
        Overrides {
            manifest: g.manifest,
            out: g.out,
            model: g.model,
            theta: g.theta,
            seed: g.seed,
            jobs: g.jobs,
        },
    )?;
    if let Some(n) = cfg.jobs {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let name = cli.command.name();
    if let Command::Serve {
        port,
        bind,
        data_dir,
        tokens,
        clips,
        tasks_from,
        taxonomy,
        annotators,
        raters,
        batch_id,
    } = cli.command
    {
        return serve::serve(
            &cfg,
            serve::ServeArgs {
                port,
                bind,
                data_dir,
                tokens,
                clips,
                tasks_from,
                taxonomy: taxonomy.into(),
                annotators,
                raters,
                batch_id,
            },
        );
    }
    let mut run = Run::start(cfg, &name)?;
    match cli.command {
        Command::IngestCheck => pipeline::ingest_check(&mut run)?,
        Command::Extract => pipeline::extract(&mut run)?,
        Command::TrainDetector { ledger, labels } => pipeline::train(&mut run, ledger, labels)?,
        Command::Detect { ledger } => pipeline::detect(&mut run, ledger)?,
        Command::Annotate { mock } => pipeline::annotate(&mut run, mock)?,
        Command::Synth => pipeline::synth(&mut run)?,
        Command::Analyze {
            study,
            smiles,
            annotations,
            human,
        } => analyze::analyze(&mut run, study, smiles, annotations, human)?,
        Command::Agreement {
            export,
            taxonomy,
            raters,
            batch_id,
        } => serve::agreement(&mut run, &export, taxonomy.into(), raters, &batch_id)?,
        Command::Serve { .. } => unreachable!("handled above"),
    }
    run.finish()?;
    Ok(())
}
