use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use smilescope_core::analysis::PlotPoints;

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "smilescope";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    report: &'a T,
}

#[derive(Serialize)]
struct RunJson<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a [String],
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    details: &'a BTreeMap<String, serde_json::Value>,
    started_at: u64,
    finished_at: u64,
}

/// Collects input hashes and output files of one subcommand, stamps every
/// report with the config hash and finally writes `run.json`.
pub struct Run {
    pub config: RunConfig,
    pub command: String,
    pub config_hash: String,
    pub out: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    details: BTreeMap<String, serde_json::Value>,
    started_at: u64,
}

impl Run {
    pub fn start(config: RunConfig, command: &str) -> Result<Self, CliError> {
        let out = config.out_dir();
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok(Self {
            config_hash: config.hash(),
            config,
            command: command.to_string(),
            out,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            details: BTreeMap::new(),
            started_at: now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let h = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Run-specific facts that belong in `run.json` rather than a report,
    /// e.g. counters that change when a run resumes.
    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("detail serializes");
        self.details.insert(key.to_string(), v);
    }

    /// Record a file written by library code.
    pub fn produced(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn report<T: Serialize>(&mut self, name: &str, report: &T) -> Result<(), CliError> {
        let env = Envelope {
            tool: TOOL,
            version: VERSION,
            command: &self.command,
            config_hash: &self.config_hash,
            report,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("report serializes");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Plot-point CSV with the config hash on the second comment line.
    pub fn figure(&mut self, name: &str, fig: &dyn PlotPoints) -> Result<(), CliError> {
        let csv = fig.to_csv();
        let (first, rest) = csv.split_once('\n').unwrap_or((&csv, ""));
        let text = format!("{first}\n# config_hash: {}\n{rest}", self.config_hash);
        self.write_bytes(name, text.as_bytes())
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(r).expect("row serializes"));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("value serializes");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let rec = RunJson {
            tool: TOOL,
            version: VERSION,
            command: &self.command,
            config_hash: &self.config_hash,
            seed: self.config.seed,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            details: &self.details,
            started_at: self.started_at,
            finished_at: now(),
        };
        let p = self.out.join("run.json");
        let mut text = serde_json::to_string_pretty(&rec).expect("run record serializes");
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}
