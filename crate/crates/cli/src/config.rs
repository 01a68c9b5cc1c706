use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smilescope_core::analysis::{Facet, OverlapRule, ValenceSource};
use smilescope_core::narrative::{ContextWindow, EndpointConfig, ValenceType, DEFAULT_VALENCE_BAND};
use smilescope_core::smile::FeatureGroup;
use smilescope_core::{ExtractionParams, SynthConfig};

use crate::error::CliError;

/// Environment variable read for the endpoint bearer token when the config
/// names none.
pub const TOKEN_ENV: &str = "SMILESCOPE_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub k: usize,
    pub l2: f64,
    /// Keep each subject's candidates in one fold.
    pub group_by_subject: bool,
    pub ablations: Vec<Ablation>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            k: 10,
            l2: 1.0,
            group_by_subject: true,
            ablations: Vec::new(),
        }
    }
}

/// A feature mask: the named layout groups kept as model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ablation {
    pub name: String,
    pub groups: Vec<FeatureGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub timeline_bins: usize,
    pub topic_window: f64,
    pub strict_onset: bool,
    pub overlap: OverlapRule,
    pub facets: Vec<Facet>,
    pub valence_types: Vec<ValenceType>,
    pub modalities: Vec<ValenceSource>,
    pub band: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            timeline_bins: 10,
            topic_window: 0.5,
            strict_onset: false,
            overlap: OverlapRule::Any,
            facets: vec![Facet::Structure, Facet::Syntax],
            valence_types: vec![ValenceType::Narrative, ValenceType::Present],
            modalities: ValenceSource::ALL.to_vec(),
            band: DEFAULT_VALENCE_BAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateConfig {
    pub template: String,
    pub batch_size: usize,
    pub retries: u32,
    pub window: ContextWindow,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self {
            template: "narrative_v1".into(),
            batch_size: 64,
            retries: 2,
            window: ContextWindow::default(),
        }
    }
}

/// Everything a run depends on. Paths and `jobs` are excluded from the
/// config hash; inputs are hashed by content instead.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Trained detector file.
    pub model: Option<PathBuf>,
    pub theta: Option<f64>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub extraction: ExtractionParams,
    pub training: TrainingConfig,
    pub analysis: AnalysisConfig,
    pub annotate: AnnotateConfig,
    pub endpoint: Option<EndpointConfig>,
    pub synth: SynthConfig,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// Parse TOML, falling back to JSON; a `.json` extension goes straight to JSON.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            return serde_json::from_str(&text).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())));
        }
        match toml::from_str(&text) {
            Ok(c) => Ok(c),
            Err(toml_err) => serde_json::from_str(&text)
                .map_err(|_| CliError::InvalidConfig(format!("{}: {toml_err}", path.display()))),
        }
    }

    pub fn load(path: Option<&Path>, o: Overrides) -> Result<Self, CliError> {
        let mut c = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        c.manifest = o.manifest.or(c.manifest);
        c.out = o.out.or(c.out);
        c.model = o.model.or(c.model);
        c.theta = o.theta.or(c.theta);
        c.jobs = o.jobs.or(c.jobs);
        if let Some(s) = o.seed {
            c.seed = s;
        }
        // one seed drives every random choice
        c.synth.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::InvalidConfig(format!("theta {t} outside [0, 1]")));
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::InvalidConfig("jobs must be at least 1".into()));
        }
        if self.training.k < 2 {
            return Err(CliError::InvalidConfig(format!("training.k = {}", self.training.k)));
        }
        self.extraction
            .validate()
            .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 of the path-free configuration.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.manifest = None;
        c.out = None;
        c.model = None;
        c.jobs = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn manifest(&self) -> Result<&Path, CliError> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::Usage("--manifest is required".into()))
    }

    pub fn endpoint(&self) -> Result<EndpointConfig, CliError> {
        let mut e = self
            .endpoint
            .clone()
            .ok_or_else(|| CliError::InvalidConfig("[endpoint] section is required (or pass --mock)".into()))?;
        if e.token_env.is_none() {
            e.token_env = Some(TOKEN_ENV.into());
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_and_hash_ignores_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 3\ntheta = 0.4\nmanifest = \"a.json\"\n[extraction]\nthreshold = 1.2\n").unwrap();
        let c = RunConfig::load(
            Some(&p),
            Overrides {
                theta: Some(0.6),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.theta, Some(0.6));
        assert_eq!(c.seed, 3);
        assert_eq!(c.synth.seed, 3);
        assert_eq!(c.extraction.threshold, 1.2);
        assert_eq!(c.extraction.sigma, 0.133);
        let mut moved = c.clone();
        moved.manifest = Some("elsewhere.json".into());
        moved.jobs = Some(3);
        assert_eq!(c.hash(), moved.hash());
        moved.seed = 4;
        assert_ne!(c.hash(), moved.hash());
    }

    #[test]
    fn json_fallback_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, r#"{"seed": 9, "training": {"k": 5}}"#).unwrap();
        let c = RunConfig::load(Some(&p), Overrides::default()).unwrap();
        assert_eq!((c.seed, c.training.k), (9, 5));
        let bad = RunConfig::load(
            None,
            Overrides {
                theta: Some(1.5),
                ..Default::default()
            },
        );
        assert!(matches!(bad, Err(CliError::InvalidConfig(_))));
        std::fs::write(&p, "sed = 1\n").unwrap();
        assert!(matches!(RunConfig::load(Some(&p), Overrides::default()), Err(CliError::InvalidConfig(_))));
    }
}
