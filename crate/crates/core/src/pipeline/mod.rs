//! End-to-end workflow: generate data, fit, predict and evaluate envelopes.
//!
//! Every command reads and writes files under a working directory so the
//! stages can run as separate processes.

mod artifact;
mod commands;
mod config;

pub use artifact::{LevelEntry, ModelArtifact, Provenance, ARTIFACT_VERSION};
pub use commands::{
    evaluate, fit, generate, nominal_series, plot, predict, run_all, EnvelopeReport, EvaluateReport, FitReport,
    GenerateReport, MetricRow, PlotReport, RunReport,
};
pub use config::{
    AlphaSpec, EnvelopeConfig, EvaluationConfig, NominalConfig, PathsConfig, PipelineConfig, TrainingConfig,
};

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::battery::BatteryError;
use crate::envelope::EnvelopeError;
use crate::io::IoError;
use crate::nominal::NominalError;
use crate::par::Execution;
use crate::risk::RiskError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input {path}: {hint}")]
    MissingInput { path: String, hint: &'static str },
    #[error("{0}")]
    OutOfRange(String),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("nominal model: {0}")]
    Nominal(#[from] NominalError),
    #[error("identification: {0}")]
    Battery(#[from] BatteryError),
    #[error("risk: {0}")]
    Risk(#[from] RiskError),
    #[error("envelope: {0}")]
    Envelope(#[from] EnvelopeError),
}

impl PipelineError {
    /// 1 for invalid configuration, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Seed for the named random sub-stream of a run.
///
/// Streams are independent ChaCha streams keyed by the name, so adding a
/// consumer never shifts the draws of another.
pub fn stream_seed(seed: u64, name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let stream = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: PipelineConfig,
    pub root: PathBuf,
    pub exec: Execution,
}

impl Workspace {
    pub fn new(config: PipelineConfig, root: impl Into<PathBuf>) -> Self {
        Self { config, root: root.into(), exec: Execution::default() }
    }

    /// Loads `path`; relative paths resolve against `root` when given,
    /// otherwise against the config file's directory.
    pub fn load(path: &Path, root: Option<&Path>) -> Result<Self, PipelineError> {
        let config = PipelineConfig::load(path)?;
        let root = match root {
            Some(r) => r.to_path_buf(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        Ok(Self::new(config, root))
    }

    fn resolve(&self, p: &str) -> PathBuf {
        self.root.join(p)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.data_dir)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output_dir)
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.resolve(&self.config.paths.artifact)
    }

    pub fn nominal_csv(&self) -> PathBuf {
        self.data_dir().join("nominal.csv")
    }

    pub fn requests_csv(&self) -> PathBuf {
        self.data_dir().join("requests.csv")
    }

    pub fn training_weather_csv(&self) -> PathBuf {
        self.data_dir().join("weather.csv")
    }

    pub fn evaluation_weather_csv(&self) -> PathBuf {
        self.data_dir().join("eval_weather.csv")
    }
}
