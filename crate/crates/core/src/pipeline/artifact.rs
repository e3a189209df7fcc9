use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::battery::SampleSpaces;
use crate::io::write_atomic;
use crate::nominal::NominalModel;
use crate::risk::{worst_case_params, UncertaintyLevel, WorstCaseParams};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical config used for fitting.
    pub config_hash: String,
    pub seed: u64,
    pub timestep_minutes: u32,
    pub nominal_rows: usize,
    pub request_rows: usize,
}

/// Worst-case coefficients for one configured risk level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub spec: String,
    pub j: usize,
    pub n_total: usize,
    pub alpha: f64,
    pub worst: WorstCaseParams,
}

/// Everything needed to predict envelopes without the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub nominal: NominalModel,
    pub holdout_rmse: f64,
    pub spaces: SampleSpaces,
    pub b_f: f64,
    pub levels: Vec<LevelEntry>,
    pub provenance: Provenance,
}

impl ModelArtifact {
    pub fn worst_case(&self, level: UncertaintyLevel) -> Result<WorstCaseParams, PipelineError> {
        Ok(worst_case_params(&self.spaces, level)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let a: Self = serde_json::from_str(text).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        if a.version != ARTIFACT_VERSION {
            return Err(PipelineError::Artifact(format!("unsupported artifact version {}", a.version)));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        Ok(write_atomic(path, self.to_json().as_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput {
            path: path.display().to_string(),
            hint: "run `fit` first",
        })?;
        Self::from_json(&text)
    }
}
