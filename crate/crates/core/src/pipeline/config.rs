use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::battery::IdentificationOptions;
use crate::envelope::{EnvelopeGrid, FeasibilityMode};
use crate::nominal::{FeatureSpec, SearchGrid};
use crate::risk::{RiskError, UncertaintyLevel};
use crate::sim::{ScheduleParams, SimConfig, WeatherParams, DEFAULT_TOLERANCE};

/// Risk level as written in the config.
///
/// * `"1/N"`, `"7/N"`, `"N/N"`: explicit `j`
/// * `"0.5"`, `"1/4"`: must be an exact multiple of `1/N`
/// * `"~0.5"`: nearest multiple of `1/N`
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Index(usize),
    Last,
    Exact(f64),
    Nearest(f64),
}

impl AlphaSpec {
    pub fn resolve(&self, n_total: usize) -> Result<UncertaintyLevel, RiskError> {
        match *self {
            AlphaSpec::Index(j) => UncertaintyLevel::new(j, n_total),
            AlphaSpec::Last => UncertaintyLevel::new(n_total, n_total),
            AlphaSpec::Exact(a) => UncertaintyLevel::from_alpha(a, n_total),
            AlphaSpec::Nearest(a) => UncertaintyLevel::nearest(a, n_total),
        }
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

impl FromStr for AlphaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid alpha `{s}`: use `j/N`, `N/N`, a value in (0, 1], or `~value`");
        let in_range = |a: f64| if a > 0.0 && a <= 1.0 { Ok(a) } else { Err(bad()) };
        if let Some(j) = s.strip_suffix("/N") {
            return match j.trim() {
                "N" => Ok(AlphaSpec::Last),
                j => j.parse::<usize>().ok().filter(|&j| j >= 1).map(AlphaSpec::Index).ok_or_else(bad),
            };
        }
        if let Some(rest) = s.strip_prefix('~') {
            return parse_fraction(rest.trim()).ok_or_else(bad).and_then(in_range).map(AlphaSpec::Nearest);
        }
        parse_fraction(s).ok_or_else(bad).and_then(in_range).map(AlphaSpec::Exact)
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Index(j) => write!(f, "{j}/N"),
            AlphaSpec::Last => write!(f, "N/N"),
            AlphaSpec::Exact(a) => write!(f, "{a}"),
            AlphaSpec::Nearest(a) => write!(f, "~{a}"),
        }
    }
}

impl Serialize for AlphaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub weeks_nominal: usize,
    pub weeks_requests: usize,
    pub schedule: ScheduleParams,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { weeks_nominal: 3, weeks_requests: 3, schedule: ScheduleParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalConfig {
    pub lags: usize,
    pub time_of_day: bool,
    /// Training points kept after stride subsampling.
    pub max_points: usize,
    pub search: SearchGrid,
}

impl Default for NominalConfig {
    fn default() -> Self {
        Self { lags: 12, time_of_day: true, max_points: 2000, search: SearchGrid::default() }
    }
}

impl NominalConfig {
    pub fn feature_spec(&self) -> FeatureSpec {
        FeatureSpec { lags: self.lags, time_of_day: self.time_of_day }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub power_levels: usize,
    pub power_min: f64,
    pub power_max: f64,
    /// Spacing of start times within a day, minutes.
    pub start_every_minutes: u32,
    pub cap_steps: usize,
    pub alphas: Vec<AlphaSpec>,
    pub mode: FeasibilityMode,
    /// Seed the first column from the simulated state instead of `f`.
    pub measured_first_state: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            power_levels: 21,
            power_min: -1.0,
            power_max: 1.0,
            start_every_minutes: 60,
            cap_steps: 288,
            alphas: vec![AlphaSpec::Index(1), AlphaSpec::Nearest(0.5), AlphaSpec::Last],
            mode: FeasibilityMode::Ceiling,
            measured_first_state: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub days: usize,
    /// Comfort-band slack for ground truth, °C.
    pub tolerance: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { days: 3, tolerance: DEFAULT_TOLERANCE }
    }
}

/// Relative paths are resolved against the working directory of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data_dir: String,
    pub artifact: String,
    pub output_dir: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { data_dir: "data".into(), artifact: "model.json".into(), output_dir: "output".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub weather: WeatherParams,
    pub training: TrainingConfig,
    pub nominal: NominalConfig,
    pub identification: IdentificationOptions,
    pub envelope: EnvelopeConfig,
    pub evaluation: EvaluationConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            sim: SimConfig::default(),
            weather: WeatherParams::default(),
            training: TrainingConfig::default(),
            nominal: NominalConfig::default(),
            identification: IdentificationOptions::default(),
            envelope: EnvelopeConfig::default(),
            evaluation: EvaluationConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |field: &str, msg: String| Err(PipelineError::Config(format!("{field}: {msg}")));
        if let Err(e) = self.sim.validate() {
            return bad("sim", e.to_string());
        }
        if 1440 % self.sim.timestep != 0 {
            return bad("sim.timestep", "must divide a day".into());
        }
        if self.training.weeks_nominal == 0 || self.training.weeks_requests == 0 {
            return bad("training", "weeks_nominal and weeks_requests must be >= 1".into());
        }
        if let Err(e) = self.training.schedule.validate() {
            return bad("training.schedule", e);
        }
        if self.nominal.lags == 0 {
            return bad("nominal.lags", "must be >= 1".into());
        }
        if self.nominal.max_points < 2 {
            return bad("nominal.max_points", "must be >= 2".into());
        }
        if let Err(e) = self.identification.validate() {
            return bad("identification", e);
        }
        let env = &self.envelope;
        if env.power_levels == 0 || !(env.power_min < env.power_max) {
            return bad("envelope", "need power_levels >= 1 and power_min < power_max".into());
        }
        if env.start_every_minutes == 0 || !env.start_every_minutes.is_multiple_of(self.sim.timestep) {
            return bad("envelope.start_every_minutes", "must be a positive multiple of the timestep".into());
        }
        if env.cap_steps == 0 {
            return bad("envelope.cap_steps", "must be >= 1".into());
        }
        if env.alphas.is_empty() {
            return bad("envelope.alphas", "at least one alpha is required".into());
        }
        if self.evaluation.days == 0 || !(self.evaluation.tolerance >= 0.0) {
            return bad("evaluation", "days must be >= 1 and tolerance >= 0".into());
        }
        Ok(())
    }

    pub fn steps_per_day(&self) -> usize {
        self.sim.steps_per_day()
    }

    /// Days of evaluation weather: one warm-up day, the evaluation days and
    /// enough look-ahead for the duration cap.
    pub fn evaluation_weather_days(&self) -> usize {
        1 + self.evaluation.days + self.envelope.cap_steps.div_ceil(self.steps_per_day())
    }

    /// Absolute step of the first step of evaluation day `day`.
    pub fn evaluation_day_start(&self, day: usize) -> usize {
        (1 + day) * self.steps_per_day()
    }

    /// Envelope grid for the given evaluation days.
    pub fn envelope_grid(&self, days: std::ops::Range<usize>) -> EnvelopeGrid {
        let stride = (self.envelope.start_every_minutes / self.sim.timestep) as usize;
        let per_day = self.steps_per_day();
        let starts = days.flat_map(|d| (0..per_day).step_by(stride).map(move |t| self.evaluation_day_start(d) + t)).collect();
        EnvelopeGrid::uniform(self.envelope.power_levels, self.envelope.power_min, self.envelope.power_max, starts, self.envelope.cap_steps)
    }
}
