use serde::{Deserialize, Serialize};

use super::NominalError;
use crate::sim::{Trace, WeatherSeries};

/// Layout of the weather feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Number of current and past samples per weather variable.
    pub lags: usize,
    /// Append sin/cos of the time of day.
    pub time_of_day: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { lags: 12, time_of_day: true }
    }
}

impl FeatureSpec {
    pub fn dimension(&self) -> usize {
        2 * self.lags + if self.time_of_day { 2 } else { 0 }
    }

    /// First row of a series that has a full lag window.
    pub fn first_step(&self) -> usize {
        self.lags.saturating_sub(1)
    }

    fn row(&self, weather: &WeatherSeries, t: usize) -> Vec<f64> {
        let lo = t + 1 - self.lags;
        let mut v = Vec::with_capacity(self.dimension());
        v.extend_from_slice(&weather.outdoor_temp[lo..=t]);
        v.extend_from_slice(&weather.irradiance[lo..=t]);
        if self.time_of_day {
            let phase = std::f64::consts::TAU * (weather.timestamps[t] % 1440) as f64 / 1440.0;
            v.push(phase.sin());
            v.push(phase.cos());
        }
        v
    }
}

/// Raw feature rows for every step `t >= lags - 1`.
pub fn weather_features(weather: &WeatherSeries, spec: &FeatureSpec) -> Result<Vec<Vec<f64>>, NominalError> {
    if spec.lags == 0 {
        return Err(NominalError::InvalidHyper("lags must be >= 1".into()));
    }
    if weather.len() < spec.lags {
        return Err(NominalError::TooShort { len: weather.len(), lags: spec.lags });
    }
    Ok((spec.first_step()..weather.len()).map(|t| spec.row(weather, t)).collect())
}

/// `(features, state)` pairs from a request-free trace.
pub fn build_features(trace: &Trace, spec: &FeatureSpec) -> Result<(Vec<Vec<f64>>, Vec<f64>), NominalError> {
    if !trace.is_request_free() {
        return Err(NominalError::NotRequestFree);
    }
    let rows = weather_features(&trace.weather(), spec)?;
    let targets = trace.state[spec.first_step()..].to_vec();
    Ok((rows, targets))
}
