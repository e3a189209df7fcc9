use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Outdoor conditions on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    /// Minutes since the start of the series.
    pub timestamps: Vec<u64>,
    /// °C
    pub outdoor_temp: Vec<f64>,
    /// W/m²
    pub irradiance: Vec<f64>,
}

impl WeatherSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.timestamps.len();
        if self.outdoor_temp.len() != n || self.irradiance.len() != n {
            return Err(SimError::InvalidWeather("series lengths differ".into()));
        }
        if n >= 2 {
            let dt = self.timestamps[1].saturating_sub(self.timestamps[0]);
            if dt == 0 || self.timestamps.windows(2).any(|w| w[1] <= w[0] || w[1] - w[0] != dt) {
                return Err(SimError::InvalidWeather("timestamps must be strictly increasing and uniform".into()));
            }
        }
        for (i, (t, g)) in self.outdoor_temp.iter().zip(&self.irradiance).enumerate() {
            if !t.is_finite() || !g.is_finite() {
                return Err(SimError::NonFiniteWeather(i));
            }
        }
        Ok(())
    }

    /// Steps `start..end` as a new series, keeping the original timestamps.
    pub fn slice(&self, start: usize, end: usize) -> WeatherSeries {
        WeatherSeries {
            timestamps: self.timestamps[start..end].to_vec(),
            outdoor_temp: self.outdoor_temp[start..end].to_vec(),
            irradiance: self.irradiance[start..end].to_vec(),
        }
    }
}

/// Shape of the synthetic winter climate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherParams {
    /// Long-run mean outdoor temperature, °C.
    pub mean_temp: f64,
    /// Half of the peak-to-peak daily swing, K.
    pub daily_amplitude: f64,
    /// Stationary standard deviation of the slow drift, K.
    pub drift_std: f64,
    /// Correlation time of the drift, hours.
    pub drift_hours: f64,
    /// Clear-sky noon irradiance, W/m².
    pub peak_irradiance: f64,
    /// Hard clip on outdoor temperature, °C.
    pub temp_floor: f64,
    pub temp_ceiling: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            mean_temp: 1.0,
            daily_amplitude: 4.0,
            drift_std: 3.0,
            drift_hours: 48.0,
            peak_irradiance: 450.0,
            temp_floor: -15.0,
            temp_ceiling: 14.0,
        }
    }
}

/// Deterministic synthetic winter weather.
///
/// Outdoor temperature is a diurnal sinusoid (minimum near 05:00) plus an
/// AR(1) drift; irradiance is a clipped half-sine between 08:00 and 16:00
/// scaled by a per-day cloudiness factor.
pub fn generate_weather(seed: u64, days: usize, timestep: u32, params: &WeatherParams) -> WeatherSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_day = (24 * 60 / timestep.max(1)) as usize;
    let n = days * per_day;
    let dt_h = f64::from(timestep) / 60.0;
    let phi = (-dt_h / params.drift_hours.max(dt_h)).exp();
    let innov = params.drift_std * (1.0 - phi * phi).sqrt();

    let mut drift = params.drift_std * rng.sample::<f64, _>(StandardNormal);
    let mut clouds = 1.0;
    let mut series = WeatherSeries {
        timestamps: Vec::with_capacity(n),
        outdoor_temp: Vec::with_capacity(n),
        irradiance: Vec::with_capacity(n),
    };
    for step in 0..n {
        if step % per_day == 0 {
            clouds = rng.gen_range(0.15..1.0);
        }
        let minutes = step as u64 * u64::from(timestep);
        let hour = (minutes % 1440) as f64 / 60.0;
        let diurnal = -params.daily_amplitude * (std::f64::consts::TAU * (hour - 5.0) / 24.0).cos();
        let t_out = (params.mean_temp + diurnal + drift).clamp(params.temp_floor, params.temp_ceiling);
        let sun = if (8.0..16.0).contains(&hour) {
            (std::f64::consts::PI * (hour - 8.0) / 8.0).sin().max(0.0)
        } else {
            0.0
        };
        series.timestamps.push(minutes);
        series.outdoor_temp.push(t_out);
        series.irradiance.push(params.peak_irradiance * clouds * sun);
        drift = phi * drift + innov * rng.sample::<f64, _>(StandardNormal);
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = WeatherParams::default();
        assert_eq!(generate_weather(3, 2, 5, &p), generate_weather(3, 2, 5, &p));
        assert_ne!(generate_weather(3, 2, 5, &p), generate_weather(4, 2, 5, &p));
    }

    #[test]
    fn one_day_has_288_samples() {
        let w = generate_weather(1, 1, 5, &WeatherParams::default());
        assert_eq!(w.len(), 288);
        w.validate().unwrap();
    }

    #[test]
    fn winter_preset_stays_below_comfort_band() {
        for seed in 0..50 {
            let w = generate_weather(seed, 14, 5, &WeatherParams::default());
            let max = w.outdoor_temp.iter().cloned().fold(f64::MIN, f64::max);
            assert!(max < 19.0, "seed {seed}: max {max}");
            assert!(w.irradiance.iter().all(|&g| g >= 0.0));
        }
    }

    #[test]
    fn validate_catches_problems() {
        let mut w = generate_weather(1, 1, 5, &WeatherParams::default());
        w.outdoor_temp[10] = f64::NAN;
        assert_eq!(w.validate(), Err(SimError::NonFiniteWeather(10)));
        let mut w = generate_weather(1, 1, 5, &WeatherParams::default());
        w.timestamps[3] = w.timestamps[2];
        assert!(w.validate().is_err());
    }
}
