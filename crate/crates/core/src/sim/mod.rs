//! Single-zone RC building with a heat pump under PI control.
//!
//! The plant integrates
//!
//! ```text
//! C dT/dt = (T_out - T) / R + P_max u + A_sol I / 1000 + w
//! ```
//!
//! with forward Euler at the configured timestep. The controller tracks a
//! setpoint when no request is active, follows relative input requests
//! while they are active, and always holds the comfort band.

mod plant;
mod schedule;
mod truth;
mod weather;

pub use plant::{simulate, Trace};
pub use schedule::{generate_training_schedule, RequestSchedule, RequestSegment, ScheduleParams, SignPattern};
pub use truth::{true_envelope, true_duration, DEFAULT_TOLERANCE};
pub use weather::{generate_weather, WeatherParams, WeatherSeries};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("weather series has {weather} steps but {needed} are required")]
    HorizonMismatch { weather: usize, needed: usize },
    #[error("non-finite weather value at step {0}")]
    NonFiniteWeather(usize),
    #[error("invalid weather series: {0}")]
    InvalidWeather(String),
    #[error("invalid request schedule: {0}")]
    InvalidSchedule(String),
    #[error("not in heating regime (loss {loss:.3} kW, capacity {capacity:.3} kW)")]
    NonHeatingRegime { loss: f64, capacity: f64 },
    #[error("availability times are both zero")]
    DegenerateState,
    #[error("invalid availability times ({0}, {1})")]
    InvalidTimes(f64, f64),
    #[error("grid outside horizon: start {start} + {cap} steps exceeds {len}")]
    GridOutsideHorizon { start: usize, cap: usize, len: usize },
}

/// Plant, heat pump, controller and comfort parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// K/kW
    pub thermal_resistance: f64,
    /// kWh/K
    pub thermal_capacitance: f64,
    /// kW of heat at full input.
    pub hp_max_thermal_power: f64,
    /// Effective solar aperture in m².
    pub solar_aperture: f64,
    pub temp_min: f64,
    pub temp_max: f64,
    /// 1/K
    pub pi_gain_p: f64,
    /// 1/(K h)
    pub pi_gain_i: f64,
    pub setpoint: f64,
    /// Minutes.
    pub timestep: u32,
    /// Standard deviation of the additive temperature noise, K per step.
    pub noise_std: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            thermal_resistance: 10.0,
            thermal_capacitance: 1.0,
            hp_max_thermal_power: 5.0,
            solar_aperture: 3.0,
            temp_min: 19.0,
            temp_max: 24.0,
            pi_gain_p: 1.0,
            pi_gain_i: 0.5,
            setpoint: 21.5,
            timestep: 5,
            noise_std: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_owned()));
        let all = [
            self.thermal_resistance,
            self.thermal_capacitance,
            self.hp_max_thermal_power,
            self.solar_aperture,
            self.temp_min,
            self.temp_max,
            self.pi_gain_p,
            self.pi_gain_i,
            self.setpoint,
            self.noise_std,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.temp_min < self.setpoint && self.setpoint < self.temp_max) {
            return bad("require temp_min < setpoint < temp_max");
        }
        if self.thermal_resistance <= 0.0 {
            return bad("thermal_resistance must be > 0");
        }
        if self.thermal_capacitance <= 0.0 {
            return bad("thermal_capacitance must be > 0");
        }
        if self.hp_max_thermal_power <= 0.0 {
            return bad("hp_max_thermal_power must be > 0");
        }
        if self.timestep == 0 {
            return bad("timestep must be > 0");
        }
        if self.solar_aperture < 0.0 || self.noise_std < 0.0 {
            return bad("solar_aperture and noise_std must be >= 0");
        }
        if self.pi_gain_p < 0.0 || self.pi_gain_i < 0.0 {
            return bad("PI gains must be >= 0");
        }
        Ok(())
    }

    /// Timestep in hours.
    pub fn dt_hours(&self) -> f64 {
        f64::from(self.timestep) / 60.0
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.timestep) as usize
    }

    /// Steps per hour, rounded down.
    pub fn steps_per_hour(&self) -> usize {
        (60 / self.timestep).max(1) as usize
    }

    /// Heat loss through the envelope in kW.
    pub fn heat_loss(&self, temp: f64, t_out: f64) -> f64 {
        (temp - t_out) / self.thermal_resistance
    }

    /// Solar gain in kW for an irradiance in W/m².
    pub fn solar_gain(&self, irradiance: f64) -> f64 {
        self.solar_aperture * irradiance / 1000.0
    }

    /// Noise-free temperature after one step with input fraction `u`.
    pub fn next_temp(&self, temp: f64, t_out: f64, irradiance: f64, u: f64) -> f64 {
        let net = -self.heat_loss(temp, t_out) + self.hp_max_thermal_power * u + self.solar_gain(irradiance);
        temp + self.dt_hours() / self.thermal_capacitance * net
    }

    /// Input fraction that lands exactly on `target` after one step, unclamped.
    pub fn input_for_target(&self, temp: f64, t_out: f64, irradiance: f64, target: f64) -> f64 {
        let needed = self.thermal_capacitance / self.dt_hours() * (target - temp) + self.heat_loss(temp, t_out)
            - self.solar_gain(irradiance);
        needed / self.hp_max_thermal_power
    }

    /// Steady-state temperature for a constant input with no sun.
    pub fn equilibrium_temp(&self, t_out: f64, u: f64) -> f64 {
        t_out + self.thermal_resistance * self.hp_max_thermal_power * u
    }
}

/// Availability times at minimum and maximum heat-pump power, in hours.
///
/// Returns `(delta_under, delta_over)`: how long the heat pump can stay off
/// before reaching `temp_min`, and how long it can run at full power before
/// reaching `temp_max`, both at the current loss rate.
pub fn state_times(temp: f64, t_out: f64, config: &SimConfig) -> Result<(f64, f64), SimError> {
    let loss = config.heat_loss(temp, t_out);
    let spare = config.hp_max_thermal_power - loss;
    if !(loss > 0.0 && spare > 0.0) {
        return Err(SimError::NonHeatingRegime { loss, capacity: config.hp_max_thermal_power });
    }
    let c = config.thermal_capacitance;
    Ok((c * (temp - config.temp_min) / loss, c * (config.temp_max - temp) / spare))
}

/// Normalized state `delta_under / (delta_under + delta_over)`.
pub fn state_from_times(delta_under: f64, delta_over: f64) -> Result<f64, SimError> {
    if !(delta_under >= 0.0 && delta_over >= 0.0) || !delta_under.is_finite() || !delta_over.is_finite() {
        return Err(SimError::InvalidTimes(delta_under, delta_over));
    }
    let total = delta_under + delta_over;
    if total <= 0.0 {
        return Err(SimError::DegenerateState);
    }
    Ok(delta_under / total)
}
