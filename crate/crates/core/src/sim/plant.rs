use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{state_from_times, state_times, RequestSchedule, SimConfig, SimError, WeatherSeries};

/// Logged run of the plant. Row `t` holds the conditions at the start of
/// step `t` and the input applied during it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// Minutes since the start of the weather series.
    pub timestamps: Vec<u64>,
    pub t_out: Vec<f64>,
    pub irradiance: Vec<f64>,
    pub indoor_temp: Vec<f64>,
    pub state: Vec<f64>,
    pub power_fraction: Vec<f64>,
    pub baseline_fraction: Vec<f64>,
    pub request: Vec<f64>,
    /// Hours.
    pub delta_under: Vec<f64>,
    /// Hours.
    pub delta_over: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn weather(&self) -> WeatherSeries {
        WeatherSeries {
            timestamps: self.timestamps.clone(),
            outdoor_temp: self.t_out.clone(),
            irradiance: self.irradiance.clone(),
        }
    }

    pub fn is_request_free(&self) -> bool {
        self.request.iter().all(|&r| r == 0.0)
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Trace {
        let cut = |v: &Vec<f64>| v[start..end].to_vec();
        Trace {
            timestamps: self.timestamps[start..end].to_vec(),
            t_out: cut(&self.t_out),
            irradiance: cut(&self.irradiance),
            indoor_temp: cut(&self.indoor_temp),
            state: cut(&self.state),
            power_fraction: cut(&self.power_fraction),
            baseline_fraction: cut(&self.baseline_fraction),
            request: cut(&self.request),
            delta_under: cut(&self.delta_under),
            delta_over: cut(&self.delta_over),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PlantState {
    pub temp: f64,
    pub integral: f64,
}

impl SimConfig {
    /// Input that keeps the next temperature inside the comfort band.
    pub(crate) fn hold_band(&self, temp: f64, t_out: f64, irradiance: f64, u: f64) -> f64 {
        let next = self.next_temp(temp, t_out, irradiance, u);
        let held = if next > self.temp_max {
            self.input_for_target(temp, t_out, irradiance, self.temp_max)
        } else if next < self.temp_min {
            self.input_for_target(temp, t_out, irradiance, self.temp_min)
        } else {
            u
        };
        held.clamp(0.0, 1.0)
    }

    /// PI update with conditional integration; returns the input and the
    /// new integrator value.
    pub(crate) fn pi_control(&self, state: PlantState) -> (f64, f64) {
        let error = self.setpoint - state.temp;
        let candidate = state.integral + self.pi_gain_i * self.dt_hours() * error;
        let raw = self.pi_gain_p * error + candidate;
        let u = raw.clamp(0.0, 1.0);
        let integral = if raw == u { candidate } else { state.integral };
        (u, integral)
    }

    pub(crate) fn initial_plant_state(&self, t_out: f64, irradiance: f64) -> PlantState {
        let feedforward = (self.heat_loss(self.setpoint, t_out) - self.solar_gain(irradiance)) / self.hp_max_thermal_power;
        PlantState { temp: self.setpoint, integral: feedforward.clamp(0.0, 1.0) }
    }
}

struct Run {
    temps: Vec<f64>,
    inputs: Vec<f64>,
}

fn run_plant(
    config: &SimConfig,
    weather: &WeatherSeries,
    requests: &[f64],
    baseline: Option<&[f64]>,
    noise_seed: u64,
) -> Run {
    let n = weather.len();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = (config.noise_std > 0.0).then(|| Normal::new(0.0, config.noise_std).expect("validated std"));

    let mut plant = config.initial_plant_state(weather.outdoor_temp[0], weather.irradiance[0]);
    let mut temps = Vec::with_capacity(n);
    let mut inputs = Vec::with_capacity(n);
    for t in 0..n {
        let (t_out, irr) = (weather.outdoor_temp[t], weather.irradiance[t]);
        temps.push(plant.temp);
        let r = requests[t];
        let wanted = match baseline {
            Some(base) if r != 0.0 => (base[t] + r).clamp(0.0, 1.0),
            _ => {
                let (u, integral) = config.pi_control(plant);
                plant.integral = integral;
                u
            }
        };
        let u = config.hold_band(plant.temp, t_out, irr, wanted);
        inputs.push(u);
        let w = noise.as_ref().map_or(0.0, |d| d.sample(&mut noise_rng));
        plant.temp = config.next_temp(plant.temp, t_out, irr, u) + w;
    }
    Run { temps, inputs }
}

/// Simulates the building over `weather` while serving `schedule`.
///
/// A request-free twin run on the same weather and noise provides the
/// baseline input; during a request the applied input is
/// `clamp(baseline + r, 0, 1)` unless that would leave the comfort band at
/// the next step, in which case the controller holds the bound instead.
/// The PI integrator is frozen while a request is served.
pub fn simulate(
    config: &SimConfig,
    weather: &WeatherSeries,
    schedule: &RequestSchedule,
    noise_seed: u64,
) -> Result<Trace, SimError> {
    config.validate()?;
    weather.validate()?;
    let n = weather.len();
    if let Some(last) = schedule.segments.last() {
        if last.end_step() > n {
            return Err(SimError::HorizonMismatch { weather: n, needed: last.end_step() });
        }
    }
    schedule.validate(n)?;
    if n == 0 {
        return Ok(Trace::default());
    }

    let zeros = vec![0.0; n];
    let base = run_plant(config, weather, &zeros, None, noise_seed);
    let requests = schedule.per_step(n);
    let run = if schedule.is_empty() {
        Run { temps: base.temps.clone(), inputs: base.inputs.clone() }
    } else {
        run_plant(config, weather, &requests, Some(&base.inputs), noise_seed)
    };

    let mut trace = Trace {
        timestamps: weather.timestamps.clone(),
        t_out: weather.outdoor_temp.clone(),
        irradiance: weather.irradiance.clone(),
        indoor_temp: run.temps,
        power_fraction: run.inputs,
        baseline_fraction: base.inputs,
        request: requests,
        ..Trace::default()
    };
    for t in 0..n {
        let temp = trace.indoor_temp[t].clamp(config.temp_min, config.temp_max);
        let (under, over) = state_times(temp, trace.t_out[t], config)?;
        trace.delta_under.push(under);
        trace.delta_over.push(over);
        trace.state.push(state_from_times(under, over)?);
    }
    Ok(trace)
}
