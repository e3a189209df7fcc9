use super::{SimConfig, SimError, Trace};
use crate::envelope::{EnvelopeGrid, FlexibilityEnvelope};
use crate::par::{self, Execution};

/// Comfort-band slack for ground-truth violation checks, °C.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Number of steps a constant relative request `p` can be applied from
/// `start` before the open-loop temperature leaves the band widened by
/// `tolerance`, capped at `cap`.
///
/// The request is applied on top of the logged baseline input with no
/// controller override, starting from the baseline temperature at `start`.
pub fn true_duration(config: &SimConfig, baseline: &Trace, start: usize, p: f64, cap: usize, tolerance: f64) -> usize {
    if p == 0.0 {
        return cap;
    }
    let (lo, hi) = (config.temp_min - tolerance, config.temp_max + tolerance);
    let mut temp = baseline.indoor_temp[start];
    for k in 0..cap {
        let t = start + k;
        let u = (baseline.baseline_fraction[t] + p).clamp(0.0, 1.0);
        temp = config.next_temp(temp, baseline.t_out[t], baseline.irradiance[t], u);
        if !(lo..=hi).contains(&temp) {
            return k;
        }
    }
    cap
}

/// Ground-truth flexibility envelope by re-simulating every cell.
///
/// `baseline` must be a request-free run; cells are independent and are
/// evaluated according to `exec`.
pub fn true_envelope(
    config: &SimConfig,
    baseline: &Trace,
    grid: &EnvelopeGrid,
    tolerance: f64,
    exec: Execution,
) -> Result<FlexibilityEnvelope, SimError> {
    config.validate()?;
    let len = baseline.len();
    for &start in &grid.time_grid {
        if start + grid.cap_steps > len {
            return Err(SimError::GridOutsideHorizon { start, cap: grid.cap_steps, len });
        }
    }
    let n_t = grid.time_grid.len();
    let cells = par::map_indexed(grid.power_grid.len() * n_t, exec, |idx| {
        let (i, j) = (idx / n_t, idx % n_t);
        true_duration(config, baseline, grid.time_grid[j], grid.power_grid[i], grid.cap_steps, tolerance)
    });
    Ok(FlexibilityEnvelope::from_cells(grid, config.steps_per_day(), None, cells))
}
