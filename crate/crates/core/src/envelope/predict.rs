use super::{max_constant_duration, EnvelopeError, EnvelopeGrid, FeasibilityMode, FlexibilityEnvelope};
use crate::par::{self, Execution};
use crate::risk::WorstCaseParams;

#[derive(Debug, Clone, Copy, Default)]
pub struct PredictOptions {
    pub mode: FeasibilityMode,
    /// Measured state used instead of the nominal prediction for the first
    /// start time.
    pub first_state: Option<f64>,
    pub exec: Execution,
}

/// Predicted envelope from nominal states over the forecast horizon.
///
/// `nominal[t]` is `f(e_t)` at absolute step `t`. Each column starts from
/// the nominal state at its start time.
pub fn predict_envelope(
    nominal: &[f64],
    grid: &EnvelopeGrid,
    worst: &WorstCaseParams,
    alpha: f64,
    steps_per_day: usize,
    opts: &PredictOptions,
) -> Result<FlexibilityEnvelope, EnvelopeError> {
    let needed = grid.horizon();
    if nominal.len() < needed {
        return Err(EnvelopeError::ForecastTooShort { needed, got: nominal.len() });
    }
    let n_t = grid.time_grid.len();
    let cells = par::try_map_indexed(grid.power_grid.len() * n_t, opts.exec, |idx| {
        let (i, j) = (idx / n_t, idx % n_t);
        let start = grid.time_grid[j];
        let window = &nominal[start..=start + grid.cap_steps];
        let s0 = match opts.first_state {
            Some(s) if j == 0 => s,
            _ => window[0],
        };
        max_constant_duration(grid.power_grid[i], s0, window, grid.cap_steps, worst, opts.mode)
    })?;
    Ok(FlexibilityEnvelope::from_cells(grid, steps_per_day, Some(alpha), cells))
}
