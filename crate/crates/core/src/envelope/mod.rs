//! Flexibility envelopes: how long each constant relative request can be
//! sustained from each start time.

mod feasibility;
mod metrics;
mod predict;

pub use feasibility::{feasible_constant, feasible_trajectory, max_constant_duration, FeasibilityMode};
pub use metrics::{evaluate, DayMetrics, EnvelopeMetrics};
pub use predict::{predict_envelope, PredictOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::BatteryError;
use crate::risk::RiskError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("constant request must be nonzero")]
    ZeroRequest,
    #[error("need {needed} nominal values, got {got}")]
    ForecastTooShort { needed: usize, got: usize },
    #[error("envelope grids differ")]
    GridMismatch,
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Power levels, start steps and duration cap of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeGrid {
    /// Relative input-fraction requests.
    pub power_grid: Vec<f64>,
    /// Absolute start steps.
    pub time_grid: Vec<usize>,
    pub cap_steps: usize,
}

impl EnvelopeGrid {
    /// `n` evenly spaced power levels over `[lo, hi]`.
    pub fn uniform(n: usize, lo: f64, hi: f64, time_grid: Vec<usize>, cap_steps: usize) -> Self {
        let power_grid = (0..n)
            .map(|i| {
                let p = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                if p.abs() < 1e-12 {
                    0.0
                } else {
                    p
                }
            })
            .collect();
        Self { power_grid, time_grid, cap_steps }
    }

    /// Last step (exclusive) that a forecast must cover.
    pub fn horizon(&self) -> usize {
        self.time_grid.iter().max().map_or(0, |t| t + self.cap_steps + 1)
    }
}

/// Sustainable durations, `durations[i][j]` for power `i` and start `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityEnvelope {
    pub power_grid: Vec<f64>,
    pub time_grid: Vec<usize>,
    pub durations: Vec<Vec<usize>>,
    /// Risk level of a prediction; `None` for ground truth.
    pub alpha: Option<f64>,
    pub cap_steps: usize,
    pub steps_per_day: usize,
}

impl FlexibilityEnvelope {
    pub(crate) fn from_cells(grid: &EnvelopeGrid, steps_per_day: usize, alpha: Option<f64>, cells: Vec<usize>) -> Self {
        let n_t = grid.time_grid.len();
        let durations = if n_t == 0 { vec![Vec::new(); grid.power_grid.len()] } else { cells.chunks(n_t).map(<[usize]>::to_vec).collect() };
        Self {
            power_grid: grid.power_grid.clone(),
            time_grid: grid.time_grid.clone(),
            durations,
            alpha,
            cap_steps: grid.cap_steps,
            steps_per_day,
        }
    }

    pub fn grid(&self) -> EnvelopeGrid {
        EnvelopeGrid { power_grid: self.power_grid.clone(), time_grid: self.time_grid.clone(), cap_steps: self.cap_steps }
    }

    pub fn same_grid(&self, other: &FlexibilityEnvelope) -> bool {
        self.power_grid == other.power_grid && self.time_grid == other.time_grid && self.cap_steps == other.cap_steps
    }

    /// True if every cell of `self` is at most the matching cell of `other`.
    pub fn dominated_by(&self, other: &FlexibilityEnvelope) -> bool {
        self.same_grid(other)
            && self.durations.iter().zip(&other.durations).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y))
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.durations.iter().flatten().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_zero() {
        let g = EnvelopeGrid::uniform(21, -1.0, 1.0, vec![0, 12], 288);
        assert_eq!(g.power_grid.len(), 21);
        assert_eq!(g.power_grid[10], 0.0);
        assert_eq!(g.power_grid[0], -1.0);
        assert_eq!(g.power_grid[20], 1.0);
        assert_eq!(g.horizon(), 12 + 288 + 1);
    }
}
