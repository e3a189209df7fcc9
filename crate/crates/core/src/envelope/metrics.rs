use serde::{Deserialize, Serialize};

use super::{EnvelopeError, FlexibilityEnvelope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: usize,
    pub cells: usize,
    pub infeasible_fraction: f64,
    pub mean_abs_error: f64,
}

/// Prediction quality against a ground-truth envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMetrics {
    pub cells: usize,
    /// Fraction of cells where the prediction exceeds the truth.
    pub infeasible_fraction: f64,
    /// Mean absolute duration error in steps.
    pub mean_abs_error: f64,
    pub per_day: Vec<DayMetrics>,
}

#[derive(Default)]
struct Tally {
    cells: usize,
    optimistic: usize,
    abs_err: u64,
}

impl Tally {
    fn add(&mut self, pred: usize, truth: usize) {
        self.cells += 1;
        self.optimistic += usize::from(pred > truth);
        self.abs_err += pred.abs_diff(truth) as u64;
    }

    fn fractions(&self) -> (f64, f64) {
        if self.cells == 0 {
            return (0.0, 0.0);
        }
        (self.optimistic as f64 / self.cells as f64, self.abs_err as f64 / self.cells as f64)
    }
}

/// Compares a predicted envelope with the truth on the same grid, overall
/// and per day of the start time.
pub fn evaluate(predicted: &FlexibilityEnvelope, truth: &FlexibilityEnvelope) -> Result<EnvelopeMetrics, EnvelopeError> {
    if !predicted.same_grid(truth) || predicted.steps_per_day != truth.steps_per_day {
        return Err(EnvelopeError::GridMismatch);
    }
    let per_day_len = predicted.steps_per_day.max(1);
    let mut total = Tally::default();
    let mut days: std::collections::BTreeMap<usize, Tally> = Default::default();
    for (pred_row, true_row) in predicted.durations.iter().zip(&truth.durations) {
        for (j, (&p, &t)) in pred_row.iter().zip(true_row).enumerate() {
            total.add(p, t);
            days.entry(predicted.time_grid[j] / per_day_len).or_default().add(p, t);
        }
    }
    let (infeasible_fraction, mean_abs_error) = total.fractions();
    let per_day = days
        .into_iter()
        .map(|(day, tally)| {
            let (inf, mae) = tally.fractions();
            DayMetrics { day, cells: tally.cells, infeasible_fraction: inf, mean_abs_error: mae }
        })
        .collect();
    Ok(EnvelopeMetrics { cells: total.cells, infeasible_fraction, mean_abs_error, per_day })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::EnvelopeGrid;

    fn env(cells: Vec<usize>) -> FlexibilityEnvelope {
        let grid = EnvelopeGrid::uniform(2, -1.0, 1.0, vec![0, 144, 288, 432], 288);
        FlexibilityEnvelope::from_cells(&grid, 288, None, cells)
    }

    #[test]
    fn identical_is_zero() {
        let e = env(vec![3, 0, 288, 17, 5, 5, 100, 2]);
        let m = evaluate(&e, &e).unwrap();
        assert_eq!((m.infeasible_fraction, m.mean_abs_error), (0.0, 0.0));
        assert_eq!(m.per_day.len(), 2);
    }

    #[test]
    fn pessimistic_by_one() {
        let truth = env(vec![3, 0, 288, 17, 5, 5, 100, 2]);
        let pred = env(truth.cells().map(|d| d.saturating_sub(1)).collect());
        let m = evaluate(&pred, &truth).unwrap();
        assert_eq!(m.infeasible_fraction, 0.0);
        assert!(m.mean_abs_error <= 1.0);
    }

    #[test]
    fn counts_optimistic_cells_per_day() {
        let truth = env(vec![10; 8]);
        let pred = env(vec![12, 10, 10, 10, 9, 10, 10, 10]);
        let m = evaluate(&pred, &truth).unwrap();
        assert_eq!(m.infeasible_fraction, 1.0 / 8.0);
        assert_eq!(m.mean_abs_error, 3.0 / 8.0);
        assert_eq!(m.per_day[0].infeasible_fraction, 0.25);
        assert_eq!(m.per_day[1].infeasible_fraction, 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let a = env(vec![1; 8]);
        let mut b = a.clone();
        b.time_grid[0] = 1;
        assert_eq!(evaluate(&a, &b), Err(EnvelopeError::GridMismatch));
    }
}
