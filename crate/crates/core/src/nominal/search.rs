use serde::{Deserialize, Serialize};

use super::{FeatureSpec, KernelHyper, NominalError, NominalModel};
use crate::par::Execution;

/// Log-grid for hold-out hyperparameter selection. Lengthscales are
/// isotropic in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchGrid {
    pub lengthscales: Vec<f64>,
    pub ridges: Vec<f64>,
    /// Trailing fraction of the samples held out for validation.
    pub holdout_fraction: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { lengthscales: vec![2.0, 4.0, 8.0, 16.0], ridges: vec![1e-4, 1e-3, 1e-2, 1e-1], holdout_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub hyper: KernelHyper,
    pub holdout_rmse: f64,
}

/// Every `k`-th sample so that at most `max_points` remain.
pub fn subsample<T: Clone>(items: &[T], max_points: usize) -> Vec<T> {
    let stride = items.len().div_ceil(max_points.max(1)).max(1);
    items.iter().step_by(stride).cloned().collect()
}

fn rmse(model: &NominalModel, inputs: &[Vec<f64>], targets: &[f64], exec: Execution) -> Result<f64, NominalError> {
    let pred = model.predict_many(inputs, exec)?;
    let sse: f64 = pred.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / targets.len() as f64).sqrt())
}

/// Picks the grid point with the lowest RMSE on the trailing hold-out block.
///
/// Grid points whose kernel system fails to factorize are skipped.
pub fn select_hyperparameters(
    inputs: &[Vec<f64>],
    targets: &[f64],
    features: FeatureSpec,
    grid: &SearchGrid,
    exec: Execution,
) -> Result<SearchResult, NominalError> {
    let n = inputs.len();
    if !(grid.holdout_fraction > 0.0 && grid.holdout_fraction < 1.0) {
        return Err(NominalError::InvalidHyper("holdout_fraction must lie in (0, 1)".into()));
    }
    if grid.lengthscales.is_empty() || grid.ridges.is_empty() {
        return Err(NominalError::InvalidHyper("empty search grid".into()));
    }
    let split = n - ((n as f64 * grid.holdout_fraction).round() as usize).clamp(1, n.saturating_sub(2));
    if split < 2 {
        return Err(NominalError::TooFewSamples(n));
    }
    let dim = inputs[0].len();
    let mut best: Option<SearchResult> = None;
    for &ls in &grid.lengthscales {
        for &ridge in &grid.ridges {
            let hyper = KernelHyper::isotropic(dim, ls, ridge);
            let model = match NominalModel::fit(&inputs[..split], &targets[..split], features, &hyper, exec) {
                Ok(m) => m,
                Err(NominalError::Factorization) => continue,
                Err(e) => return Err(e),
            };
            let score = rmse(&model, &inputs[split..], &targets[split..], exec)?;
            if best.as_ref().is_none_or(|b| score < b.holdout_rmse) {
                best = Some(SearchResult { hyper, holdout_rmse: score });
            }
        }
    }
    best.ok_or(NominalError::Factorization)
}
