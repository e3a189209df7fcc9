use serde::{Deserialize, Serialize};

use super::EnvelopeError;
use crate::battery::{decompose, SampleSpaces};
use crate::risk::{robust_feasible, RobustConstraint, UncertaintyLevel, WorstCaseParams};

/// Which parameters bound a constant request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibilityMode {
    /// Only the worst-case (largest) coefficient for the request sign.
    #[default]
    Ceiling,
    /// Both the largest and the smallest coefficient, so that weather
    /// drift opposing the request is also covered.
    Strict,
}

fn state_path_ok(p: f64, a: f64, s0: f64, f_values: &[f64]) -> bool {
    let f0 = f_values[0];
    f_values.iter().enumerate().all(|(l, f)| {
        let s = s0 + a * p * l as f64 + f - f0;
        (0.0..=1.0).contains(&s)
    })
}

fn coefficients(p: f64, worst: &WorstCaseParams, mode: FeasibilityMode) -> Vec<f64> {
    let (hi, lo) = if p > 0.0 { (worst.a_plus_tilde, worst.a_plus_floor) } else { (worst.a_minus_tilde, worst.a_minus_floor) };
    match mode {
        FeasibilityMode::Ceiling => vec![hi],
        FeasibilityMode::Strict => vec![hi, lo],
    }
}

/// Whether the constant request `p` held for `f_values.len() - 1` steps
/// keeps the predicted state in `[0, 1]` at every step.
///
/// With no zero requests the recovery term never acts, so `b_f` plays no role.
pub fn feasible_constant(
    p: f64,
    s0: f64,
    f_values: &[f64],
    worst: &WorstCaseParams,
    mode: FeasibilityMode,
) -> Result<bool, EnvelopeError> {
    if p == 0.0 {
        return Err(EnvelopeError::ZeroRequest);
    }
    if f_values.is_empty() {
        return Err(EnvelopeError::ForecastTooShort { needed: 1, got: 0 });
    }
    Ok(coefficients(p, worst, mode).into_iter().all(|a| state_path_ok(p, a, s0, f_values)))
}

/// Largest `k <= cap` for which [`feasible_constant`] holds, scanning
/// forward and stopping at the first violation. `f_values` needs
/// `cap + 1` entries.
pub fn max_constant_duration(
    p: f64,
    s0: f64,
    f_values: &[f64],
    cap: usize,
    worst: &WorstCaseParams,
    mode: FeasibilityMode,
) -> Result<usize, EnvelopeError> {
    if f_values.len() < cap + 1 {
        return Err(EnvelopeError::ForecastTooShort { needed: cap + 1, got: f_values.len() });
    }
    if p == 0.0 {
        return Ok(cap);
    }
    let coeffs = coefficients(p, worst, mode);
    let ok = |s: f64| (0.0..=1.0).contains(&s);
    let f0 = f_values[0];
    if !ok(s0) {
        return Ok(0);
    }
    let first_bad = f_values[1..=cap].iter().zip(1..).find(|&(f, l)| {
        let drift = f - f0;
        !coeffs.iter().all(|a| ok(s0 + a * p * l as f64 + drift))
    });
    Ok(first_bad.map_or(cap, |(_, l)| l - 1))
}

/// Robust feasibility of an arbitrary request trajectory: every
/// intermediate state must stay in `[0, 1]` for all parameters in the
/// uncertainty set.
pub fn feasible_trajectory(
    requests: &[f64],
    s0: f64,
    f_values: &[f64],
    spaces: &SampleSpaces,
    level: UncertaintyLevel,
    b_f: f64,
) -> Result<bool, EnvelopeError> {
    if f_values.len() != requests.len() + 1 {
        return Err(EnvelopeError::ForecastTooShort { needed: requests.len() + 1, got: f_values.len() });
    }
    for l in 0..=requests.len() {
        let d = decompose(s0, &requests[..l], &f_values[..=l], b_f)?;
        if !robust_feasible(&RobustConstraint::from_decomposition(&d), spaces, level)? {
            return Ok(false);
        }
    }
    Ok(true)
}
