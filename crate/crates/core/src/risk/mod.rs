//! CVaR and the robust uncertainty sets it induces on `(a+, a-)`.
//!
//! With uniform probabilities on the `N = n+ n-` product samples and
//! `alpha = j / N`, the CVaR uncertainty set is the convex hull of all
//! `j`-point averages of distinct product samples. Linear functionals over
//! that hull are maximized by averaging the `j` largest per-sample values,
//! which is what [`support_function`] does.

mod cvar;

pub use cvar::{cvar, cvar_uniform};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{Decomposition, SampleSpaces};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("j = {j} outside 1..={n_total}")]
    LevelOutOfRange { j: usize, n_total: usize },
    #[error("uncertainty level built for N = {level} but the sample spaces have N = {spaces}")]
    SizeMismatch { level: usize, spaces: usize },
    #[error("alpha = {alpha} is not a multiple of 1/{n_total}; nearest valid values are {lower}/{n_total} and {upper}/{n_total}")]
    NotRepresentable { alpha: f64, n_total: usize, lower: usize, upper: usize },
}

/// Risk level `alpha = j / N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UncertaintyLevel {
    j: usize,
    n_total: usize,
}

impl UncertaintyLevel {
    pub fn new(j: usize, n_total: usize) -> Result<Self, RiskError> {
        if j == 0 || j > n_total {
            return Err(RiskError::LevelOutOfRange { j, n_total });
        }
        Ok(Self { j, n_total })
    }

    /// Level for an `alpha` that must be an exact multiple of `1/N`.
    pub fn from_alpha(alpha: f64, n_total: usize) -> Result<Self, RiskError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RiskError::InvalidAlpha(alpha));
        }
        let scaled = alpha * n_total as f64;
        let j = scaled.round();
        if (scaled - j).abs() > 1e-9 * n_total as f64 || j < 1.0 {
            let lower = (scaled.floor() as usize).max(1);
            let upper = (scaled.ceil() as usize).clamp(1, n_total);
            return Err(RiskError::NotRepresentable { alpha, n_total, lower, upper });
        }
        Self::new(j as usize, n_total)
    }

    /// Level with the `j / N` closest to `alpha`.
    pub fn nearest(alpha: f64, n_total: usize) -> Result<Self, RiskError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RiskError::InvalidAlpha(alpha));
        }
        let j = ((alpha * n_total as f64).round() as usize).clamp(1, n_total);
        Self::new(j, n_total)
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn alpha(&self) -> f64 {
        self.j as f64 / self.n_total as f64
    }

    fn check(&self, spaces: &SampleSpaces) -> Result<(), RiskError> {
        if self.n_total != spaces.n_total() {
            return Err(RiskError::SizeMismatch { level: self.n_total, spaces: spaces.n_total() });
        }
        Ok(())
    }
}

/// Extreme coordinates of the uncertainty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseParams {
    pub a_plus_tilde: f64,
    pub a_minus_tilde: f64,
    pub a_plus_floor: f64,
    pub a_minus_floor: f64,
}

/// Mean of the first `j` entries of `values`, each repeated `mult` times.
///
/// Entries are added one copy at a time so the result is bit-identical to
/// summing an explicitly expanded list in the same order.
fn mean_of_first<'a>(values: impl Iterator<Item = &'a f64>, mult: usize, j: usize) -> f64 {
    let sum = values.flat_map(|v| std::iter::repeat_n(v, mult)).take(j).fold(0.0, |acc, v| acc + v);
    sum / j as f64
}

/// Worst-case `(a+, a-)` over the `j`-point averages of the product space.
///
/// In `P+ x P-` every `a+` value occurs `n-` times and every `a-` value
/// `n+` times, so the extreme coordinate averages come from the
/// multiplicity-expanded lists.
pub fn worst_case_params(spaces: &SampleSpaces, level: UncertaintyLevel) -> Result<WorstCaseParams, RiskError> {
    level.check(spaces)?;
    let (j, n_plus, n_minus) = (level.j, spaces.n_plus(), spaces.n_minus());
    Ok(WorstCaseParams {
        a_plus_tilde: mean_of_first(spaces.p_plus.iter().rev(), n_minus, j),
        a_minus_tilde: mean_of_first(spaces.p_minus.iter().rev(), n_plus, j),
        a_plus_floor: mean_of_first(spaces.p_plus.iter(), n_minus, j),
        a_minus_floor: mean_of_first(spaces.p_minus.iter(), n_plus, j),
    })
}

/// `max { d . a : a in U_alpha }` for `d = (d_plus, d_minus)`.
pub fn support_function(spaces: &SampleSpaces, level: UncertaintyLevel, direction: [f64; 2]) -> Result<f64, RiskError> {
    level.check(spaces)?;
    if direction == [0.0, 0.0] {
        return Ok(0.0);
    }
    let mut values: Vec<f64> = Vec::with_capacity(spaces.n_total());
    for &ap in &spaces.p_plus {
        for &am in &spaces.p_minus {
            values.push(direction[0] * ap + direction[1] * am);
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(mean_of_first(values.iter(), 1, level.j))
}

/// One intersect term of the tightened feasible set: both
/// `coeffs . a >= lower` and `-coeffs . a >= upper` must hold for every
/// `a` in the uncertainty set, i.e. `0 <= c + coeffs . a <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustConstraint {
    pub coeff_plus: f64,
    pub coeff_minus: f64,
    /// `-c`
    pub lower: f64,
    /// `c - 1`
    pub upper: f64,
}

impl RobustConstraint {
    pub fn from_decomposition(d: &Decomposition) -> Self {
        Self { coeff_plus: d.coeffs[0], coeff_minus: d.coeffs[1], lower: -d.offset, upper: d.offset - 1.0 }
    }
}

/// Robust membership test for one constraint.
pub fn robust_feasible(constraint: &RobustConstraint, spaces: &SampleSpaces, level: UncertaintyLevel) -> Result<bool, RiskError> {
    let d = [constraint.coeff_plus, constraint.coeff_minus];
    // min_U d.a = -max_U (-d).a
    let min_value = -support_function(spaces, level, [-d[0], -d[1]])?;
    let max_value = support_function(spaces, level, d)?;
    Ok(min_value >= constraint.lower && -max_value >= constraint.upper)
}
