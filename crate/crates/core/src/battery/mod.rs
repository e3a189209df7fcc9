//! Virtual battery state equation and its identification from data.
//!
//! The state evolves as
//!
//! ```text
//! s[t+1] = s[t] + a+ r+[t] + a- r-[t] + b (f[t] - s[t]) 1{r[t] = 0} + f[t+1] - f[t]
//! ```
//!
//! where `f` is the nominal (request-free) state predicted from weather.
//! Values outside `[0, 1]` mean the real controller could not serve the
//! request.

mod identify;

pub use identify::{
    extract_episodes, identify, sample_a, sample_b_f, BfAggregation, EpisodeSet, IdentificationOptions,
    RecoveryEpisode, RequestEpisode, SampleSpaces,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("length mismatch: {requests} requests need {expected} nominal values, got {got}")]
    LengthMismatch { requests: usize, expected: usize, got: usize },
    #[error("no request or recovery episodes found; the data lacks excitation")]
    NoEpisodes,
    #[error("episode rejected: {0}")]
    Rejected(&'static str),
    #[error("identification failed: {0}")]
    Identification(String),
}

/// Parameters of one realization of the battery model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_f: f64,
}

/// One step of the state equation.
pub fn step(s: f64, r: f64, f_now: f64, f_next: f64, params: &BatteryParams) -> f64 {
    let recovery = if r == 0.0 { params.b_f * (f_now - s) } else { 0.0 };
    s + params.a_plus * r.max(0.0) + params.a_minus * r.min(0.0) + recovery + f_next - f_now
}

fn check_lengths(requests: &[f64], f_values: &[f64]) -> Result<(), BatteryError> {
    if f_values.len() != requests.len() + 1 {
        return Err(BatteryError::LengthMismatch {
            requests: requests.len(),
            expected: requests.len() + 1,
            got: f_values.len(),
        });
    }
    Ok(())
}

/// Zero-request counts `q[l] = #{i in l..k : r[i] == 0}` for `l = 0..=k`.
pub fn zero_counts(requests: &[f64]) -> Vec<usize> {
    let k = requests.len();
    let mut q = vec![0; k + 1];
    for l in (0..k).rev() {
        q[l] = q[l + 1] + usize::from(requests[l] == 0.0);
    }
    q
}

/// Affine split of the propagated state into a request-free offset and the
/// parts multiplying `a+` and `a-`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// State reached with `a+ = a- = 0`.
    pub offset: f64,
    /// Per-step request weights `(1 - b)^q[l+1]`, shared by both signs.
    pub weights: Vec<f64>,
    /// `[sum w r+, sum w r-]`: the state is `offset + coeffs . (a+, a-)`.
    pub coeffs: [f64; 2],
}

impl Decomposition {
    pub fn state(&self, a_plus: f64, a_minus: f64) -> f64 {
        self.offset + self.coeffs[0] * a_plus + self.coeffs[1] * a_minus
    }
}

/// Splits the closed-form state after `requests.len()` steps.
pub fn decompose(s0: f64, requests: &[f64], f_values: &[f64], b_f: f64) -> Result<Decomposition, BatteryError> {
    check_lengths(requests, f_values)?;
    let q = zero_counts(requests);
    let keep = 1.0 - b_f;
    let pow = |n: usize| keep.powi(n as i32);

    let mut offset = pow(q[0]) * s0;
    let mut coeffs = [0.0; 2];
    let mut weights = Vec::with_capacity(requests.len());
    for (l, &r) in requests.iter().enumerate() {
        let w = pow(q[l + 1]);
        let pull = if r == 0.0 { f_values[l] * b_f } else { 0.0 };
        offset += w * (pull + f_values[l + 1] - f_values[l]);
        coeffs[0] += w * r.max(0.0);
        coeffs[1] += w * r.min(0.0);
        weights.push(w);
    }
    Ok(Decomposition { offset, weights, coeffs })
}

/// State after applying `requests` from `s0`, in closed form.
///
/// `f_values[l]` is the nominal state at step `l`, for `l = 0..=k`.
pub fn propagate(s0: f64, requests: &[f64], f_values: &[f64], params: &BatteryParams) -> Result<f64, BatteryError> {
    check_lengths(requests, f_values)?;
    let q = zero_counts(requests);
    let keep = 1.0 - params.b_f;
    let mut s = keep.powi(q[0] as i32) * s0;
    for (l, &r) in requests.iter().enumerate() {
        let chi = if r == 0.0 { 1.0 } else { 0.0 };
        let inc = f_values[l] * params.b_f * chi
            + params.a_plus * r.max(0.0)
            + params.a_minus * r.min(0.0)
            + f_values[l + 1]
            - f_values[l];
        s += keep.powi(q[l + 1] as i32) * inc;
    }
    Ok(s)
}

/// Every intermediate state `s[0..=k]` by direct recursion.
pub fn trajectory(s0: f64, requests: &[f64], f_values: &[f64], params: &BatteryParams) -> Result<Vec<f64>, BatteryError> {
    check_lengths(requests, f_values)?;
    let mut out = Vec::with_capacity(requests.len() + 1);
    let mut s = s0;
    out.push(s);
    for (l, &r) in requests.iter().enumerate() {
        s = step(s, r, f_values[l], f_values[l + 1], params);
        out.push(s);
    }
    Ok(out)
}
