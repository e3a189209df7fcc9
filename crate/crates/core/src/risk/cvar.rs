use super::RiskError;

/// Conditional value at risk of a discrete outcome `X` at level `alpha`.
///
/// Evaluates `max { -sum q_i X_i : q in simplex, q_i <= P_i / alpha }` by
/// placing the per-outcome cap on the smallest outcomes first. The result
/// is normalized so that `alpha = 1` gives `-E[X]`.
pub fn cvar(samples: &[f64], probabilities: Option<&[f64]>, alpha: f64) -> Result<f64, RiskError> {
    let n = samples.len();
    if n == 0 {
        return Err(RiskError::InvalidProbabilities("no outcomes".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RiskError::InvalidAlpha(alpha));
    }
    let uniform;
    let probs = match probabilities {
        Some(p) => p,
        None => {
            uniform = vec![1.0 / n as f64; n];
            &uniform
        }
    };
    if probs.len() != n {
        return Err(RiskError::InvalidProbabilities(format!("{} probabilities for {n} outcomes", probs.len())));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(RiskError::InvalidProbabilities("entries must be finite and non-negative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(RiskError::InvalidProbabilities(format!("sums to {total}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(RiskError::InvalidProbabilities("non-finite outcome".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let mut remaining = 1.0;
    let mut value = 0.0;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let q = (probs[i] / alpha).min(remaining);
        value -= q * samples[i];
        remaining -= q;
    }
    Ok(value)
}

/// CVaR at `alpha = j / n` under uniform probabilities: the negated mean
/// of the `j` smallest outcomes.
pub fn cvar_uniform(samples: &[f64], j: usize) -> Result<f64, RiskError> {
    if j == 0 || j > samples.len() {
        return Err(RiskError::LevelOutOfRange { j, n_total: samples.len() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(-sorted[..j].iter().sum::<f64>() / j as f64)
}
