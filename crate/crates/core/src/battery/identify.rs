use serde::{Deserialize, Serialize};

use super::BatteryError;

/// Finite sample spaces of `a+`, `a-` (ascending) and the raw `b_f` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpaces {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub b_f_candidates: Vec<f64>,
}

impl SampleSpaces {
    /// Sorts both spaces; fails if either is empty or holds a non-finite value.
    pub fn new(mut p_plus: Vec<f64>, mut p_minus: Vec<f64>, b_f_candidates: Vec<f64>) -> Result<Self, BatteryError> {
        if p_plus.is_empty() || p_minus.is_empty() {
            return Err(BatteryError::Identification(format!(
                "empty sample space ({} a+ samples, {} a- samples)",
                p_plus.len(),
                p_minus.len()
            )));
        }
        if p_plus.iter().chain(&p_minus).any(|v| !v.is_finite()) {
            return Err(BatteryError::Identification("non-finite sample".into()));
        }
        p_plus.sort_by(f64::total_cmp);
        p_minus.sort_by(f64::total_cmp);
        Ok(Self { p_plus, p_minus, b_f_candidates })
    }

    pub fn n_plus(&self) -> usize {
        self.p_plus.len()
    }

    pub fn n_minus(&self) -> usize {
        self.p_minus.len()
    }

    /// Size of the product sample space.
    pub fn n_total(&self) -> usize {
        self.p_plus.len() * self.p_minus.len()
    }
}

/// A run of same-sign nonzero requests and the states around it.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestEpisode {
    /// Trace row of `states[0]`.
    pub start: usize,
    /// `s[0..=k]`
    pub states: Vec<f64>,
    /// `r[0..k]`
    pub requests: Vec<f64>,
    /// Nominal prediction `f(e)` aligned with `states`.
    pub nominal: Vec<f64>,
    /// First `q >= 1` with a saturated state, or `k + 1`.
    pub saturation_index: usize,
}

impl RequestEpisode {
    pub fn is_positive(&self) -> bool {
        self.requests[0] > 0.0
    }
}

/// Request-free window directly after a request.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryEpisode {
    pub start: usize,
    pub states: Vec<f64>,
    pub nominal: Vec<f64>,
    /// First `q` with `|s - f| <= delta`, or `k + 1`.
    pub exit_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeSet {
    pub requests: Vec<RequestEpisode>,
    pub recoveries: Vec<RecoveryEpisode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfAggregation {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationOptions {
    /// Recovery is over once `|s - f| <= delta`.
    pub delta: f64,
    /// States within this distance of 0 or 1 count as saturated.
    pub saturation_band: f64,
    /// `a` samples below this are discarded.
    pub sample_floor: f64,
    /// Nearest-rank percentile above which `a` samples are discarded.
    pub cap_percentile: f64,
    pub b_f_mode: BfAggregation,
}

impl Default for IdentificationOptions {
    fn default() -> Self {
        Self { delta: 0.05, saturation_band: 0.02, sample_floor: 1e-4, cap_percentile: 0.99, b_f_mode: BfAggregation::Mean }
    }
}

impl IdentificationOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err("delta must be positive".into());
        }
        if !(0.0..0.5).contains(&self.saturation_band) {
            return Err("saturation_band must lie in [0, 0.5)".into());
        }
        if !(self.sample_floor >= 0.0) {
            return Err("sample_floor must be >= 0".into());
        }
        if !(self.cap_percentile > 0.0 && self.cap_percentile <= 1.0) {
            return Err("cap_percentile must lie in (0, 1]".into());
        }
        Ok(())
    }
}

fn sign(r: f64) -> i8 {
    if r > 0.0 {
        1
    } else if r < 0.0 {
        -1
    } else {
        0
    }
}

/// Splits aligned `states`, `requests`, and nominal predictions into request
/// and recovery episodes.
///
/// A request episode is a maximal run of same-sign nonzero requests; the
/// request-free run that follows it is its recovery episode. Runs touching
/// the end of the data lose their final state and are shortened by one.
pub fn extract_episodes(
    states: &[f64],
    requests: &[f64],
    nominal: &[f64],
    opts: &IdentificationOptions,
) -> Result<EpisodeSet, BatteryError> {
    let n = states.len();
    if requests.len() != n || nominal.len() != n {
        return Err(BatteryError::LengthMismatch { requests: requests.len(), expected: n, got: nominal.len() });
    }
    let band = opts.saturation_band;
    let saturated = |s: f64| s <= band || s >= 1.0 - band;

    let mut set = EpisodeSet::default();
    let mut t = 0;
    let mut after_request = false;
    while t < n {
        let class = sign(requests[t]);
        let mut end = t;
        while end < n && sign(requests[end]) == class {
            end += 1;
        }
        // States t..=end must exist.
        let last = end.min(n - 1);
        let k = last - t;
        if k > 0 {
            let states_win = states[t..=last].to_vec();
            let nominal_win = nominal[t..=last].to_vec();
            if class != 0 {
                let saturation_index = (1..=k).find(|&q| saturated(states_win[q])).unwrap_or(k + 1);
                set.requests.push(RequestEpisode {
                    start: t,
                    states: states_win,
                    requests: requests[t..last].to_vec(),
                    nominal: nominal_win,
                    saturation_index,
                });
            } else if after_request {
                let exit_index = (0..=k)
                    .find(|&q| (states_win[q] - nominal_win[q]).abs() <= opts.delta)
                    .unwrap_or(k + 1);
                set.recoveries.push(RecoveryEpisode { start: t, states: states_win, nominal: nominal_win, exit_index });
            }
        }
        after_request = class != 0;
        t = end;
    }
    if set.requests.is_empty() && set.recoveries.is_empty() {
        return Err(BatteryError::NoEpisodes);
    }
    Ok(set)
}

/// One `a+` or `a-` sample from a request episode.
///
/// Uses the last state before saturation (or the final state when the
/// request was served throughout).
pub fn sample_a(episode: &RequestEpisode, floor: f64) -> Result<f64, BatteryError> {
    let l = episode.saturation_index;
    if l < 2 {
        return Err(BatteryError::Rejected("saturated after the first step"));
    }
    let total: f64 = episode.requests[..l - 1].iter().sum();
    if total.abs() < 1e-6 {
        return Err(BatteryError::Rejected("request sum too small"));
    }
    let dev_end = episode.states[l - 1] - episode.nominal[l - 1];
    let dev_start = episode.states[0] - episode.nominal[0];
    let a = (dev_end - dev_start) / total;
    if !(a >= floor) || !a.is_finite() {
        return Err(BatteryError::Rejected("non-physical sample"));
    }
    Ok(a)
}

fn recovery_residual(b: f64, steps: i32, dev_start: f64, dev_end: f64) -> f64 {
    let r = (1.0 - b).powi(steps) * dev_start - dev_end;
    r * r
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// One `b_f` sample from a recovery episode: the least-squares fit of the
/// geometric decay of the deviation from nominal over the window.
pub fn sample_b_f(episode: &RecoveryEpisode, delta: f64) -> Result<f64, BatteryError> {
    let l = episode.exit_index;
    let dev_start = episode.states[0] - episode.nominal[0];
    if dev_start.abs() <= delta {
        return Err(BatteryError::Rejected("recovery starts within delta of nominal"));
    }
    if l < 2 {
        return Err(BatteryError::Rejected("recovery window too short"));
    }
    let dev_end = episode.states[l - 1] - episode.nominal[l - 1];
    let steps = (l - 1) as i32;
    let ratio = dev_end / dev_start;
    if (0.0..=1.0).contains(&ratio) {
        return Ok(1.0 - ratio.powf(1.0 / f64::from(steps)));
    }
    let cost = |b: f64| recovery_residual(b, steps, dev_start, dev_end);
    let inner = golden_section(cost, 0.0, 1.0, 1e-10);
    Ok([inner, 0.0, 1.0].into_iter().min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap_or(inner))
}

fn nearest_rank_cap(mut values: Vec<f64>, percentile: f64) -> Vec<f64> {
    if values.is_empty() {
        return values;
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let cap = sorted[rank - 1];
    values.retain(|&v| v <= cap);
    values
}

/// Collects samples from every episode set into sample spaces and fixes `b_f`.
pub fn identify(sets: &[EpisodeSet], opts: &IdentificationOptions) -> Result<(SampleSpaces, f64), BatteryError> {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut b = Vec::new();
    for set in sets {
        for ep in &set.requests {
            if let Ok(a) = sample_a(ep, opts.sample_floor) {
                if ep.is_positive() {
                    plus.push(a);
                } else {
                    minus.push(a);
                }
            }
        }
        b.extend(set.recoveries.iter().filter_map(|ep| sample_b_f(ep, opts.delta).ok()));
    }
    let plus = nearest_rank_cap(plus, opts.cap_percentile);
    let minus = nearest_rank_cap(minus, opts.cap_percentile);
    let spaces = SampleSpaces::new(plus, minus, b)?;
    if spaces.b_f_candidates.is_empty() {
        return Err(BatteryError::Identification("no usable recovery windows for b_f".into()));
    }
    let candidates = &spaces.b_f_candidates;
    let b_f = match opts.b_f_mode {
        BfAggregation::Mean => candidates.iter().sum::<f64>() / candidates.len() as f64,
        BfAggregation::Max => candidates.iter().cloned().fold(f64::MIN, f64::max),
    };
    Ok((spaces, b_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{step, BatteryParams};

    fn request_episode(states: Vec<f64>, requests: Vec<f64>, nominal: Vec<f64>) -> RequestEpisode {
        let k = requests.len();
        RequestEpisode { start: 0, states, requests, nominal, saturation_index: k + 1 }
    }

    #[test]
    fn sample_a_formula() {
        let ep = request_episode(vec![0.5, 0.6, 0.7, 0.8], vec![1.0; 3], vec![0.5; 4]);
        assert!((sample_a(&ep, 1e-4).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sample_a_rejects_flat_and_tiny() {
        let ep = request_episode(vec![0.5; 4], vec![1.0; 3], vec![0.5; 4]);
        assert!(sample_a(&ep, 1e-4).is_err());
        let ep = request_episode(vec![0.5, 0.6], vec![1e-8], vec![0.5; 2]);
        assert!(sample_a(&ep, 1e-4).is_err());
        let mut ep = request_episode(vec![0.5, 0.99, 0.99], vec![1.0; 2], vec![0.5; 3]);
        ep.saturation_index = 1;
        assert!(sample_a(&ep, 1e-4).is_err());
    }

    #[test]
    fn sample_a_uses_pre_saturation_state() {
        // Saturates at q = 3; uses s[2] and r[0..2].
        let mut ep = request_episode(vec![0.5, 0.7, 0.9, 0.99, 0.99], vec![1.0; 4], vec![0.5; 5]);
        ep.saturation_index = 3;
        assert!((sample_a(&ep, 1e-4).unwrap() - 0.2).abs() < 1e-12);
    }

    fn recovery(dev0: f64, dev_end: f64, steps: usize) -> RecoveryEpisode {
        let mut states = vec![0.5 + dev0];
        states.extend(std::iter::repeat_n(0.5 + dev0, steps - 1));
        states.push(0.5 + dev_end);
        let n = states.len();
        RecoveryEpisode { start: 0, states, nominal: vec![0.5; n], exit_index: n }
    }

    #[test]
    fn sample_b_closed_form() {
        let ep = recovery(0.4, 0.1, 2);
        assert!((sample_b_f(&ep, 0.05).unwrap() - 0.5).abs() < 1e-12);
        let ep = recovery(0.4, 0.0, 2);
        assert_eq!(sample_b_f(&ep, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn sample_b_rejects_small_start() {
        let ep = recovery(0.03, 0.01, 3);
        assert!(sample_b_f(&ep, 0.05).is_err());
    }

    #[test]
    fn sample_b_overshoot_beats_endpoints_and_grid() {
        for (dev0, dev_end, steps) in [(0.4, -0.1, 3usize), (-0.3, 0.05, 4), (0.2, 0.3, 5), (0.2, -0.3, 2)] {
            let ep = recovery(dev0, dev_end, steps);
            let b = sample_b_f(&ep, 0.05).unwrap();
            let cost = |b: f64| recovery_residual(b, steps as i32, dev0, dev_end);
            assert!(cost(b) <= cost(0.0) + 1e-15 && cost(b) <= cost(1.0) + 1e-15);
            let grid_best = (0..=10_000).map(|i| cost(i as f64 * 1e-4)).fold(f64::MAX, f64::min);
            assert!(cost(b) <= grid_best + 1e-12, "{dev0} {dev_end} {steps}");
        }
    }

    #[test]
    fn episodes_from_simple_trace() {
        // 2 h positive request then 6 h recovery at 5-min steps.
        let n = 10 + 24 + 72;
        let mut requests = vec![0.0; n];
        requests[10..34].iter_mut().for_each(|r| *r = 0.2);
        let p = BatteryParams { a_plus: 0.02, a_minus: 0.02, b_f: 0.1 };
        let nominal = vec![0.5; n];
        let mut states = vec![0.5];
        for t in 0..n - 1 {
            states.push(step(states[t], requests[t], nominal[t], nominal[t + 1], &p));
        }
        let set = extract_episodes(&states, &requests, &nominal, &IdentificationOptions::default()).unwrap();
        assert_eq!(set.requests.len(), 1);
        assert_eq!(set.recoveries.len(), 1);
        assert_eq!(set.requests[0].saturation_index, 25);
        assert!((sample_a(&set.requests[0], 1e-4).unwrap() - 0.02).abs() < 1e-9);
        assert!((sample_b_f(&set.recoveries[0], 0.05).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn no_requests_no_episodes() {
        let n = 50;
        let r = extract_episodes(&vec![0.5; n], &vec![0.0; n], &vec![0.5; n], &IdentificationOptions::default());
        assert_eq!(r, Err(BatteryError::NoEpisodes));
    }

    #[test]
    fn percentile_cap_is_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(nearest_rank_cap(v.clone(), 0.99).len(), 20);
        let v: Vec<f64> = (1..=200).map(f64::from).collect();
        assert_eq!(nearest_rank_cap(v, 0.99).len(), 198);
    }

    #[test]
    fn identify_requires_both_signs() {
        let ep = request_episode(vec![0.5, 0.6, 0.7], vec![1.0; 2], vec![0.5; 3]);
        let set = EpisodeSet { requests: vec![ep], recoveries: vec![recovery(0.2, 0.1, 3)] };
        assert!(matches!(identify(&[set], &IdentificationOptions::default()), Err(BatteryError::Identification(_))));
    }
}
