//! When the plant is the battery model itself and the nominal state is known
//! exactly, the most conservative envelope must never be optimistic.

use flexcast::battery::{extract_episodes, identify, trajectory, BatteryParams, IdentificationOptions};
use flexcast::envelope::{evaluate, predict_envelope, EnvelopeGrid, FeasibilityMode, FlexibilityEnvelope, PredictOptions};
use flexcast::risk::{worst_case_params, UncertaintyLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: usize = 288;

fn nominal(n: usize) -> Vec<f64> {
    (0..n).map(|t| 0.5 + 0.15 * (t as f64 * std::f64::consts::TAU / 288.0).sin()).collect()
}

fn true_duration(f: &[f64], start: usize, p: f64, params: &BatteryParams) -> usize {
    let requests = vec![p; CAP];
    let path = trajectory(f[start], &requests, &f[start..=start + CAP], params).unwrap();
    (1..=CAP).find(|&k| !(0.0..=1.0).contains(&path[k])).map_or(CAP, |k| k - 1)
}

#[test]
fn perfect_model_is_never_optimistic_at_the_smallest_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = BatteryParams { a_plus: 0.1, a_minus: 0.08, b_f: 0.2 };

    let n = 6000;
    let f = nominal(n + 1);
    let mut requests = vec![0.0; n];
    let mut t = 30;
    while t + 80 < n {
        let len = rng.gen_range(3..=12);
        let value = rng.gen_range(0.1..0.3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        requests[t..t + len].fill(value);
        t += len + rng.gen_range(40..70);
    }
    let states = trajectory(f[0], &requests, &f, &truth).unwrap();
    let opts = IdentificationOptions::default();
    let set = extract_episodes(&states[..n], &requests, &f[..n], &opts).unwrap();
    let (spaces, _) = identify(&[set], &opts).unwrap();
    assert!(spaces.n_plus() >= 10 && spaces.n_minus() >= 10);

    let starts: Vec<usize> = (0..48).map(|h| 288 + 12 * h).collect();
    let grid = EnvelopeGrid::uniform(21, -1.0, 1.0, starts.clone(), CAP);
    let f_eval = nominal(grid.horizon());
    let level = UncertaintyLevel::new(1, spaces.n_total()).unwrap();
    let worst = worst_case_params(&spaces, level).unwrap();

    let durations: Vec<Vec<usize>> = grid
        .power_grid
        .iter()
        .map(|&p| starts.iter().map(|&s| if p == 0.0 { CAP } else { true_duration(&f_eval, s, p, &truth) }).collect())
        .collect();
    let truth_env = FlexibilityEnvelope {
        power_grid: grid.power_grid.clone(),
        time_grid: starts.clone(),
        durations,
        alpha: None,
        cap_steps: CAP,
        steps_per_day: 288,
    };

    for mode in [FeasibilityMode::Ceiling, FeasibilityMode::Strict] {
        let opts = PredictOptions { mode, ..Default::default() };
        let pred = predict_envelope(&f_eval, &grid, &worst, level.alpha(), 288, &opts).unwrap();
        let m = evaluate(&pred, &truth_env).unwrap();
        assert_eq!(m.infeasible_fraction, 0.0, "{mode:?}");
        // Exact samples make the prediction match the truth up to one step.
        assert!(m.mean_abs_error <= 1.0, "{mode:?}: MAE {}", m.mean_abs_error);
    }
}
