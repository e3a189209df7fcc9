use std::fs;
use std::path::Path;

use flexcast::io::{read_envelope_csv, read_trace};
use flexcast::pipeline::{self, ModelArtifact, PipelineConfig, PipelineError, Workspace};
use flexcast::Execution;

fn workspace(dir: &Path, seed: u64) -> Workspace {
    Workspace::new(PipelineConfig { seed, ..PipelineConfig::default() }, dir)
}

#[test]
fn generate_writes_split_traces_deterministically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = pipeline::generate(&workspace(a.path(), 11)).unwrap();
    pipeline::generate(&workspace(b.path(), 11)).unwrap();
    assert_eq!(report.nominal_rows + report.request_rows, 6 * 7 * 288);

    let nominal = read_trace(&a.path().join("data/nominal.csv")).unwrap();
    let requests = read_trace(&a.path().join("data/requests.csv")).unwrap();
    assert_eq!(nominal.len() + requests.len(), 12096);
    assert!(nominal.request.iter().all(|&r| r == 0.0));
    assert!(requests.request.iter().any(|&r| r != 0.0));
    // The two files are one continuous run.
    assert_eq!(requests.timestamps[0], nominal.timestamps[nominal.len() - 1] + 5);

    for name in ["nominal.csv", "requests.csv", "weather.csv", "eval_weather.csv"] {
        let x = fs::read(a.path().join("data").join(name)).unwrap();
        let y = fs::read(b.path().join("data").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn fit_quality_and_sample_counts_across_seeds() {
    for seed in 1..=5 {
        let dir = tempfile::tempdir().unwrap();
        let ws = workspace(dir.path(), seed);
        pipeline::generate(&ws).unwrap();
        let fit = pipeline::fit(&ws).unwrap();
        assert!(fit.holdout_rmse < 0.05, "seed {seed}: hold-out RMSE {}", fit.holdout_rmse);
        assert!(fit.n_plus >= 10 && fit.n_minus >= 10, "seed {seed}: n+ {} n- {}", fit.n_plus, fit.n_minus);
        assert!(fit.b_f > 0.0 && fit.b_f < 1.0);
    }
}

#[test]
fn artifact_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), 3);
    pipeline::generate(&ws).unwrap();
    pipeline::fit(&ws).unwrap();
    let first = fs::read(ws.artifact_path()).unwrap();
    pipeline::fit(&ws).unwrap();
    assert_eq!(first, fs::read(ws.artifact_path()).unwrap());

    let artifact = ModelArtifact::load(&ws.artifact_path()).unwrap();
    let back = ModelArtifact::from_json(&artifact.to_json()).unwrap();
    assert_eq!(back, artifact);
    assert_eq!(artifact.provenance.config_hash, ws.config.hash());
    assert_eq!(artifact.levels.len(), 3);
}

#[test]
fn missing_request_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), 4);
    pipeline::generate(&ws).unwrap();
    fs::remove_file(ws.requests_csv()).unwrap();
    let err = pipeline::fit(&ws).unwrap_err();
    assert!(matches!(err, PipelineError::MissingInput { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn envelope_files_are_nested_in_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), 5);
    pipeline::generate(&ws).unwrap();
    let fit = pipeline::fit(&ws).unwrap();
    let report = pipeline::predict(&ws, 1).unwrap();
    assert_eq!(report.files.len(), 6);

    let mut tables: Vec<_> = fit
        .levels
        .iter()
        .map(|l| read_envelope_csv(&ws.output_dir().join(format!("envelope_day1_a{}of{}.csv", l.j, l.n_total))).unwrap())
        .collect();
    assert!(fit.levels.windows(2).all(|w| w[0].j < w[1].j));
    for t in &tables {
        let zero = t.power_grid.iter().position(|&p| p == 0.0).unwrap();
        assert!(t.durations[zero].iter().all(|&d| d == 288));
        assert_eq!(t.time_grid.len(), 24);
        assert_eq!(t.time_grid[0], 2 * 288);
    }
    let last = tables.pop().unwrap();
    let mid = tables.pop().unwrap();
    let first = tables.pop().unwrap();
    let le = |a: &flexcast::io::EnvelopeTable, b: &flexcast::io::EnvelopeTable| {
        a.durations.iter().flatten().zip(b.durations.iter().flatten()).all(|(x, y)| x <= y)
    };
    assert!(le(&first, &mid) && le(&mid, &last));

    for svg in report.files.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")) {
        let text = fs::read_to_string(svg).unwrap();
        assert!(text.starts_with("<svg") && !text.contains("href"));
    }
}

#[test]
fn sequential_and_parallel_outputs_match() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(dir.path(), 6);
    pipeline::generate(&ws).unwrap();
    pipeline::fit(&ws).unwrap();
    let par = pipeline::evaluate(&ws).unwrap();
    let metrics_par = fs::read(ws.output_dir().join("scatter.csv")).unwrap();
    ws.exec = Execution::Sequential;
    let seq = pipeline::evaluate(&ws).unwrap();
    assert_eq!(par.rows, seq.rows);
    assert_eq!(metrics_par, fs::read(ws.output_dir().join("scatter.csv")).unwrap());
}

#[test]
fn evaluation_outside_generated_weather_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(dir.path(), 7);
    pipeline::generate(&ws).unwrap();
    pipeline::fit(&ws).unwrap();
    ws.config.evaluation.days = 10;
    assert!(matches!(pipeline::evaluate(&ws), Err(PipelineError::OutOfRange(_))));
    assert!(matches!(pipeline::predict(&ws, 3), Err(PipelineError::OutOfRange(_))));
    ws.config.evaluation.days = 3;
    assert!(matches!(pipeline::predict(&ws, 3), Err(PipelineError::Config(_))));
}

#[test]
fn config_paths_resolve_against_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "seed = 9\n[paths]\ndata_dir = \"inputs\"\n").unwrap();
    let ws = Workspace::load(&cfg_path, None).unwrap();
    assert_eq!(ws.config.seed, 9);
    assert_eq!(ws.data_dir(), dir.path().join("inputs"));
    let other = tempfile::tempdir().unwrap();
    let ws = Workspace::load(&cfg_path, Some(other.path())).unwrap();
    assert_eq!(ws.output_dir(), other.path().join("output"));
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
}
