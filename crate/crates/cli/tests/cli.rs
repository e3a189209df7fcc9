use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 17

[training]
weeks_nominal = 1
weeks_requests = 1

[nominal]
max_points = 400

[evaluation]
days = 1
"#;

fn flexcast(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flexcast"));
    cmd.args(args).env_remove("FLEXCAST_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&flexcast(&["--help"], &[])), 0);
    assert_eq!(code(&flexcast(&["bogus"], &[])), 1);
    assert_eq!(code(&flexcast(&["fit", "--seed", "x"], &[])), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[sim]\ntemp_min = 30.0\n");
    let out = flexcast(&["generate", "--config", &bad], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sim"));

    let unknown = write_config(dir.path(), "[sim]\nwhatever = 1\n");
    assert_eq!(code(&flexcast(&["generate", "--config", &unknown], &[])), 1);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&flexcast(&["generate", "--config", missing.to_str().unwrap()], &[])), 1);
    assert_eq!(code(&flexcast(&["generate", "--alpha", "1.5"], &[])), 1);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = flexcast(&["fit", "--config", &cfg], &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("generate"));
    assert_eq!(code(&flexcast(&["evaluate", "--config", &cfg], &[])), 2);
}

#[test]
fn staged_run_and_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let cfg = write_config(dir, SMALL);
        for stage in ["generate", "fit", "envelope", "evaluate", "plot"] {
            let out = flexcast(&[stage, "--config", &cfg], &[("FLEXCAST_THREADS", "2")]);
            assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let fit_out = flexcast(&["fit", "--config", &write_config(a.path(), SMALL)], &[]);
    let stdout = String::from_utf8_lossy(&fit_out.stdout);
    assert!(stdout.contains("hold-out RMSE") && stdout.contains("n+ ="), "{stdout}");

    for file in ["model.json", "data/requests.csv", "output/metrics.csv", "output/scatter.csv", "output/truth.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let metrics = fs::read_to_string(a.path().join("output/metrics.csv")).unwrap();
    assert!(metrics.starts_with("alpha_spec,j,n_total,alpha,day,"));
    let envelopes = fs::read_dir(a.path().join("output"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("envelope_day0_"))
        .count();
    assert_eq!(envelopes, 6, "three levels, CSV and SVG each");
}

#[test]
fn alpha_and_override_handling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(code(&flexcast(&["generate", "--config", &cfg], &[])), 0);
    assert_eq!(code(&flexcast(&["fit", "--config", &cfg], &[])), 0);

    let out = flexcast(&["envelope", "--config", &cfg, "--alpha", "1/N,~0.3"], &[]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("~0.3"));

    // Not a multiple of 1/N for N = n+ * n-: rejected with suggestions.
    let out = flexcast(&["envelope", "--config", &cfg, "--alpha", "0.123456"], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nearest"));

    assert_eq!(code(&flexcast(&["evaluate", "--config", &cfg, "--days", "20"], &[])), 2);
    assert_eq!(code(&flexcast(&["envelope", "--config", &cfg, "--day", "5"], &[])), 1);
    assert_eq!(code(&flexcast(&["plot", "--config", &cfg], &[("FLEXCAST_THREADS", "abc")])), 1);
}

#[test]
fn out_directory_overrides_config_location() {
    let (cfg_dir, out_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = write_config(cfg_dir.path(), SMALL);
    let out = flexcast(&["generate", "--config", &cfg, "--out", out_dir.path().to_str().unwrap(), "--seed", "3"], &[]);
    assert_eq!(code(&out), 0);
    assert!(out_dir.path().join("data/nominal.csv").exists());
    assert!(!cfg_dir.path().join("data").exists());
}
