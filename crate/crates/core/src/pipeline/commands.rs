use std::fmt;
use std::path::{Path, PathBuf};

use super::{stream_seed, AlphaSpec, LevelEntry, ModelArtifact, PipelineError, Provenance, Workspace, ARTIFACT_VERSION};
use crate::battery::{extract_episodes, identify};
use crate::envelope::{self, predict_envelope, EnvelopeGrid, FlexibilityEnvelope, PredictOptions};
use crate::io::{self, envelope_to_csv, read_envelope_csv, write_atomic};
use crate::nominal::{build_features, select_hyperparameters, subsample, weather_features, NominalModel};
use crate::par::Execution;
use crate::plot;
use crate::risk::RiskError;
use crate::sim::{
    generate_training_schedule, generate_weather, simulate, true_envelope, RequestSchedule, SimConfig, Trace,
    WeatherSeries,
};

fn read_trace_input(path: &Path, hint: &'static str) -> Result<Trace, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput { path: path.display().to_string(), hint });
    }
    Ok(io::read_trace(path)?)
}

fn read_weather_input(path: &Path) -> Result<WeatherSeries, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput { path: path.display().to_string(), hint: "run `generate` first" });
    }
    Ok(io::read_weather(path)?)
}

fn level_tag(entry: &LevelEntry) -> String {
    format!("a{}of{}", entry.j, entry.n_total)
}

#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub nominal_rows: usize,
    pub request_rows: usize,
    pub request_segments: usize,
    pub evaluation_rows: usize,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for GenerateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nominal rows:     {}", self.nominal_rows)?;
        writeln!(f, "request rows:     {} ({} request segments)", self.request_rows, self.request_segments)?;
        writeln!(f, "evaluation rows:  {}", self.evaluation_rows)?;
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

/// Simulates the training period and draws the evaluation weather.
///
/// Training is one continuous run: request-free weeks first, then weeks with
/// the random request schedule. The two parts go to separate files.
pub fn generate(ws: &Workspace) -> Result<GenerateReport, PipelineError> {
    let cfg = &ws.config;
    cfg.validate()?;
    let per_day = cfg.steps_per_day();
    let n_nom = 7 * cfg.training.weeks_nominal * per_day;
    let n_req = 7 * cfg.training.weeks_requests * per_day;
    let days = 7 * (cfg.training.weeks_nominal + cfg.training.weeks_requests);
    let weather = generate_weather(stream_seed(cfg.seed, "training-weather"), days, cfg.sim.timestep, &cfg.weather);
    let schedule = generate_training_schedule(
        stream_seed(cfg.seed, "training-schedule"),
        n_req,
        cfg.sim.timestep,
        &cfg.training.schedule,
    );
    if schedule.is_empty() {
        return Err(PipelineError::Config("training.schedule: no request fits into the request weeks".into()));
    }
    let segments = schedule.segments.len();
    let trace = simulate(&cfg.sim, &weather, &schedule.shifted(n_nom), stream_seed(cfg.seed, "training-noise"))?;

    let eval = generate_weather(
        stream_seed(cfg.seed, "evaluation-weather"),
        cfg.evaluation_weather_days(),
        cfg.sim.timestep,
        &cfg.weather,
    );

    let files = vec![ws.nominal_csv(), ws.requests_csv(), ws.training_weather_csv(), ws.evaluation_weather_csv()];
    io::write_trace(&trace.slice(0, n_nom), &files[0])?;
    io::write_trace(&trace.slice(n_nom, n_nom + n_req), &files[1])?;
    io::write_weather(&weather, &files[2])?;
    io::write_weather(&eval, &files[3])?;
    Ok(GenerateReport { nominal_rows: n_nom, request_rows: n_req, request_segments: segments, evaluation_rows: eval.len(), files })
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub training_points: usize,
    pub lengthscale: f64,
    pub ridge: f64,
    pub holdout_rmse: f64,
    pub request_episodes: usize,
    pub recovery_episodes: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub b_f_samples: usize,
    pub b_f: f64,
    pub levels: Vec<LevelEntry>,
    pub artifact: PathBuf,
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nominal model:    {} points, lengthscale {}, ridge {:e}", self.training_points, self.lengthscale, self.ridge)?;
        writeln!(f, "hold-out RMSE:    {:.5}", self.holdout_rmse)?;
        writeln!(f, "episodes:         {} request, {} recovery", self.request_episodes, self.recovery_episodes)?;
        writeln!(f, "samples:          n+ = {}, n- = {}, N = {}", self.n_plus, self.n_minus, self.n_plus * self.n_minus)?;
        writeln!(f, "b_f:              {:.5} from {} windows", self.b_f, self.b_f_samples)?;
        for l in &self.levels {
            writeln!(
                f,
                "alpha {:>6} = {:>5}/{:<6} a+ {:.5} a- {:.5}",
                l.spec, l.j, l.n_total, l.worst.a_plus_tilde, l.worst.a_minus_tilde
            )?;
        }
        writeln!(f, "wrote {}", self.artifact.display())
    }
}

/// Nominal state `f` at every step of `weather`.
///
/// Steps before the first full lag window have no prediction and are NaN.
pub fn nominal_series(model: &NominalModel, weather: &WeatherSeries, exec: Execution) -> Result<Vec<f64>, PipelineError> {
    let rows = weather_features(weather, &model.features)?;
    let mut f = vec![f64::NAN; model.features.first_step()];
    f.extend(model.predict_many(&rows, exec)?);
    Ok(f)
}

fn resolve_levels(specs: &[AlphaSpec], artifact_spaces: &crate::battery::SampleSpaces) -> Result<Vec<LevelEntry>, PipelineError> {
    let n = artifact_spaces.n_total();
    specs
        .iter()
        .map(|spec| {
            let level = spec.resolve(n).map_err(|e| match e {
                RiskError::NotRepresentable { .. } | RiskError::LevelOutOfRange { .. } => {
                    PipelineError::Config(format!("alpha `{spec}`: {e} (or write `~{spec}` for the nearest)"))
                }
                e => e.into(),
            })?;
            Ok(LevelEntry {
                spec: spec.to_string(),
                j: level.j(),
                n_total: n,
                alpha: level.alpha(),
                worst: crate::risk::worst_case_params(artifact_spaces, level)?,
            })
        })
        .collect()
}

/// Fits the nominal model on the request-free data and identifies the
/// battery coefficients on the request data.
pub fn fit(ws: &Workspace) -> Result<FitReport, PipelineError> {
    let cfg = &ws.config;
    cfg.validate()?;
    let nominal = read_trace_input(&ws.nominal_csv(), "run `generate` first")?;
    let requests = read_trace_input(&ws.requests_csv(), "request data is required to identify the battery model")?;

    let spec = cfg.nominal.feature_spec();
    let (rows, targets) = build_features(&nominal, &spec)?;
    let rows = subsample(&rows, cfg.nominal.max_points);
    let targets = subsample(&targets, cfg.nominal.max_points);
    let search = select_hyperparameters(&rows, &targets, spec, &cfg.nominal.search, ws.exec)?;
    let model = NominalModel::fit(&rows, &targets, spec, &search.hyper, ws.exec)?;

    // The request period directly follows the nominal one; its first lag
    // window borrows the tail of the nominal weather.
    let history = spec.first_step().min(nominal.len());
    let tail = nominal.slice(nominal.len() - history, nominal.len()).weather();
    let req_weather = requests.weather();
    let joined = WeatherSeries {
        timestamps: tail.timestamps.iter().chain(&req_weather.timestamps).copied().collect(),
        outdoor_temp: tail.outdoor_temp.iter().chain(&req_weather.outdoor_temp).copied().collect(),
        irradiance: tail.irradiance.iter().chain(&req_weather.irradiance).copied().collect(),
    };
    let f = nominal_series(&model, &joined, ws.exec)?;
    let f = &f[history..];
    // Without borrowed history the first rows have no prediction.
    let skip = f.iter().take_while(|v| v.is_nan()).count();
    let episodes = extract_episodes(&requests.state[skip..], &requests.request[skip..], &f[skip..], &cfg.identification)?;
    let (spaces, b_f) = identify(std::slice::from_ref(&episodes), &cfg.identification)?;
    let levels = resolve_levels(&cfg.envelope.alphas, &spaces)?;

    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        nominal: model,
        holdout_rmse: search.holdout_rmse,
        spaces,
        b_f,
        levels: levels.clone(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            timestep_minutes: cfg.sim.timestep,
            nominal_rows: nominal.len(),
            request_rows: requests.len(),
        },
    };
    let path = ws.artifact_path();
    artifact.save(&path)?;
    Ok(FitReport {
        training_points: rows.len(),
        lengthscale: search.hyper.lengthscales.first().copied().unwrap_or(f64::NAN),
        ridge: search.hyper.ridge,
        holdout_rmse: search.holdout_rmse,
        request_episodes: episodes.requests.len(),
        recovery_episodes: episodes.recoveries.len(),
        n_plus: artifact.spaces.n_plus(),
        n_minus: artifact.spaces.n_minus(),
        b_f_samples: artifact.spaces.b_f_candidates.len(),
        b_f,
        levels,
        artifact: path,
    })
}

fn check_artifact(ws: &Workspace, artifact: &ModelArtifact) -> Result<(), PipelineError> {
    if artifact.provenance.timestep_minutes != ws.config.sim.timestep {
        return Err(PipelineError::Artifact(format!(
            "artifact was fitted with a {} min timestep, config uses {} min",
            artifact.provenance.timestep_minutes, ws.config.sim.timestep
        )));
    }
    Ok(())
}

fn check_horizon(grid: &EnvelopeGrid, weather: &WeatherSeries) -> Result<(), PipelineError> {
    if grid.horizon() > weather.len() {
        return Err(PipelineError::OutOfRange(format!(
            "requested days need {} weather steps but the evaluation weather has {}; rerun `generate` with more days",
            grid.horizon(),
            weather.len()
        )));
    }
    Ok(())
}

fn noise_free(cfg: &SimConfig) -> SimConfig {
    SimConfig { noise_std: 0.0, ..cfg.clone() }
}

/// Predicted envelopes for every configured risk level on `grid`.
fn predict_levels(
    ws: &Workspace,
    artifact: &ModelArtifact,
    weather: &WeatherSeries,
    grid: &EnvelopeGrid,
    baseline: Option<&Trace>,
) -> Result<Vec<(LevelEntry, FlexibilityEnvelope)>, PipelineError> {
    let cfg = &ws.config;
    let f = nominal_series(&artifact.nominal, weather, ws.exec)?;
    let first_state = match (cfg.envelope.measured_first_state, baseline, grid.time_grid.first()) {
        (true, Some(b), Some(&t)) => Some(b.state[t]),
        _ => None,
    };
    let opts = PredictOptions { mode: cfg.envelope.mode, first_state, exec: ws.exec };
    resolve_levels(&cfg.envelope.alphas, &artifact.spaces)?
        .into_iter()
        .map(|entry| {
            let env = predict_envelope(&f, grid, &entry.worst, entry.alpha, cfg.steps_per_day(), &opts)?;
            Ok((entry, env))
        })
        .collect()
}

fn baseline_run(ws: &Workspace, weather: &WeatherSeries) -> Result<Trace, PipelineError> {
    Ok(simulate(&noise_free(&ws.config.sim), weather, &RequestSchedule::empty(), 0)?)
}

fn write_envelope(env: &FlexibilityEnvelope, timestep: u32, title: &str, csv: &Path) -> Result<PathBuf, PipelineError> {
    write_atomic(csv, &envelope_to_csv(env))?;
    let minutes: Vec<u64> = env.time_grid.iter().map(|&t| t as u64 * u64::from(timestep)).collect();
    let svg = plot::envelope_heatmap(title, &env.power_grid, &minutes, &env.durations, env.cap_steps);
    let svg_path = csv.with_extension("svg");
    write_atomic(&svg_path, svg.as_bytes())?;
    Ok(svg_path)
}

fn mean_duration(env: &FlexibilityEnvelope) -> f64 {
    let (sum, n) = env.cells().fold((0usize, 0usize), |(s, n), d| (s + d, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub day: usize,
    pub levels: Vec<(LevelEntry, f64)>,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for EnvelopeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "evaluation day {}", self.day)?;
        for (l, mean) in &self.levels {
            writeln!(f, "alpha {:>6} (j = {}/{}): mean duration {:.1} steps", l.spec, l.j, l.n_total, mean)?;
        }
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

/// Predicted envelopes for one evaluation day, one CSV and SVG per level.
pub fn predict(ws: &Workspace, day: usize) -> Result<EnvelopeReport, PipelineError> {
    let cfg = &ws.config;
    cfg.validate()?;
    if day >= cfg.evaluation.days {
        return Err(PipelineError::Config(format!("day {day} is outside the {} evaluation days", cfg.evaluation.days)));
    }
    let artifact = ModelArtifact::load(&ws.artifact_path())?;
    check_artifact(ws, &artifact)?;
    let weather = read_weather_input(&ws.evaluation_weather_csv())?;
    let grid = cfg.envelope_grid(day..day + 1);
    check_horizon(&grid, &weather)?;
    let baseline = if cfg.envelope.measured_first_state { Some(baseline_run(ws, &weather)?) } else { None };
    let out = ws.output_dir();
    let mut files = Vec::new();
    let mut levels = Vec::new();
    for (entry, env) in predict_levels(ws, &artifact, &weather, &grid, baseline.as_ref())? {
        let csv = out.join(format!("envelope_day{day}_{}.csv", level_tag(&entry)));
        let title = format!("predicted, day {day}, alpha = {}/{}", entry.j, entry.n_total);
        let svg = write_envelope(&env, cfg.sim.timestep, &title, &csv)?;
        files.extend([csv, svg]);
        levels.push((entry, mean_duration(&env)));
    }
    Ok(EnvelopeReport { day, levels, files })
}

/// One line of the metrics table; `day` is `None` for the overall figure.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub spec: String,
    pub j: usize,
    pub n_total: usize,
    pub alpha: f64,
    pub day: Option<usize>,
    pub cells: usize,
    pub infeasible_fraction: f64,
    pub mean_abs_error: f64,
    pub mean_duration: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub rows: Vec<MetricRow>,
    /// Infeasible fraction does not fall and the mean absolute error does not
    /// rise as alpha grows.
    pub trends_hold: bool,
    pub truth_mean_duration: f64,
    pub files: Vec<PathBuf>,
}

impl EvaluateReport {
    pub fn overall(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| r.day.is_none())
    }
}

impl fmt::Display for EvaluateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>12} {:>5} {:>6} {:>11} {:>9} {:>9}", "alpha", "j/N", "day", "cells", "infeasible", "MAE", "mean")?;
        for r in &self.rows {
            let day = r.day.map_or("all".to_string(), |d| d.to_string());
            writeln!(
                f,
                "{:>8.4} {:>12} {:>5} {:>6} {:>10.2}% {:>9.2} {:>9.1}",
                r.alpha,
                format!("{}/{}", r.j, r.n_total),
                day,
                r.cells,
                100.0 * r.infeasible_fraction,
                r.mean_abs_error,
                r.mean_duration
            )?;
        }
        writeln!(f, "true mean duration {:.1} steps", self.truth_mean_duration)?;
        writeln!(f, "trends across alpha: {}", if self.trends_hold { "as expected" } else { "NOT monotone" })?;
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

fn trends_hold(rows: &[MetricRow]) -> bool {
    let mut overall: Vec<&MetricRow> = rows.iter().filter(|r| r.day.is_none()).collect();
    overall.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    overall.windows(2).all(|w| {
        w[0].infeasible_fraction <= w[1].infeasible_fraction && w[0].mean_abs_error >= w[1].mean_abs_error
    })
}

/// Compares predicted envelopes at every level against re-simulated truth
/// over all evaluation days.
pub fn evaluate(ws: &Workspace) -> Result<EvaluateReport, PipelineError> {
    let cfg = &ws.config;
    cfg.validate()?;
    let artifact = ModelArtifact::load(&ws.artifact_path())?;
    check_artifact(ws, &artifact)?;
    let weather = read_weather_input(&ws.evaluation_weather_csv())?;
    let grid = cfg.envelope_grid(0..cfg.evaluation.days);
    check_horizon(&grid, &weather)?;
    let baseline = baseline_run(ws, &weather)?;
    let truth = true_envelope(&noise_free(&cfg.sim), &baseline, &grid, cfg.evaluation.tolerance, ws.exec)?;
    let predictions = predict_levels(ws, &artifact, &weather, &grid, Some(&baseline))?;

    let out = ws.output_dir();
    let mut files = Vec::new();
    let truth_csv = out.join("truth.csv");
    let svg = write_envelope(&truth, cfg.sim.timestep, "true envelope", &truth_csv)?;
    files.extend([truth_csv, svg]);

    let mut rows = Vec::new();
    let mut metrics_csv = String::from("alpha_spec,j,n_total,alpha,day,cells,infeasible_fraction,mean_abs_error,mean_duration\n");
    let mut scatter_csv = String::from("j,n_total,power,start_step,truth,predicted\n");
    for (entry, env) in &predictions {
        let m = envelope::evaluate(env, &truth)?;
        let overall_mean = mean_duration(env);
        let mut push = |day: Option<usize>, cells: usize, inf: f64, mae: f64, mean: f64| {
            rows.push(MetricRow {
                spec: entry.spec.clone(),
                j: entry.j,
                n_total: entry.n_total,
                alpha: entry.alpha,
                day,
                cells,
                infeasible_fraction: inf,
                mean_abs_error: mae,
                mean_duration: mean,
            });
        };
        push(None, m.cells, m.infeasible_fraction, m.mean_abs_error, overall_mean);
        for d in &m.per_day {
            // Day 0 of the weather is warm-up.
            let day = d.day.saturating_sub(1);
            let per_day = cfg.steps_per_day();
            let cols: Vec<usize> =
                (0..env.time_grid.len()).filter(|&j| env.time_grid[j] / per_day == d.day).collect();
            let sum: usize = env.durations.iter().flat_map(|r| cols.iter().map(move |&j| r[j])).sum();
            push(Some(day), d.cells, d.infeasible_fraction, d.mean_abs_error, sum as f64 / d.cells.max(1) as f64);
        }

        let mut points = Vec::new();
        for (i, p) in env.power_grid.iter().enumerate() {
            for (j, t) in env.time_grid.iter().enumerate() {
                let (tr, pr) = (truth.durations[i][j], env.durations[i][j]);
                scatter_csv.push_str(&format!("{},{},{p},{t},{tr},{pr}\n", entry.j, entry.n_total));
                points.push((tr, pr));
            }
        }
        let tag = level_tag(entry);
        let pred_csv = out.join(format!("predicted_{tag}.csv"));
        let title = format!("predicted, alpha = {}/{}", entry.j, entry.n_total);
        let svg = write_envelope(env, cfg.sim.timestep, &title, &pred_csv)?;
        let scatter_svg = out.join(format!("scatter_{tag}.svg"));
        write_atomic(&scatter_svg, plot::scatter(&title, &points, env.cap_steps).as_bytes())?;
        files.extend([pred_csv, svg, scatter_svg]);
    }
    for r in &rows {
        let day = r.day.map_or("all".to_string(), |d| d.to_string());
        metrics_csv.push_str(&format!(
            "{},{},{},{},{day},{},{},{},{}\n",
            r.spec, r.j, r.n_total, r.alpha, r.cells, r.infeasible_fraction, r.mean_abs_error, r.mean_duration
        ));
    }
    let metrics_path = out.join("metrics.csv");
    write_atomic(&metrics_path, metrics_csv.as_bytes())?;
    let scatter_path = out.join("scatter.csv");
    write_atomic(&scatter_path, scatter_csv.as_bytes())?;
    files.extend([metrics_path, scatter_path]);

    let mut report = EvaluateReport { trends_hold: trends_hold(&rows), rows, truth_mean_duration: mean_duration(&truth), files };
    let summary = out.join("summary.txt");
    report.files.push(summary.clone());
    write_atomic(&summary, report.to_string().as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PlotReport {
    pub files: Vec<PathBuf>,
}

impl fmt::Display for PlotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

/// Re-renders every envelope CSV in the output directory as an SVG heatmap.
pub fn plot(ws: &Workspace) -> Result<PlotReport, PipelineError> {
    let out = ws.output_dir();
    let entries = std::fs::read_dir(&out).map_err(|_| PipelineError::MissingInput {
        path: out.display().to_string(),
        hint: "run `envelope` or `evaluate` first",
    })?;
    let mut csvs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".csv")
                && (name.starts_with("envelope_") || name.starts_with("predicted_") || name == "truth.csv")
        })
        .collect();
    csvs.sort();
    let cap = ws.config.envelope.cap_steps;
    let timestep = u64::from(ws.config.sim.timestep);
    let mut files = Vec::new();
    for csv in csvs {
        let table = read_envelope_csv(&csv)?;
        let minutes: Vec<u64> = table.time_grid.iter().map(|&t| t as u64 * timestep).collect();
        let title = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("envelope").to_string();
        let svg = plot::envelope_heatmap(&title, &table.power_grid, &minutes, &table.durations, cap);
        let path = csv.with_extension("svg");
        write_atomic(&path, svg.as_bytes())?;
        files.push(path);
    }
    Ok(PlotReport { files })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub generate: GenerateReport,
    pub fit: FitReport,
    pub envelope: EnvelopeReport,
    pub evaluate: EvaluateReport,
    pub plot: PlotReport,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== generate\n{}", self.generate)?;
        writeln!(f, "== fit\n{}", self.fit)?;
        writeln!(f, "== envelope\n{}", self.envelope)?;
        writeln!(f, "== evaluate\n{}", self.evaluate)?;
        write!(f, "== plot\n{}", self.plot)
    }
}

pub fn run_all(ws: &Workspace) -> Result<RunReport, PipelineError> {
    let generate = generate(ws)?;
    let fit = fit(ws)?;
    let envelope = predict(ws, 0)?;
    let evaluate = evaluate(ws)?;
    let plot = plot(ws)?;
    Ok(RunReport { generate, fit, envelope, evaluate, plot })
}
