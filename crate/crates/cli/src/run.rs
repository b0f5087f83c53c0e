//! Orchestrates presets, Monte-Carlo batches and the robustness sweep.

use std::path::{Path, PathBuf};

use serde::Serialize;
use srdkf_core::exec::{map_indexed, ExecutionMode};
use srdkf_core::netsim::{
    run_scenario_with, EstimatorKind, MonteCarloSummary, NetError, Quantiles, RunSummary, Scenario,
    ROBUSTNESS_MAGNITUDES_S, ROBUSTNESS_RUNS, ROBUSTNESS_SIZES,
};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioFile};
use crate::output::{
    self, BatchReport, QuantilesUs, RobustnessRow, RunReport, WriteError, RESOLVED_CONFIG_FILE, ROBUSTNESS_FILE,
    SUMMARY_FILE, TIMESERIES_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Coordinated,
    Robustness,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub mode: ExecutionMode,
    pub timeseries: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Write(#[from] WriteError),
    #[error("simulation failed: {0}")]
    Sim(#[from] NetError),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Write(_) | CliError::Sim(_) => 1,
        }
    }
}

impl RunConfig {
    fn apply_overrides(&self, file: &mut ScenarioFile) {
        if let Some(seed) = self.seed {
            file.seed = seed;
        }
        if let Some(est) = &self.estimators {
            file.estimators = est.clone();
        }
    }

    fn runs(&self, default: usize) -> Result<usize, ConfigError> {
        match self.runs.unwrap_or(default) {
            0 => Err(ConfigError::new("--runs", "must be at least 1")),
            n => Ok(n),
        }
    }

    /// The scenario file this invocation runs, with CLI overrides applied.
    pub fn resolve(&self) -> Result<ScenarioFile, ConfigError> {
        let mut file = match (self.preset, &self.scenario) {
            (Preset::None, Some(path)) => ScenarioFile::load(path)?,
            (Preset::None, None) => return Err(ConfigError::new("--scenario", "required when --preset is none")),
            (_, Some(_)) => return Err(ConfigError::new("--scenario", "cannot be combined with a preset")),
            (Preset::Coordinated, None) => ScenarioFile::from_scenario(&Scenario::coordinated()),
            (Preset::Robustness, None) => {
                return Err(ConfigError::new("--preset", "robustness is a sweep, not one scenario"))
            }
        };
        self.apply_overrides(&mut file);
        Ok(file)
    }
}

/// Where the results went.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Single(RunReport),
    Batch(BatchReport),
    Sweep(Vec<RobustnessCell>),
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.preset == Preset::Robustness {
        if cfg.scenario.is_some() {
            return Err(ConfigError::new("--scenario", "cannot be combined with a preset").into());
        }
        return robustness(cfg).map(Outcome::Sweep);
    }
    let file = cfg.resolve()?;
    let scenario = file.to_scenario()?;
    let runs = cfg.runs(1)?;
    output::create_dir(&cfg.out)?;
    output::write_text(&cfg.out.join(RESOLVED_CONFIG_FILE), &file.to_json())?;
    if runs == 1 {
        let summary = run_one(&scenario, &cfg.out, cfg.timeseries, cfg.mode)?;
        let report = RunReport::new(&summary, scenario.alert_limit_s);
        output::write_json(&cfg.out.join(SUMMARY_FILE), &report)?;
        return Ok(Outcome::Single(report));
    }

    let base = file.seed;
    let results = map_indexed(runs, cfg.mode, |r| -> Result<RunSummary, CliError> {
        let mut run_file = file.clone();
        run_file.seed = base.wrapping_add(r as u64);
        let s = run_file.to_scenario()?;
        let dir = cfg.out.join(format!("run_{r:03}"));
        output::create_dir(&dir)?;
        output::write_text(&dir.join(RESOLVED_CONFIG_FILE), &run_file.to_json())?;
        let summary = run_one(&s, &dir, cfg.timeseries, ExecutionMode::Sequential)?;
        output::write_json(&dir.join(SUMMARY_FILE), &RunReport::new(&summary, s.alert_limit_s))?;
        Ok(summary)
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mc = MonteCarloSummary::aggregate(summaries, scenario.alert_limit_s);
    let report = BatchReport::new(&mc, base, scenario.alert_limit_s);
    output::write_json(&cfg.out.join(SUMMARY_FILE), &report)?;
    Ok(Outcome::Batch(report))
}

fn run_one(s: &Scenario, dir: &Path, timeseries: bool, mode: ExecutionMode) -> Result<RunSummary, CliError> {
    let log = run_scenario_with(s, mode)?;
    if timeseries {
        output::write_timeseries(&log, &dir.join(TIMESERIES_FILE))?;
    }
    Ok(log.summarize(s))
}

/// Aggregate of one (magnitude, network size) cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCell {
    pub magnitude_us: f64,
    pub size: usize,
    pub runs: usize,
    /// Spread over runs of the per-run mean risk at receiver 1.
    pub mean_risk_rx1: Option<Quantiles>,
    pub mean_alpha_attack_window_rx1: Option<f64>,
    #[serde(rename = "srdkf_max_abs_dT_us_rx1")]
    pub srdkf_max_abs_dt_us_rx1: Option<QuantilesUs>,
}

fn cell_dir(magnitude_us: f64, size: usize) -> String {
    let m = (magnitude_us * 1e3).round() / 1e3;
    format!("m{m}_n{size}")
}

/// Meaconing sweep over magnitudes and fully connected network sizes.
///
/// Writes `cells/m{magnitude}_n{size}/` with the resolved scenario and a
/// batch summary, a per-run `robustness.csv` and a per-cell `summary.json`.
fn robustness(cfg: &RunConfig) -> Result<Vec<RobustnessCell>, CliError> {
    let runs = cfg.runs(ROBUSTNESS_RUNS)?;
    let mut cells = Vec::new();
    for &m in &ROBUSTNESS_MAGNITUDES_S {
        for size in ROBUSTNESS_SIZES {
            let mut file = ScenarioFile::from_scenario(&Scenario::robustness_cell(m, size));
            cfg.apply_overrides(&mut file);
            let scenario = file.to_scenario()?;
            cells.push((m * 1e6, size, file, scenario));
        }
    }
    output::create_dir(&cfg.out)?;

    let jobs = cells.len() * runs;
    let results = map_indexed(jobs, cfg.mode, |job| -> Result<RunSummary, CliError> {
        let (_, _, file, _) = &cells[job / runs];
        let mut run_file = file.clone();
        run_file.seed = file.seed.wrapping_add((job % runs) as u64);
        let s = run_file.to_scenario()?;
        Ok(run_scenario_with(&s, ExecutionMode::Sequential)?.summarize(&s))
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(jobs);
    let mut out = Vec::with_capacity(cells.len());
    for (c, (magnitude_us, size, file, scenario)) in cells.iter().enumerate() {
        let cell_runs = summaries[c * runs..(c + 1) * runs].to_vec();
        for (r, run) in cell_runs.iter().enumerate() {
            let rx1 = &run.receivers[0];
            rows.push(RobustnessRow {
                magnitude_us: *magnitude_us,
                size: *size,
                run: r,
                seed: run.seed,
                mean_risk_rx1: rx1.mean_risk,
                max_risk_rx1: rx1.max_risk,
                mean_alpha_attack_window_rx1: rx1.mean_alpha_attack_window,
                srdkf_max_abs_dt_us_rx1: rx1.estimator(EstimatorKind::Srdkf).map(|e| e.max_abs_dt_s * 1e6),
            });
        }
        let risks: Vec<f64> = cell_runs.iter().filter_map(|r| r.receivers[0].mean_risk).collect();
        let alphas: Vec<f64> = cell_runs
            .iter()
            .filter_map(|r| r.receivers[0].mean_alpha_attack_window)
            .collect();
        let errors: Vec<f64> = cell_runs
            .iter()
            .filter_map(|r| r.receivers[0].estimator(EstimatorKind::Srdkf).map(|e| e.max_abs_dt_s))
            .collect();

        let dir = cfg.out.join("cells").join(cell_dir(*magnitude_us, *size));
        output::create_dir(&dir)?;
        output::write_text(&dir.join(RESOLVED_CONFIG_FILE), &file.to_json())?;
        let mc = MonteCarloSummary::aggregate(cell_runs, scenario.alert_limit_s);
        output::write_json(
            &dir.join(SUMMARY_FILE),
            &BatchReport::new(&mc, file.seed, scenario.alert_limit_s),
        )?;

        out.push(RobustnessCell {
            magnitude_us: *magnitude_us,
            size: *size,
            runs,
            mean_risk_rx1: Quantiles::of(&risks),
            mean_alpha_attack_window_rx1: (!alphas.is_empty())
                .then(|| alphas.iter().sum::<f64>() / alphas.len() as f64),
            srdkf_max_abs_dt_us_rx1: Quantiles::of(&errors).as_ref().map(QuantilesUs::from),
        });
    }
    output::write_robustness(&rows, &cfg.out.join(ROBUSTNESS_FILE))?;
    output::write_json(&cfg.out.join(SUMMARY_FILE), &out)?;
    Ok(out)
}
