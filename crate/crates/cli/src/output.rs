//! File contract consumed by downstream tooling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use srdkf_core::netsim::{MonteCarloSummary, Quantiles, RunSummary, SimLog};
use thiserror::Error;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";

pub const TIMESERIES_HEADER: [&str; 10] = [
    "k",
    "t_s",
    "rx",
    "truth_T_us",
    "truth_Tdot_nsps",
    "est",
    "dT_us",
    "dTdot_nsps",
    "alpha",
    "risk",
];

const TIMESERIES_UNITS: &str = "# units: t_s [s]; truth_T_us and dT_us [us]; truth_Tdot_nsps and dTdot_nsps [ns/s]; rx is 1-based; dT = estimate - truth; alpha and risk are set-valued filter only";

const US: f64 = 1e6;
const NSPS: f64 = 1e9;

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> WriteError + '_ {
    move |source| WriteError {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits: enough to recover every double exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn create_dir(path: &Path) -> Result<(), WriteError> {
    std::fs::create_dir_all(path).map_err(io_at(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), WriteError> {
    std::fs::write(path, text).map_err(io_at(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WriteError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// One row per iteration, receiver and estimator.
pub fn write_timeseries(log: &SimLog, path: &Path) -> Result<(), WriteError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{TIMESERIES_UNITS}").map_err(io_at(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    let csv_err = |e: csv::Error| WriteError {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(TIMESERIES_HEADER).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for round in &log.rounds {
        let k = round.k.to_string();
        let t = fmt_f64(round.t_s);
        let truth_t = fmt_f64(round.truth[0] * US);
        let truth_tdot = fmt_f64(round.truth[1] * NSPS);
        for (i, records) in round.receivers.iter().enumerate() {
            let rx = (i + 1).to_string();
            for r in records {
                w.write_record([
                    k.as_str(),
                    t.as_str(),
                    rx.as_str(),
                    truth_t.as_str(),
                    truth_tdot.as_str(),
                    r.kind.label(),
                    &fmt_f64(r.error[0] * US),
                    &fmt_f64(r.error[1] * NSPS),
                    &opt(r.alpha),
                    &opt(r.risk),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(io_at(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorMaxima {
    #[serde(rename = "max_abs_dT_us")]
    pub max_abs_dt_us: f64,
    #[serde(rename = "max_abs_dTdot_nsps")]
    pub max_abs_dtdot_nsps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverReport {
    pub rx: usize,
    pub estimators: BTreeMap<String, EstimatorMaxima>,
    pub mean_alpha_attack_window: Option<f64>,
    pub terminal_alpha: Option<f64>,
    pub iterations_to_detection: Option<usize>,
    pub mean_alpha: Option<f64>,
    pub mean_risk: Option<f64>,
    pub max_risk: Option<f64>,
}

/// `summary.json` of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub iterations: usize,
    pub alert_limit_us: f64,
    pub receivers: Vec<ReceiverReport>,
}

impl RunReport {
    pub fn new(summary: &RunSummary, alert_limit_s: f64) -> Self {
        let receivers = summary
            .receivers
            .iter()
            .map(|r| ReceiverReport {
                rx: r.receiver + 1,
                estimators: r
                    .estimators
                    .iter()
                    .map(|e| {
                        (
                            e.kind.label().to_string(),
                            EstimatorMaxima {
                                max_abs_dt_us: e.max_abs_dt_s * US,
                                max_abs_dtdot_nsps: e.max_abs_dtdot * NSPS,
                            },
                        )
                    })
                    .collect(),
                mean_alpha_attack_window: r.mean_alpha_attack_window,
                terminal_alpha: r.terminal_alpha,
                iterations_to_detection: r.iterations_to_detection,
                mean_alpha: r.mean_alpha,
                mean_risk: r.mean_risk,
                max_risk: r.max_risk,
            })
            .collect();
        Self {
            seed: summary.seed,
            iterations: summary.iterations,
            alert_limit_us: alert_limit_s * US,
            receivers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilesUs {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl From<&Quantiles> for QuantilesUs {
    fn from(q: &Quantiles) -> Self {
        Self {
            mean: q.mean * US,
            median: q.median * US,
            p95: q.p95 * US,
            max: q.max * US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSpread {
    #[serde(rename = "max_abs_dT_us")]
    pub max_abs_dt_us: QuantilesUs,
    /// Fraction of runs whose maximum error reached the alert limit.
    pub exceed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverSpread {
    pub rx: usize,
    pub estimators: BTreeMap<String, EstimatorSpread>,
    pub mean_alpha_attack_window: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub mean_risk: Option<f64>,
}

/// `summary.json` of a Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub runs: usize,
    pub seed_base: u64,
    pub alert_limit_us: f64,
    pub receivers: Vec<ReceiverSpread>,
    /// Per-run summaries, in seed order.
    pub per_run: Vec<RunReport>,
}

impl BatchReport {
    pub fn new(mc: &MonteCarloSummary, seed_base: u64, alert_limit_s: f64) -> Self {
        Self {
            runs: mc.runs.len(),
            seed_base,
            alert_limit_us: alert_limit_s * US,
            receivers: mc
                .receivers
                .iter()
                .map(|r| ReceiverSpread {
                    rx: r.receiver + 1,
                    estimators: r
                        .estimators
                        .iter()
                        .map(|e| {
                            (
                                e.kind.label().to_string(),
                                EstimatorSpread {
                                    max_abs_dt_us: (&e.max_abs_dt_s).into(),
                                    exceed_fraction: e.exceed_fraction,
                                },
                            )
                        })
                        .collect(),
                    mean_alpha_attack_window: r.mean_alpha_attack_window,
                    mean_alpha: r.mean_alpha,
                    mean_risk: r.mean_risk,
                })
                .collect(),
            per_run: mc.runs.iter().map(|r| RunReport::new(r, alert_limit_s)).collect(),
        }
    }
}

/// One row of `robustness.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub magnitude_us: f64,
    pub size: usize,
    pub run: usize,
    pub seed: u64,
    pub mean_risk_rx1: Option<f64>,
    pub max_risk_rx1: Option<f64>,
    pub mean_alpha_attack_window_rx1: Option<f64>,
    pub srdkf_max_abs_dt_us_rx1: Option<f64>,
}

pub fn write_robustness(rows: &[RobustnessRow], path: &Path) -> Result<(), WriteError> {
    let csv_err = |e: csv::Error| WriteError {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record([
        "magnitude_us",
        "size",
        "run",
        "seed",
        "mean_risk_rx1",
        "max_risk_rx1",
        "mean_alpha_attack_window_rx1",
        "srdkf_max_abs_dT_us_rx1",
    ])
    .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            fmt_f64(r.magnitude_us),
            r.size.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            opt(r.mean_risk_rx1),
            opt(r.max_risk_rx1),
            opt(r.mean_alpha_attack_window_rx1),
            opt(r.srdkf_max_abs_dt_us_rx1),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_at(path))
}
