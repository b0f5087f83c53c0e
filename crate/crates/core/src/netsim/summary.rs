use serde::Serialize;

use super::scenario::{EstimatorKind, Scenario};
use super::sim::SimLog;
use super::{run_scenario_with, NetError};
use crate::exec::{map_indexed, ExecutionMode};

/// Threshold at which a receiver counts as having flagged its attack.
pub const DETECTION_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    pub max_abs_dt_s: f64,
    pub max_abs_dtdot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverSummary {
    pub receiver: usize,
    pub estimators: Vec<EstimatorSummary>,
    /// Mean attack status while any attack on this receiver is active.
    pub mean_alpha_attack_window: Option<f64>,
    /// Attack status at the last iteration inside the attack window.
    pub terminal_alpha: Option<f64>,
    /// Iterations from the first attack start until the status first
    /// exceeds [`DETECTION_THRESHOLD`].
    pub iterations_to_detection: Option<usize>,
    pub mean_alpha: Option<f64>,
    pub mean_risk: Option<f64>,
    pub max_risk: Option<f64>,
}

impl ReceiverSummary {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub iterations: usize,
    pub receivers: Vec<ReceiverSummary>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl SimLog {
    /// Per-receiver maxima and averages over the whole run.
    pub fn summarize(&self, s: &Scenario) -> RunSummary {
        let receivers = (0..self.n_receivers)
            .map(|i| {
                let estimators = self
                    .estimators
                    .iter()
                    .map(|&kind| {
                        let mut out = EstimatorSummary {
                            kind,
                            max_abs_dt_s: 0.0,
                            max_abs_dtdot: 0.0,
                        };
                        for round in &self.rounds {
                            if let Some(r) = round.receivers[i].iter().find(|r| r.kind == kind) {
                                out.max_abs_dt_s = out.max_abs_dt_s.max(r.error[0].abs());
                                out.max_abs_dtdot = out.max_abs_dtdot.max(r.error[1].abs());
                            }
                        }
                        out
                    })
                    .collect();

                let attacks: Vec<_> = s.attacks.iter().filter(|a| a.victim == i).collect();
                let mut alpha_all = Vec::new();
                let mut alpha_window = Vec::new();
                let mut risks = Vec::new();
                let mut terminal_alpha = None;
                let mut detection = None;
                let first_start = attacks.iter().map(|a| a.start_s).fold(f64::INFINITY, f64::min);
                let mut since_start = 0usize;
                for round in &self.rounds {
                    let Some(r) = round.receivers[i].iter().find(|r| r.kind == EstimatorKind::Srdkf) else {
                        continue;
                    };
                    let (Some(alpha), Some(risk)) = (r.alpha, r.risk) else {
                        continue;
                    };
                    alpha_all.push(alpha);
                    risks.push(risk);
                    if attacks.iter().any(|a| a.is_active(round.t_s)) {
                        alpha_window.push(alpha);
                        terminal_alpha = Some(alpha);
                    }
                    if round.t_s >= first_start {
                        if detection.is_none() && alpha > DETECTION_THRESHOLD {
                            detection = Some(since_start);
                        }
                        since_start += 1;
                    }
                }
                ReceiverSummary {
                    receiver: i,
                    estimators,
                    mean_alpha_attack_window: mean(&alpha_window),
                    terminal_alpha,
                    iterations_to_detection: detection,
                    mean_alpha: mean(&alpha_all),
                    mean_risk: mean(&risks),
                    max_risk: risks.iter().copied().reduce(f64::max),
                }
            })
            .collect();
        RunSummary {
            seed: s.rng_seed,
            iterations: self.rounds.len(),
            receivers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Order statistics with linear interpolation; `None` for no data.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: at(0.5),
            p95: at(0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorAggregate {
    pub kind: EstimatorKind,
    pub max_abs_dt_s: Quantiles,
    /// Fraction of runs whose maximum timing error reached the alarm limit.
    pub exceed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverAggregate {
    pub receiver: usize,
    pub estimators: Vec<EstimatorAggregate>,
    pub mean_risk: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub mean_alpha_attack_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub runs: Vec<RunSummary>,
    pub receivers: Vec<ReceiverAggregate>,
}

impl MonteCarloSummary {
    /// Aggregates run summaries; the result does not depend on run order.
    pub fn aggregate(runs: Vec<RunSummary>, alert_limit_s: f64) -> Self {
        let n_rx = runs.first().map_or(0, |r| r.receivers.len());
        let receivers = (0..n_rx)
            .map(|i| {
                let kinds: Vec<EstimatorKind> = runs[0].receivers[i].estimators.iter().map(|e| e.kind).collect();
                let estimators = kinds
                    .into_iter()
                    .map(|kind| {
                        let maxima: Vec<f64> = runs
                            .iter()
                            .filter_map(|r| r.receivers[i].estimator(kind).map(|e| e.max_abs_dt_s))
                            .collect();
                        let exceed = maxima.iter().filter(|&&m| m >= alert_limit_s).count();
                        EstimatorAggregate {
                            kind,
                            exceed_fraction: exceed as f64 / maxima.len().max(1) as f64,
                            max_abs_dt_s: Quantiles::of(&maxima).expect("at least one run"),
                        }
                    })
                    .collect();
                let collect = |f: fn(&ReceiverSummary) -> Option<f64>| -> Vec<f64> {
                    runs.iter().filter_map(|r| f(&r.receivers[i])).collect()
                };
                ReceiverAggregate {
                    receiver: i,
                    estimators,
                    mean_risk: mean(&collect(|r| r.mean_risk)),
                    mean_alpha: mean(&collect(|r| r.mean_alpha)),
                    mean_alpha_attack_window: mean(&collect(|r| r.mean_alpha_attack_window)),
                }
            })
            .collect();
        Self { runs, receivers }
    }
}

/// Runs seeds `seed_base..seed_base + n_runs` and aggregates them.
///
/// In parallel mode the runs are spread across threads and each run is
/// stepped sequentially; results are identical in either mode.
pub fn monte_carlo(
    s: &Scenario,
    n_runs: usize,
    seed_base: u64,
    mode: ExecutionMode,
) -> Result<MonteCarloSummary, NetError> {
    let runs = map_indexed(n_runs, mode, |r| {
        let mut sc = s.clone();
        sc.rng_seed = seed_base.wrapping_add(r as u64);
        run_scenario_with(&sc, ExecutionMode::Sequential).map(|log| log.summarize(&sc))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(MonteCarloSummary::aggregate(runs, s.alert_limit_s))
}
