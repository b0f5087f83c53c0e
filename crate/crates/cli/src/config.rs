//! Scenario files: JSON with explicit units in every key.
//!
//! Times are in seconds (`_s`), clock biases in microseconds (`_us`), drift
//! rates in nanoseconds per second (`_nsps`) and variances in the squares of
//! those (`_us2`, `_nsps2`). Receivers are numbered from 1, matching the
//! `rx` column of the time series.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use srdkf_core::estimator::UpdateForm;
use srdkf_core::netsim::{
    AttackKind, AttackSpec, EstimatorKind, Interval, MeasurementModel, NetError, NetworkGraph, NoiseBounds, Scenario,
};
use srdkf_core::risk::RiskForm;

const US: f64 = 1e6;
const US2: f64 = 1e12;
const NSPS: f64 = 1e9;
const NSPS2: f64 = 1e18;

/// Top-level keys without a default.
pub const REQUIRED_KEYS: [&str; 2] = ["graph", "duration_s"];

/// A configuration problem, located by its path inside the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub receivers: usize,
    /// Undirected links between 1-based receivers. Self-links are implied.
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalUs {
    pub mean_lo_us: f64,
    pub mean_hi_us: f64,
    pub cov_hi_us2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalNsps {
    pub mean_lo_nsps: f64,
    pub mean_hi_nsps: f64,
    pub cov_hi_nsps2: f64,
}

impl IntervalUs {
    fn to_si(self) -> Interval {
        Interval {
            mean_lo: self.mean_lo_us / US,
            mean_hi: self.mean_hi_us / US,
            cov_hi: self.cov_hi_us2 / US2,
        }
    }

    fn from_si(i: Interval) -> Self {
        Self {
            mean_lo_us: i.mean_lo * US,
            mean_hi_us: i.mean_hi * US,
            cov_hi_us2: i.cov_hi * US2,
        }
    }
}

impl IntervalNsps {
    fn to_si(self) -> Interval {
        Interval {
            mean_lo: self.mean_lo_nsps / NSPS,
            mean_hi: self.mean_hi_nsps / NSPS,
            cov_hi: self.cov_hi_nsps2 / NSPS2,
        }
    }

    fn from_si(i: Interval) -> Self {
        Self {
            mean_lo_nsps: i.mean_lo * NSPS,
            mean_hi_nsps: i.mean_hi * NSPS,
            cov_hi_nsps2: i.cov_hi * NSPS2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub process_t: IntervalUs,
    pub process_tdot: IntervalNsps,
    pub pseudorange: IntervalUs,
    pub doppler: IntervalNsps,
    pub initial_t: IntervalUs,
    pub initial_tdot: IntervalNsps,
}

impl Default for BoundsFile {
    fn default() -> Self {
        Self::from_si(&NoiseBounds::default())
    }
}

impl BoundsFile {
    fn to_si(self) -> NoiseBounds {
        NoiseBounds {
            process_t: self.process_t.to_si(),
            process_tdot: self.process_tdot.to_si(),
            pseudorange: self.pseudorange.to_si(),
            doppler: self.doppler.to_si(),
            initial_t: self.initial_t.to_si(),
            initial_tdot: self.initial_tdot.to_si(),
        }
    }

    fn from_si(b: &NoiseBounds) -> Self {
        Self {
            process_t: IntervalUs::from_si(b.process_t),
            process_tdot: IntervalNsps::from_si(b.process_tdot),
            pseudorange: IntervalUs::from_si(b.pseudorange),
            doppler: IntervalNsps::from_si(b.doppler),
            initial_t: IntervalUs::from_si(b.initial_t),
            initial_tdot: IntervalNsps::from_si(b.initial_tdot),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackFile {
    /// Constant pseudorange bias.
    Meaconing {
        victim: usize,
        start_s: f64,
        end_s: f64,
        bias_us: f64,
    },
    /// Clock walked at a constant rate.
    Ramp {
        victim: usize,
        start_s: f64,
        end_s: f64,
        rate_nsps: f64,
    },
}

impl AttackFile {
    fn to_si(self) -> (usize, AttackSpec) {
        let (victim, kind, start_s, end_s, magnitude) = match self {
            AttackFile::Meaconing {
                victim,
                start_s,
                end_s,
                bias_us,
            } => (victim, AttackKind::Meaconing, start_s, end_s, bias_us / US),
            AttackFile::Ramp {
                victim,
                start_s,
                end_s,
                rate_nsps,
            } => (victim, AttackKind::Ramp, start_s, end_s, rate_nsps / NSPS),
        };
        let spec = AttackSpec {
            victim: victim.wrapping_sub(1),
            kind,
            start_s,
            end_s,
            magnitude,
        };
        (victim, spec)
    }

    fn from_si(a: &AttackSpec) -> Self {
        let victim = a.victim + 1;
        match a.kind {
            AttackKind::Meaconing => AttackFile::Meaconing {
                victim,
                start_s: a.start_s,
                end_s: a.end_s,
                bias_us: a.magnitude * US,
            },
            AttackKind::Ramp => AttackFile::Ramp {
                victim,
                start_s: a.start_s,
                end_s: a.end_s,
                rate_nsps: a.magnitude * NSPS,
            },
        }
    }

    fn magnitude_key(&self) -> &'static str {
        match self {
            AttackFile::Meaconing { .. } => "bias_us",
            AttackFile::Ramp { .. } => "rate_nsps",
        }
    }
}

fn defaults() -> Scenario {
    Scenario::new(NetworkGraph::disconnected(1), 0.0)
}

fn default_n_satellites() -> usize {
    defaults().n_satellites
}
fn default_dt_s() -> f64 {
    defaults().dt_s
}
fn default_psi() -> f64 {
    defaults().psi
}
fn default_gamma() -> f64 {
    defaults().gamma
}
fn default_levels() -> usize {
    defaults().levels
}
fn default_alert_limit_us() -> f64 {
    defaults().alert_limit_s * US
}
fn default_inflation() -> f64 {
    defaults().inflation
}
fn default_noise_hold_s() -> f64 {
    defaults().noise_hold_s
}
fn default_max_generators() -> Option<usize> {
    defaults().max_generators
}
fn default_r_floor() -> f64 {
    defaults().r_floor
}
fn default_estimators() -> Vec<EstimatorKind> {
    defaults().estimators
}

/// On-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphFile,
    pub duration_s: f64,
    #[serde(default = "default_dt_s")]
    pub dt_s: f64,
    #[serde(default = "default_n_satellites")]
    pub n_satellites: usize,
    #[serde(default)]
    pub attacks: Vec<AttackFile>,
    #[serde(default)]
    pub bounds: BoundsFile,
    #[serde(default = "default_psi")]
    pub psi: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_alert_limit_us")]
    pub alert_limit_us: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
    #[serde(default = "default_noise_hold_s")]
    pub noise_hold_s: f64,
    #[serde(default)]
    pub measurement_model: MeasurementModel,
    #[serde(default)]
    pub update_form: UpdateForm,
    #[serde(default)]
    pub risk_form: RiskForm,
    #[serde(default)]
    pub broadcast_delay: bool,
    /// `null` keeps every generator.
    #[serde(default = "default_max_generators")]
    pub max_generators: Option<usize>,
    #[serde(default = "default_r_floor")]
    pub r_floor: f64,
    #[serde(default)]
    pub srdkf_adaptive_r: bool,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
}

impl ScenarioFile {
    /// Parses a scenario file, reporting every missing required key at
    /// once and the JSON path of any other problem.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Err(missing(&REQUIRED_KEYS));
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))?;
        if let Some(obj) = value.as_object() {
            let absent: Vec<&str> = REQUIRED_KEYS
                .iter()
                .copied()
                .filter(|k| !obj.contains_key(*k))
                .collect();
            if !absent.is_empty() {
                return Err(missing(&absent));
            }
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::new(e.path().to_string(), e.inner().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError {
            message: format!("{} ({})", e.message, path.display()),
            ..e
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    /// Converts to SI units and checks every invariant.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let n = self.graph.receivers;
        let mut edges = Vec::with_capacity(self.graph.edges.len());
        for (i, &[a, b]) in self.graph.edges.iter().enumerate() {
            for (end, id) in [a, b].into_iter().enumerate() {
                if id == 0 || id > n {
                    return Err(ConfigError::new(
                        format!("graph.edges[{i}][{end}]"),
                        format!("receiver {id} is outside 1..={n}"),
                    ));
                }
            }
            edges.push((a - 1, b - 1));
        }
        let graph = NetworkGraph::from_edges(n, &edges).map_err(core_error)?;

        let mut attacks = Vec::with_capacity(self.attacks.len());
        for (i, a) in self.attacks.iter().enumerate() {
            let (victim, spec) = a.to_si();
            if victim == 0 || victim > n {
                return Err(ConfigError::new(
                    format!("attacks[{i}].victim"),
                    format!("receiver {victim} is outside 1..={n}"),
                ));
            }
            if spec.magnitude < 0.0 || !spec.magnitude.is_finite() {
                return Err(ConfigError::new(
                    format!("attacks[{i}].{}", a.magnitude_key()),
                    "must be finite and >= 0",
                ));
            }
            attacks.push(spec);
        }
        if self.estimators.is_empty() {
            return Err(ConfigError::new("estimators", "select at least one estimator"));
        }

        let mut s = Scenario::new(graph, self.duration_s);
        s.n_satellites = self.n_satellites;
        s.dt_s = self.dt_s;
        s.attacks = attacks;
        s.bounds = self.bounds.to_si();
        s.psi = self.psi;
        s.gamma = self.gamma;
        s.levels = self.levels;
        s.alert_limit_s = self.alert_limit_us / US;
        s.rng_seed = self.seed;
        s.inflation = self.inflation;
        s.noise_hold_s = self.noise_hold_s;
        s.measurement_model = self.measurement_model;
        s.update_form = self.update_form;
        s.risk_form = self.risk_form;
        s.broadcast_delay = self.broadcast_delay;
        s.max_generators = self.max_generators;
        s.r_floor = self.r_floor;
        s.srdkf_adaptive_r = self.srdkf_adaptive_r;
        s.estimators = self.estimators.clone();
        s.validate().map_err(core_error)?;
        Ok(s)
    }

    /// File form of an in-memory scenario, e.g. a preset.
    pub fn from_scenario(s: &Scenario) -> Self {
        let m = s.graph.to_matrix();
        let edges = (0..m.len())
            .flat_map(|i| (i + 1..m.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| m[i][j])
            .map(|(i, j)| [i + 1, j + 1])
            .collect();
        Self {
            graph: GraphFile {
                receivers: s.n_receivers(),
                edges,
            },
            duration_s: s.duration_s,
            dt_s: s.dt_s,
            n_satellites: s.n_satellites,
            attacks: s.attacks.iter().map(AttackFile::from_si).collect(),
            bounds: BoundsFile::from_si(&s.bounds),
            psi: s.psi,
            gamma: s.gamma,
            levels: s.levels,
            alert_limit_us: s.alert_limit_s * US,
            seed: s.rng_seed,
            inflation: s.inflation,
            noise_hold_s: s.noise_hold_s,
            measurement_model: s.measurement_model,
            update_form: s.update_form,
            risk_form: s.risk_form,
            broadcast_delay: s.broadcast_delay,
            max_generators: s.max_generators,
            r_floor: s.r_floor,
            srdkf_adaptive_r: s.srdkf_adaptive_r,
            estimators: s.estimators.clone(),
        }
    }
}

fn missing(keys: &[&str]) -> ConfigError {
    ConfigError::new("", format!("missing required field(s): {}", keys.join(", ")))
}

/// Renames core validation paths to the unit-suffixed file keys.
fn core_error(e: NetError) -> ConfigError {
    match e {
        NetError::InvalidScenario { field, reason } => {
            let path = match field.as_str() {
                "alert_limit_s" => "alert_limit_us".to_string(),
                "rng_seed" => "seed".to_string(),
                f => match f.rsplit_once('.') {
                    Some((head, tail @ ("mean" | "cov"))) if head.starts_with("bounds.") => {
                        let unit = if head.ends_with("tdot") || head.ends_with("doppler") {
                            "nsps"
                        } else {
                            "us"
                        };
                        if tail == "mean" {
                            format!("{head}.mean_lo_{unit}")
                        } else {
                            format!("{head}.cov_hi_{unit}2")
                        }
                    }
                    _ => f.to_string(),
                },
            };
            ConfigError::new(path, reason)
        }
        other => ConfigError::new("", other.to_string()),
    }
}

/// Human-readable list of the optional keys and their defaults.
pub fn defaults_help() -> String {
    let d = ScenarioFile::from_scenario(&defaults());
    let b = d.bounds;
    let gens = d.max_generators.map_or_else(|| "null".to_string(), |g| g.to_string());
    format!(
        "SCENARIO FILE (JSON, all keys carry their unit):\n  \
         required: graph {{receivers, edges: [[a, b], ...] (1-based)}}, duration_s\n  \
         attacks: [{{kind: ramp, victim, start_s, end_s, rate_nsps}} | {{kind: meaconing, victim, start_s, end_s, bias_us}}] (default [])\n  \
         dt_s = {}, n_satellites = {}, psi = {}, gamma = {}, levels = {}, alert_limit_us = {}\n  \
         seed = 0, inflation = {}, noise_hold_s = {}, r_floor = {}, max_generators = {gens}\n  \
         measurement_model = ones | block_diagonal, update_form = batch | sequential, risk_form = slab | literal\n  \
         broadcast_delay = false, srdkf_adaptive_r = false, estimators = [srdkf, pvdkf, akf]\n  \
         bounds (mean +/- and variance upper bound):\n    \
         process_t {} us / {} us2, process_tdot {} ns/s / {} (ns/s)2\n    \
         pseudorange {} us / {} us2, doppler {} ns/s / {} (ns/s)2\n    \
         initial_t {} us / {} us2, initial_tdot {} ns/s / {} (ns/s)2",
        d.dt_s,
        d.n_satellites,
        d.psi,
        d.gamma,
        d.levels,
        d.alert_limit_us,
        d.inflation,
        d.noise_hold_s,
        d.r_floor,
        b.process_t.mean_hi_us,
        b.process_t.cov_hi_us2,
        b.process_tdot.mean_hi_nsps,
        b.process_tdot.cov_hi_nsps2,
        b.pseudorange.mean_hi_us,
        b.pseudorange.cov_hi_us2,
        b.doppler.mean_hi_nsps,
        b.doppler.cov_hi_nsps2,
        b.initial_t.mean_hi_us,
        b.initial_t.cov_hi_us2,
        b.initial_tdot.mean_hi_nsps,
        b.initial_tdot.cov_hi_nsps2,
    )
}
