use serde::{Deserialize, Serialize};

use super::{NetError, NetworkGraph};
use crate::estimator::UpdateForm;
use crate::risk::{RiskForm, DEFAULT_LEVELS};
use crate::ALARM_LIMIT_S;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Replayed signal: constant bias on pseudoranges.
    Meaconing,
    /// Signal-level time walk: drift on Doppler, integrated drift on pseudoranges.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub victim: usize,
    pub kind: AttackKind,
    pub start_s: f64,
    pub end_s: f64,
    /// Seconds for meaconing, seconds/second for a ramp.
    pub magnitude: f64,
}

impl AttackSpec {
    pub fn is_active(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s <= self.end_s
    }

    /// Bias added to `(pseudorange, doppler)` residuals at time `t_s`.
    pub fn bias(&self, t_s: f64) -> (f64, f64) {
        if !self.is_active(t_s) {
            return (0.0, 0.0);
        }
        match self.kind {
            AttackKind::Meaconing => (self.magnitude, 0.0),
            AttackKind::Ramp => (self.magnitude * (t_s - self.start_s), self.magnitude),
        }
    }
}

/// Bounds on the moments of one time-varying Gaussian noise source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub cov_hi: f64,
}

impl Interval {
    pub const fn symmetric(mean_bound: f64, cov_hi: f64) -> Self {
        Self {
            mean_lo: -mean_bound,
            mean_hi: mean_bound,
            cov_hi,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.mean_hi - self.mean_lo)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.mean_hi + self.mean_lo)
    }

    /// Upper bound on the second moment about the midpoint.
    pub fn second_moment_bound(&self) -> f64 {
        self.half_width().powi(2) + self.cov_hi
    }

    fn validate(&self, field: &str) -> Result<(), NetError> {
        if self.mean_lo.is_nan() || self.mean_hi.is_nan() || self.mean_lo > self.mean_hi {
            return Err(NetError::invalid(
                format!("{field}.mean"),
                format!("lower bound {} exceeds upper bound {}", self.mean_lo, self.mean_hi),
            ));
        }
        if self.cov_hi < 0.0 || !self.cov_hi.is_finite() {
            return Err(NetError::invalid(
                format!("{field}.cov"),
                format!("must be finite and >= 0, got {}", self.cov_hi),
            ));
        }
        Ok(())
    }
}

/// SI units: seconds for clock bias quantities, seconds/second for drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBounds {
    pub process_t: Interval,
    pub process_tdot: Interval,
    pub pseudorange: Interval,
    pub doppler: Interval,
    pub initial_t: Interval,
    pub initial_tdot: Interval,
}

impl Default for NoiseBounds {
    fn default() -> Self {
        Self {
            process_t: Interval::symmetric(2.5e-6, 4e-12),
            process_tdot: Interval::symmetric(3.5e-9, 6e-18),
            pseudorange: Interval::symmetric(1e-6, 3e-12),
            doppler: Interval::symmetric(2.5e-9, 6e-18),
            initial_t: Interval::symmetric(1.5e-6, 2e-12),
            initial_tdot: Interval::symmetric(2.5e-9, 4e-18),
        }
    }
}

impl NoiseBounds {
    fn validate(&self) -> Result<(), NetError> {
        self.process_t.validate("bounds.process_t")?;
        self.process_tdot.validate("bounds.process_tdot")?;
        self.pseudorange.validate("bounds.pseudorange")?;
        self.doppler.validate("bounds.doppler")?;
        self.initial_t.validate("bounds.initial_t")?;
        self.initial_tdot.validate("bounds.initial_tdot")
    }
}

/// How the clock state enters each residual pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementModel {
    /// Every residual observes `T + Ṫ`.
    #[default]
    Ones,
    /// Pseudoranges observe `T`, Dopplers observe `Ṫ`.
    BlockDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Set-valued distributed filter with mitigation.
    Srdkf,
    /// Point-valued adaptive distributed filter.
    Pvdkf,
    /// Single-receiver adaptive filter.
    Akf,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Srdkf, EstimatorKind::Pvdkf, EstimatorKind::Akf];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Srdkf => "srdkf",
            EstimatorKind::Pvdkf => "pvdkf",
            EstimatorKind::Akf => "akf",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "srdkf" => Ok(EstimatorKind::Srdkf),
            "pvdkf" => Ok(EstimatorKind::Pvdkf),
            "akf" => Ok(EstimatorKind::Akf),
            other => Err(format!("unknown estimator `{other}` (expected srdkf, pvdkf or akf)")),
        }
    }
}

/// Complete description of one simulated experiment, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: NetworkGraph,
    pub n_satellites: usize,
    pub dt_s: f64,
    pub duration_s: f64,
    pub attacks: Vec<AttackSpec>,
    pub bounds: NoiseBounds,
    /// Forgetting factor of the adaptive measurement covariance.
    pub psi: f64,
    /// Confidence radius of the risk bound, in standard deviations.
    pub gamma: f64,
    pub levels: usize,
    pub alert_limit_s: f64,
    pub rng_seed: u64,
    /// Covariance inflation applied when turning bounds into p-Zonotopes.
    pub inflation: f64,
    /// Period at which noise moments are re-drawn.
    pub noise_hold_s: f64,
    pub measurement_model: MeasurementModel,
    pub update_form: UpdateForm,
    pub risk_form: RiskForm,
    /// Neighbor bundles arrive one round late when set.
    pub broadcast_delay: bool,
    /// Generator cap for the corrected error set; `None` keeps every column.
    pub max_generators: Option<usize>,
    /// Floor on the adaptive measurement covariance, as a multiple of the
    /// nominal covariance built from the noise bounds.
    pub r_floor: f64,
    /// Whether the set-valued filter also adapts its measurement covariance.
    /// When off it uses the nominal covariance and relies on the attack
    /// status alone; the point-valued baselines always adapt.
    pub srdkf_adaptive_r: bool,
    pub estimators: Vec<EstimatorKind>,
}

impl Scenario {
    /// Bare scenario: no attacks, default bounds and tuning.
    pub fn new(graph: NetworkGraph, duration_s: f64) -> Self {
        Self {
            graph,
            n_satellites: 8,
            dt_s: 1.0,
            duration_s,
            attacks: Vec::new(),
            bounds: NoiseBounds::default(),
            psi: 0.3,
            gamma: DEFAULT_GAMMA,
            levels: DEFAULT_LEVELS,
            alert_limit_s: ALARM_LIMIT_S,
            rng_seed: 0,
            inflation: DEFAULT_INFLATION,
            noise_hold_s: 30.0,
            measurement_model: MeasurementModel::default(),
            update_form: UpdateForm::Batch,
            risk_form: RiskForm::Slab,
            broadcast_delay: false,
            max_generators: Some(DEFAULT_MAX_GENERATORS),
            r_floor: DEFAULT_R_FLOOR,
            srdkf_adaptive_r: false,
            estimators: EstimatorKind::ALL.to_vec(),
        }
    }

    pub fn n_receivers(&self) -> usize {
        self.graph.n_receivers()
    }

    /// Number of filter iterations; fractional trailing steps are dropped.
    pub fn iterations(&self) -> usize {
        (self.duration_s / self.dt_s + 1e-9).floor() as usize
    }

    pub fn has(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let n = self.n_receivers();
        if n == 0 {
            return Err(NetError::invalid("graph", "at least one receiver is required".into()));
        }
        if self.n_satellites == 0 {
            return Err(NetError::invalid("n_satellites", "must be >= 1".into()));
        }
        if self.dt_s <= 0.0 || !self.dt_s.is_finite() {
            return Err(NetError::invalid(
                "dt_s",
                format!("must be positive, got {}", self.dt_s),
            ));
        }
        if self.duration_s < 0.0 || !self.duration_s.is_finite() {
            return Err(NetError::invalid(
                "duration_s",
                format!("must be finite and >= 0, got {}", self.duration_s),
            ));
        }
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(NetError::invalid(
                "psi",
                format!("must lie in [0, 1], got {}", self.psi),
            ));
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(NetError::invalid(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if self.levels == 0 {
            return Err(NetError::invalid("levels", "must be >= 1".into()));
        }
        if self.alert_limit_s <= 0.0 || !self.alert_limit_s.is_finite() {
            return Err(NetError::invalid(
                "alert_limit_s",
                format!("must be positive, got {}", self.alert_limit_s),
            ));
        }
        if self.inflation <= 0.0 || !self.inflation.is_finite() {
            return Err(NetError::invalid(
                "inflation",
                format!("must be positive, got {}", self.inflation),
            ));
        }
        if self.noise_hold_s.is_nan() || self.noise_hold_s <= 0.0 {
            return Err(NetError::invalid(
                "noise_hold_s",
                format!("must be positive, got {}", self.noise_hold_s),
            ));
        }
        if self.r_floor < 0.0 || !self.r_floor.is_finite() {
            return Err(NetError::invalid(
                "r_floor",
                format!("must be finite and >= 0, got {}", self.r_floor),
            ));
        }
        if let Some(cap) = self.max_generators {
            if cap < 2 {
                return Err(NetError::invalid("max_generators", "must be >= 2".into()));
            }
        }
        self.bounds.validate()?;
        for (i, a) in self.attacks.iter().enumerate() {
            if a.victim >= n {
                return Err(NetError::invalid(
                    format!("attacks[{i}].victim"),
                    format!("receiver {} does not exist (network has {n})", a.victim),
                ));
            }
            if a.start_s.is_nan() || a.end_s.is_nan() || a.start_s >= a.end_s {
                return Err(NetError::invalid(
                    format!("attacks[{i}].start_s"),
                    format!("start {} must precede end {}", a.start_s, a.end_s),
                ));
            }
            if a.magnitude < 0.0 || !a.magnitude.is_finite() {
                return Err(NetError::invalid(
                    format!("attacks[{i}].magnitude"),
                    format!("must be finite and >= 0, got {}", a.magnitude),
                ));
            }
        }
        Ok(())
    }

    /// Seven receivers under two simultaneous ramp attacks.
    ///
    /// Receiver 5 (index 4) is walked at 100 ns/s from 40 s to 1040 s and
    /// receiver 1 (index 0) at 400 ns/s from 800 s to 1300 s. The graph
    /// gives receiver 4 four clean neighbors, receiver 3 three neighbors
    /// including both victims, and receiver 5 two neighbors of which one
    /// is receiver 1.
    pub fn coordinated() -> Self {
        let mut s = Self::new(
            NetworkGraph::from_edges(7, &COORDINATED_EDGES).expect("static edge list"),
            1300.0,
        );
        s.attacks = vec![
            AttackSpec {
                victim: 4,
                kind: AttackKind::Ramp,
                start_s: 40.0,
                end_s: 1040.0,
                magnitude: 100e-9,
            },
            AttackSpec {
                victim: 0,
                kind: AttackKind::Ramp,
                start_s: 800.0,
                end_s: 1300.0,
                magnitude: 400e-9,
            },
        ];
        s
    }

    /// One cell of the robustness sweep: meaconing of receiver 1 from 10 s
    /// to 100 s on a fully connected network of `size` receivers.
    pub fn robustness_cell(magnitude_s: f64, size: usize) -> Self {
        let mut s = Self::new(NetworkGraph::fully_connected(size), 100.0);
        s.attacks = vec![AttackSpec {
            victim: 0,
            kind: AttackKind::Meaconing,
            start_s: 10.0,
            end_s: 100.0,
            magnitude: magnitude_s,
        }];
        s
    }
}

/// Zero-based undirected edges of the coordinated-attack network.
pub const COORDINATED_EDGES: [(usize, usize); 10] = [
    (0, 1),
    (0, 2),
    (0, 4),
    (1, 3),
    (1, 5),
    (2, 3),
    (2, 4),
    (3, 5),
    (3, 6),
    (5, 6),
];

/// Meaconing magnitudes of the robustness sweep, seconds.
pub const ROBUSTNESS_MAGNITUDES_S: [f64; 4] = [30e-6, 45e-6, 60e-6, 100e-6];
/// Network sizes of the robustness sweep.
pub const ROBUSTNESS_SIZES: std::ops::RangeInclusive<usize> = 2..=7;
pub const ROBUSTNESS_RUNS: usize = 50;

pub const DEFAULT_MAX_GENERATORS: usize = 24;
/// The adaptive covariance of the point-valued filters never drops below
/// this multiple of the nominal covariance.
pub const DEFAULT_R_FLOOR: f64 = 10.0;
/// Covariance inflation of the noise p-Zonotopes. Keeps the attack status
/// of authentic 16-dimensional innovations near zero.
pub const DEFAULT_INFLATION: f64 = 12.0;
/// Confidence radius of the risk bound; the Gaussian tail outside it is
/// about 1e-7.
pub const DEFAULT_GAMMA: f64 = 5.5;
