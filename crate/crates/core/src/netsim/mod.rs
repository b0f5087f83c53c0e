//! Discrete-time simulation of a receiver network under spoofing.
//!
//! A single clock truth is propagated by the clock model. Every receiver
//! observes it through its own noisy, possibly attacked, residuals and runs
//! the enabled estimators. Randomness comes from one ChaCha stream for the
//! truth and one per receiver, so results do not depend on how receivers
//! are scheduled across threads.

mod graph;
mod noise;
mod scenario;
mod sim;
mod summary;

use thiserror::Error;

use crate::estimator::FilterError;
use crate::setcore::SetError;

pub use graph::NetworkGraph;
pub use noise::{
    attack_bias, draw_moments, generate_measurement, measurement_matrix, sample_bounded_gaussian, step_truth,
    TimeVaryingNoise,
};
pub use scenario::{
    AttackKind, AttackSpec, EstimatorKind, Interval, MeasurementModel, NoiseBounds, Scenario, COORDINATED_EDGES,
    DEFAULT_GAMMA, DEFAULT_INFLATION, DEFAULT_MAX_GENERATORS, DEFAULT_R_FLOOR, ROBUSTNESS_MAGNITUDES_S,
    ROBUSTNESS_RUNS, ROBUSTNESS_SIZES,
};
pub use sim::{run_scenario, run_scenario_with, EstimateRecord, RoundRecord, SimLog, World};
pub use summary::{
    monte_carlo, EstimatorAggregate, EstimatorSummary, MonteCarloSummary, Quantiles, ReceiverAggregate,
    ReceiverSummary, RunSummary, DETECTION_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },
    #[error("receiver {receiver} failed at iteration {k}: {source}")]
    Filter {
        receiver: usize,
        k: usize,
        #[source]
        source: FilterError,
    },
    #[error(transparent)]
    Set(#[from] SetError),
}

impl NetError {
    pub(crate) fn invalid(field: impl Into<String>, reason: String) -> Self {
        NetError::InvalidScenario {
            field: field.into(),
            reason,
        }
    }

    pub(crate) fn filter(receiver: usize, k: usize, source: FilterError) -> Self {
        NetError::Filter { receiver, k, source }
    }
}
