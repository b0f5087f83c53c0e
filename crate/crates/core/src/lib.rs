//! Set-valued distributed Kalman filtering for timing receivers.
//!
//! A network of GNSS timing receivers jointly estimates a common clock
//! state `[T, Ṫ]` (bias in seconds, drift in seconds per second). Each
//! receiver carries a point estimate together with a probabilistic
//! zonotope of its estimation error, scores the innovation of its own
//! measurements against that set, and down-weights suspicious
//! measurements when fusing over its neighborhood.
//!
//! Modules:
//! - [`setcore`]: zonotopes, p-Zonotopes, planar polygons, box-QP distance.
//! - [`estimator`]: point-valued single and distributed Kalman filters.
//! - [`srdkf`]: the set-valued distributed filter and spoofing mitigation.
//! - [`risk`]: probability that the timing error leaves the alarm limit.
//! - [`netsim`]: network simulation, attacks and Monte-Carlo driver.

pub mod estimator;
pub mod exec;
pub mod netsim;
pub mod risk;
pub mod setcore;
pub mod srdkf;

/// Alarm limit on the absolute timing error, in seconds.
pub const ALARM_LIMIT_S: f64 = 26.5e-6;
