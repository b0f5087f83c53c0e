//! Set-valued distributed Kalman filter.
//!
//! Alongside the point estimate each receiver propagates two p-Zonotopes of
//! the estimation error: `err_pred` after the time update and `err_corr`
//! after the measurement update. The error sets are centered at zero; the
//! state sets are the error sets translated by the point mean.
//!
//! Spoofing mitigation works on measurements, not states. Each receiver
//! scores its own innovation against the innovation p-Zonotope it expects
//! under authentic noise, broadcasts the score with its measurement, and
//! every consumer scales that measurement's gain by `1 − α̃`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::estimator::{
    fuse_information, gain, innovation, pd_cholesky, pv_time_update, to_dyn, FilterError, Observation, PointState,
};
use crate::setcore::{PZonotope, SetError};

#[derive(Debug, Clone, PartialEq)]
pub struct SetState {
    pub point: PointState,
    /// Predicted estimation-error set.
    pub err_pred: PZonotope,
    /// Corrected estimation-error set.
    pub err_corr: PZonotope,
}

impl SetState {
    /// State set after the last time update: the error set moved to the mean.
    pub fn predicted_state_set(&self) -> PZonotope {
        let mean = DVector::from_column_slice(self.point.mean.as_slice());
        self.err_pred.translate(&mean).expect("error sets are two-dimensional")
    }

    pub fn corrected_state_set(&self) -> PZonotope {
        let mean = DVector::from_column_slice(self.point.mean.as_slice());
        self.err_corr.translate(&mean).expect("error sets are two-dimensional")
    }
}

/// What a receiver broadcasts to its neighborhood each round.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBundle {
    pub receiver_id: usize,
    /// Interleaved residuals `[ρ̃¹, φ̃¹, …]`: seconds, then seconds/second.
    pub z: DVector<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Sender's own spoofing score in `[0, 1]`.
    pub attack_status: f64,
    /// Authentic measurement-noise bound of the sender.
    pub noise_pz: PZonotope,
}

impl MeasurementBundle {
    pub fn observation(&self) -> Observation<'_> {
        Observation {
            receiver: self.receiver_id,
            z: &self.z,
            h: &self.h,
            r: &self.r,
        }
    }
}

/// `err_pred = F·err_corr ⊕ L_ν`, point state by the ordinary prediction.
pub fn sr_time_update(
    s: &SetState,
    f: &Matrix2<f64>,
    q: &Matrix2<f64>,
    process_noise: &PZonotope,
) -> Result<SetState, FilterError> {
    let mapped = s.err_corr.linear_map(&to_dyn(f))?;
    Ok(SetState {
        point: pv_time_update(&s.point, f, q),
        err_pred: mapped.minkowski_sum(process_noise)?,
        err_corr: s.err_corr.clone(),
    })
}

/// Set of innovations expected under authentic noise: `L_ω ⊕ H·err_pred`.
pub fn innovation_pzonotope(
    err_pred: &PZonotope,
    h: &DMatrix<f64>,
    measurement_noise: &PZonotope,
) -> Result<PZonotope, SetError> {
    measurement_noise.minkowski_sum(&err_pred.linear_map(h)?)
}

/// `α̃ = 1 − sup L_ε(ε) / sup L_ε(c)`, which reduces to `1 − exp(−d²/2)`
/// with `d` the Mahalanobis distance from `ε` to the center zonotope.
pub fn attack_status(innovation_set: &PZonotope, innovation: &DVector<f64>) -> Result<f64, SetError> {
    let d = innovation_set.distance_to_center_zonotope(innovation)?.distance;
    Ok((1.0 - (-0.5 * d * d).exp()).clamp(0.0, 1.0))
}

/// `K̃ = (1 − α̃) P̄ Hᵀ R⁻¹`.
pub fn adaptive_gain(
    attack_status: f64,
    h: &DMatrix<f64>,
    p_bar: &Matrix2<f64>,
    r: &DMatrix<f64>,
    receiver: usize,
) -> Result<DMatrix<f64>, FilterError> {
    let chol = pd_cholesky(r).ok_or(FilterError::SingularMeasurementCovariance { receiver })?;
    let ht_rinv = chol.solve(h).transpose();
    Ok(gain(p_bar, &ht_rinv) * (1.0 - attack_status))
}

/// Fuses the neighborhood's bundles into the predicted set state.
///
/// `P̄` comes from information fusion of every bundle regardless of its
/// attack status; the gains are then scaled by `1 − α̃` and used for both
/// the mean and the corrected error set
/// `(I − Σ K̃ H)·err_pred ⊕ (⊕ K̃ L_ω)`.
pub fn sr_measurement_update(s: &SetState, bundles: &[&MeasurementBundle]) -> Result<SetState, FilterError> {
    if bundles.is_empty() {
        return Err(FilterError::NoMeasurements);
    }
    let obs: Vec<Observation<'_>> = bundles.iter().map(|b| b.observation()).collect();
    let fused = fuse_information(&s.point.covariance, &obs)?;

    let mut correction = Vector2::zeros();
    let mut kh_sum = DMatrix::<f64>::zeros(2, 2);
    let mut noise_terms = Vec::with_capacity(bundles.len());
    for (b, htr) in bundles.iter().zip(&fused.ht_rinv) {
        let k = gain(&fused.p_bar, htr) * (1.0 - b.attack_status.clamp(0.0, 1.0));
        let dx = &k * innovation(&b.z, &b.h, &s.point.mean);
        correction += Vector2::new(dx[0], dx[1]);
        kh_sum += &k * &b.h;
        noise_terms.push(b.noise_pz.linear_map(&k)?);
    }
    let contraction = DMatrix::identity(2, 2) - kh_sum;
    let mut parts = vec![s.err_pred.linear_map(&contraction)?];
    parts.extend(noise_terms);
    let err_corr = PZonotope::minkowski_sum_all(parts.iter())?.without_zero_generators();

    Ok(SetState {
        point: PointState {
            mean: s.point.mean + correction,
            covariance: fused.p_bar,
        },
        err_pred: s.err_pred.clone(),
        err_corr,
    })
}
