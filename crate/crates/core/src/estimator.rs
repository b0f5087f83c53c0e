//! Point-valued Kalman filtering: the adaptive distributed filter over a
//! neighborhood and the single-receiver adaptive filter.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Jitter added to a covariance whose Cholesky factorization fails.
const COVARIANCE_JITTER: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("measurement covariance of receiver {receiver} is singular")]
    SingularMeasurementCovariance { receiver: usize },
    #[error("state covariance is not positive definite")]
    SingularStateCovariance,
    #[error("measurement of receiver {receiver}: {what} has {found} entries, expected {expected}")]
    Dimension {
        receiver: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no measurements to fuse")]
    NoMeasurements,
    #[error(transparent)]
    Set(#[from] crate::setcore::SetError),
}

/// Mean `(T, Ṫ)` in seconds and seconds per second, with its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDescriptor {
    pub r: DMatrix<f64>,
    pub q: Matrix2<f64>,
    pub psi: f64,
}

/// How the neighborhood's measurements are folded into one correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateForm {
    /// Information-form fusion of all measurements against one prediction.
    #[default]
    Batch,
    /// Textbook Kalman updates applied one measurement after another.
    Sequential,
}

/// One receiver's measurement as seen by a fusing node.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub receiver: usize,
    pub z: &'a DVector<f64>,
    pub h: &'a DMatrix<f64>,
    pub r: &'a DMatrix<f64>,
}

/// `F` for the clock model over one sampling interval.
pub fn clock_transition(dt_s: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, dt_s, 0.0, 1.0)
}

/// `x̂ = F x̄`, `P̂ = F P̄ Fᵀ + Q`.
pub fn pv_time_update(s: &PointState, f: &Matrix2<f64>, q: &Matrix2<f64>) -> PointState {
    PointState {
        mean: f * s.mean,
        covariance: symmetrize2(&(f * s.covariance * f.transpose() + q)),
    }
}

/// Exponentially forgotten measurement-noise covariance:
/// `R = ψ R_prev + (1 − ψ)(ε εᵀ + H P̂ Hᵀ)`, symmetrized.
pub fn adaptive_r(
    prev_r: &DMatrix<f64>,
    psi: f64,
    innovation: &DVector<f64>,
    h: &DMatrix<f64>,
    p_hat: &Matrix2<f64>,
) -> DMatrix<f64> {
    let p = DMatrix::from_column_slice(2, 2, p_hat.as_slice());
    let fresh = innovation * innovation.transpose() + h * p * h.transpose();
    let r = prev_r * psi + fresh * (1.0 - psi);
    (&r + r.transpose()) * 0.5
}

/// Per-observation pieces of the information fusion.
#[derive(Debug, Clone)]
pub(crate) struct Fused {
    /// `P̄` after fusing every observation.
    pub p_bar: Matrix2<f64>,
    /// `Hⱼᵀ Rⱼ⁻¹` for each observation, in input order.
    pub ht_rinv: Vec<DMatrix<f64>>,
}

/// `P̄⁻¹ = P̂⁻¹ + Σ Hⱼᵀ Rⱼ⁻¹ Hⱼ`.
pub(crate) fn fuse_information(p_hat: &Matrix2<f64>, obs: &[Observation<'_>]) -> Result<Fused, FilterError> {
    let mut info = robust_inverse2(p_hat)?;
    let mut ht_rinv = Vec::with_capacity(obs.len());
    for o in obs {
        check_observation(o)?;
        let chol = pd_cholesky(o.r).ok_or(FilterError::SingularMeasurementCovariance { receiver: o.receiver })?;
        let rinv_h = chol.solve(o.h);
        let gain_part = rinv_h.transpose();
        let contrib = &gain_part * o.h;
        info += Matrix2::new(contrib[(0, 0)], contrib[(0, 1)], contrib[(1, 0)], contrib[(1, 1)]);
        ht_rinv.push(gain_part);
    }
    let p_bar = symmetrize2(&robust_inverse2(&info)?);
    Ok(Fused { p_bar, ht_rinv })
}

fn check_observation(o: &Observation<'_>) -> Result<(), FilterError> {
    let m = o.z.len();
    let dims = [
        ("H rows", o.h.nrows(), m),
        ("H columns", o.h.ncols(), 2),
        ("R rows", o.r.nrows(), m),
        ("R columns", o.r.ncols(), m),
    ];
    for (what, found, expected) in dims {
        if found != expected {
            return Err(FilterError::Dimension {
                receiver: o.receiver,
                what,
                expected,
                found,
            });
        }
    }
    Ok(())
}

/// Gain `P̄ Hᵀ R⁻¹` as a `2 × m` matrix.
pub(crate) fn gain(p_bar: &Matrix2<f64>, ht_rinv: &DMatrix<f64>) -> DMatrix<f64> {
    to_dyn(p_bar) * ht_rinv
}

pub(crate) fn innovation(z: &DVector<f64>, h: &DMatrix<f64>, x: &Vector2<f64>) -> DVector<f64> {
    z - h * DVector::from_column_slice(x.as_slice())
}

/// Fuses the neighborhood's measurements into the predicted state.
pub fn pv_measurement_update(
    pred: &PointState,
    obs: &[Observation<'_>],
    form: UpdateForm,
) -> Result<PointState, FilterError> {
    if obs.is_empty() {
        return Err(FilterError::NoMeasurements);
    }
    match form {
        UpdateForm::Batch => {
            let fused = fuse_information(&pred.covariance, obs)?;
            let mut correction = Vector2::zeros();
            for (o, htr) in obs.iter().zip(&fused.ht_rinv) {
                let k = gain(&fused.p_bar, htr);
                let dx = k * innovation(o.z, o.h, &pred.mean);
                correction += Vector2::new(dx[0], dx[1]);
            }
            Ok(PointState {
                mean: pred.mean + correction,
                covariance: fused.p_bar,
            })
        }
        UpdateForm::Sequential => {
            let mut state = *pred;
            for o in obs {
                state = sequential_update(&state, o)?;
            }
            Ok(state)
        }
    }
}

/// Covariance-form update with one measurement, Joseph-stabilized.
fn sequential_update(s: &PointState, o: &Observation<'_>) -> Result<PointState, FilterError> {
    check_observation(o)?;
    if pd_cholesky(o.r).is_none() {
        return Err(FilterError::SingularMeasurementCovariance { receiver: o.receiver });
    }
    let p = to_dyn(&s.covariance);
    let innov_cov = o.h * &p * o.h.transpose() + o.r;
    let chol = pd_cholesky(&innov_cov).ok_or(FilterError::SingularMeasurementCovariance { receiver: o.receiver })?;
    // K = P Hᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ H P
    let k = chol.solve(&(o.h * &p)).transpose();
    let dx = &k * innovation(o.z, o.h, &s.mean);
    let ikh = DMatrix::identity(2, 2) - &k * o.h;
    let joseph = &ikh * &p * ikh.transpose() + &k * o.r * k.transpose();
    Ok(PointState {
        mean: s.mean + Vector2::new(dx[0], dx[1]),
        covariance: symmetrize2(&to_fixed(&joseph)),
    })
}

/// One step of the single-receiver adaptive filter: predict, adapt `R` from
/// the local innovation, correct with the receiver's own measurement.
/// Returns the corrected state and the adapted `R`.
pub fn single_adaptive_kf_step(
    corrected: &PointState,
    f: &Matrix2<f64>,
    noise: &NoiseDescriptor,
    receiver: usize,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    form: UpdateForm,
) -> Result<(PointState, DMatrix<f64>), FilterError> {
    let pred = pv_time_update(corrected, f, &noise.q);
    let eps = innovation(z, h, &pred.mean);
    let r = adaptive_r(&noise.r, noise.psi, &eps, h, &pred.covariance);
    let obs = [Observation { receiver, z, h, r: &r }];
    let out = pv_measurement_update(&pred, &obs, form)?;
    Ok((out, r))
}

/// Cholesky factorization that also rejects zero or non-finite pivots,
/// which nalgebra lets through.
pub(crate) fn pd_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m.clone())?;
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|d| *d > 0.0 && d.is_finite())
        .then_some(chol)
}

pub(crate) fn to_dyn(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

pub(crate) fn to_fixed(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn symmetrize2(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric PD 2×2 matrix, retrying once with jitter.
fn robust_inverse2(m: &Matrix2<f64>) -> Result<Matrix2<f64>, FilterError> {
    if let Some(c) = m.cholesky() {
        return Ok(c.inverse());
    }
    let jittered = m + Matrix2::identity() * COVARIANCE_JITTER;
    jittered
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(FilterError::SingularStateCovariance)
}
