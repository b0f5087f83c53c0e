use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::scenario::{AttackSpec, Interval, MeasurementModel};

/// Moments of one bounded Gaussian source: mean uniform in its interval,
/// variance uniform in `[0, cov_hi]`.
pub fn draw_moments<R: Rng + ?Sized>(bounds: &Interval, rng: &mut R) -> (f64, f64) {
    let mean = if bounds.mean_hi > bounds.mean_lo {
        rng.random_range(bounds.mean_lo..=bounds.mean_hi)
    } else {
        bounds.mean_lo
    };
    let var = if bounds.cov_hi > 0.0 {
        rng.random_range(0.0..=bounds.cov_hi)
    } else {
        0.0
    };
    (mean, var)
}

/// One draw of fresh moments followed by one Gaussian sample.
pub fn sample_bounded_gaussian<R: Rng + ?Sized>(bounds: &Interval, rng: &mut R) -> f64 {
    let (mean, var) = draw_moments(bounds, rng);
    gaussian(mean, var, rng)
}

fn gaussian<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    if var == 0.0 {
        return mean;
    }
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// A bank of independent noise sources whose moments are held for a fixed
/// number of iterations and then re-drawn.
#[derive(Debug, Clone)]
pub struct TimeVaryingNoise {
    bounds: Vec<Interval>,
    moments: Vec<(f64, f64)>,
    hold: usize,
    age: usize,
}

impl TimeVaryingNoise {
    pub fn new(bounds: Vec<Interval>, hold_iterations: usize) -> Self {
        let n = bounds.len();
        Self {
            bounds,
            moments: vec![(0.0, 0.0); n],
            hold: hold_iterations.max(1),
            age: 0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DVector<f64> {
        if self.age.is_multiple_of(self.hold) {
            for (m, b) in self.moments.iter_mut().zip(&self.bounds) {
                *m = draw_moments(b, rng);
            }
        }
        self.age += 1;
        let moments = self.moments.clone();
        DVector::from_iterator(
            moments.len(),
            moments.into_iter().map(|(mean, var)| gaussian(mean, var, rng)),
        )
    }
}

/// `x_k = F x_{k−1} + ν`.
pub fn step_truth(x: &Vector2<f64>, f: &Matrix2<f64>, nu: &Vector2<f64>) -> Vector2<f64> {
    f * x + nu
}

/// Measurement matrix for `n_satellites` interleaved pseudorange/Doppler pairs.
pub fn measurement_matrix(model: MeasurementModel, n_satellites: usize) -> DMatrix<f64> {
    match model {
        MeasurementModel::Ones => DMatrix::from_element(2 * n_satellites, 2, 1.0),
        MeasurementModel::BlockDiagonal => {
            DMatrix::from_fn(2 * n_satellites, 2, |r, c| if r % 2 == c { 1.0 } else { 0.0 })
        }
    }
}

/// Attack bias on an interleaved residual vector of one receiver.
pub fn attack_bias(attacks: &[AttackSpec], receiver: usize, t_s: f64, n_satellites: usize) -> DVector<f64> {
    let (mut rho, mut phi) = (0.0, 0.0);
    for a in attacks.iter().filter(|a| a.victim == receiver) {
        let (dr, dp) = a.bias(t_s);
        rho += dr;
        phi += dp;
    }
    DVector::from_fn(2 * n_satellites, |r, _| if r % 2 == 0 { rho } else { phi })
}

/// `z = H x + ω + attack bias`.
pub fn generate_measurement(
    truth: &Vector2<f64>,
    h: &DMatrix<f64>,
    omega: &DVector<f64>,
    bias: &DVector<f64>,
) -> DVector<f64> {
    h * DVector::from_column_slice(truth.as_slice()) + omega + bias
}
