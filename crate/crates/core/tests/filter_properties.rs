mod common;

use common::{random_matrix, random_spd, random_vector, rel_err};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srdkf_core::estimator::{
    clock_transition, pv_measurement_update, pv_time_update, single_adaptive_kf_step, NoiseDescriptor, Observation,
    PointState, UpdateForm,
};
use srdkf_core::setcore::PZonotope;
use srdkf_core::srdkf::{attack_status, sr_measurement_update, sr_time_update, MeasurementBundle, SetState};

fn fixed(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn dynm(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

fn is_symmetric_pd(p: &Matrix2<f64>) -> bool {
    p[(0, 1)] == p[(1, 0)] && p.cholesky().is_some() && p.iter().all(|x| x.is_finite())
}

struct Meas {
    z: DVector<f64>,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn random_meas<R: Rng>(rng: &mut R, m: usize) -> Meas {
    Meas {
        z: random_vector(rng, m, 2.0),
        h: random_matrix(rng, m, 2, 1.0),
        r: random_spd(rng, m, 0.5, 0.05),
    }
}

fn observations(ms: &[Meas]) -> Vec<Observation<'_>> {
    ms.iter()
        .enumerate()
        .map(|(i, m)| Observation {
            receiver: i,
            z: &m.z,
            h: &m.h,
            r: &m.r,
        })
        .collect()
}

#[test]
fn covariances_stay_positive_definite_for_ten_thousand_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Clock-scale units: seconds and seconds per second.
    let mut state = PointState {
        mean: Vector2::new(1e-6, 1e-9),
        covariance: Matrix2::new(6e-12, 0.0, 0.0, 9e-18),
    };
    let h = DMatrix::from_element(16, 2, 1.0);
    for step in 0..10_000 {
        let f = clock_transition(rng.random_range(0.1..5.0));
        let q = Matrix2::new(rng.random_range(1e-13..1e-11), 0.0, 0.0, rng.random_range(1e-19..1e-17));
        let pred = pv_time_update(&state, &f, &q);
        assert!(is_symmetric_pd(&pred.covariance), "prediction {step}");
        let n_obs = rng.random_range(1..=4);
        let ms: Vec<Meas> = (0..n_obs)
            .map(|_| {
                let diag: Vec<f64> = (0..16)
                    .map(|r| {
                        if r % 2 == 0 {
                            rng.random_range(1e-12..1e-10)
                        } else {
                            rng.random_range(1e-18..1e-16)
                        }
                    })
                    .collect();
                Meas {
                    z: DVector::from_fn(
                        16,
                        |r, _| if r % 2 == 0 { 1e-6 } else { 1e-9 } * common::gaussian(&mut rng),
                    ),
                    h: h.clone(),
                    r: DMatrix::from_diagonal(&DVector::from_vec(diag)),
                }
            })
            .collect();
        let form = if step % 2 == 0 {
            UpdateForm::Batch
        } else {
            UpdateForm::Sequential
        };
        state = pv_measurement_update(&pred, &observations(&ms), form).unwrap();
        assert!(
            is_symmetric_pd(&state.covariance),
            "update {step}: {:?}",
            state.covariance
        );
    }
}

#[test]
fn adaptive_filter_with_unit_forgetting_is_the_plain_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = random_matrix(&mut rng, 4, 2, 1.0);
    let noise = NoiseDescriptor {
        r: random_spd(&mut rng, 4, 0.5, 0.1),
        q: fixed(&random_spd(&mut rng, 2, 0.1, 0.01)),
        psi: 1.0,
    };
    let f = clock_transition(1.0);
    let mut adaptive = PointState {
        mean: Vector2::zeros(),
        covariance: Matrix2::identity(),
    };
    let mut plain = adaptive;
    for _ in 0..200 {
        let z = random_vector(&mut rng, 4, 1.0);
        let (next, r) = single_adaptive_kf_step(&adaptive, &f, &noise, 0, &z, &h, UpdateForm::Batch).unwrap();
        assert_eq!(r, noise.r);
        adaptive = next;
        let pred = pv_time_update(&plain, &f, &noise.q);
        let obs = [Observation {
            receiver: 0,
            z: &z,
            h: &h,
            r: &noise.r,
        }];
        plain = pv_measurement_update(&pred, &obs, UpdateForm::Batch).unwrap();
        assert_eq!(adaptive, plain);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn information_form_equals_sequential_updates(seed in any::<u64>(), n_obs in 1usize..5, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = PointState {
            mean: Vector2::new(common::gaussian(&mut rng), common::gaussian(&mut rng)),
            covariance: fixed(&random_spd(&mut rng, 2, 1.0, 0.05)),
        };
        let ms: Vec<Meas> = (0..n_obs).map(|_| random_meas(&mut rng, m)).collect();
        let obs = observations(&ms);
        let batch = pv_measurement_update(&pred, &obs, UpdateForm::Batch).unwrap();
        let seq = pv_measurement_update(&pred, &obs, UpdateForm::Sequential).unwrap();
        let col = |v: &Vector2<f64>| DMatrix::from_column_slice(2, 1, v.as_slice());
        prop_assert!(rel_err(&col(&batch.mean), &col(&seq.mean)) < 1e-8);
        prop_assert!(rel_err(&dynm(&batch.covariance), &dynm(&seq.covariance)) < 1e-8);
    }

    #[test]
    fn attack_status_ignores_reparameterization(seed in any::<u64>(), e in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = PZonotope::new(
            random_vector(&mut rng, 2, 1.0),
            random_matrix(&mut rng, 2, e, 1.0),
            random_spd(&mut rng, 2, 1.0, 0.05),
        ).unwrap();
        let eps = random_vector(&mut rng, 2, 3.0);
        let t = random_matrix(&mut rng, 2, 2, 1.0);
        prop_assume!(t.determinant().abs() > 0.05);
        let before = attack_status(&set, &eps).unwrap();
        let after = attack_status(&set.linear_map(&t).unwrap(), &(&t * &eps)).unwrap();
        prop_assert!((before - after).abs() < 1e-8, "{before} vs {after}");
        prop_assert!((0.0..=1.0).contains(&before));
    }
}

/// A predicted set state and bundles whose p-Zonotope covariances agree
/// with the point covariances, so the fused gain is the optimal one.
struct Consistent {
    state: SetState,
    bundles: Vec<MeasurementBundle>,
}

fn consistent<R: Rng>(rng: &mut R, n_bundles: usize, generators: bool) -> Consistent {
    let p = random_spd(rng, 2, 1.0, 0.05);
    let e = if generators { 2 } else { 0 };
    let err = PZonotope::new(DVector::zeros(2), random_matrix(rng, 2, e, 0.5), p.clone()).unwrap();
    let state = SetState {
        point: PointState {
            mean: Vector2::new(common::gaussian(rng), common::gaussian(rng)),
            covariance: fixed(&p),
        },
        err_pred: err.clone(),
        err_corr: err,
    };
    let bundles = (0..n_bundles)
        .map(|j| {
            let m = 2 * rng.random_range(1..=3);
            let r = random_spd(rng, m, 0.5, 0.05);
            let ge = if generators { m } else { 0 };
            MeasurementBundle {
                receiver_id: j,
                z: random_vector(rng, m, 1.0),
                h: random_matrix(rng, m, 2, 1.0),
                noise_pz: PZonotope::new(DVector::zeros(m), random_matrix(rng, m, ge, 0.3), r.clone()).unwrap(),
                r,
                attack_status: 0.0,
            }
        })
        .collect();
    Consistent { state, bundles }
}

fn corrected_trace(c: &Consistent) -> f64 {
    let refs: Vec<&MeasurementBundle> = c.bundles.iter().collect();
    sr_measurement_update(&c.state, &refs)
        .unwrap()
        .err_corr
        .covariance()
        .trace()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn trusting_one_measurement_more_never_loosens_the_set(seed in any::<u64>(), n in 1usize..4) {
        // The other bundles are fully trusted, so the all-trusted gains are
        // the minimizer this path walks toward.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = consistent(&mut rng, n, true);
        let j = rng.random_range(0..n);
        let mut prev = f64::INFINITY;
        for step in 0..=10 {
            c.bundles[j].attack_status = 1.0 - step as f64 / 10.0;
            let t = corrected_trace(&c);
            prop_assert!(t <= prev * (1.0 + 1e-10), "alpha {}: {t} > {prev}", c.bundles[j].attack_status);
            prev = t;
        }
    }

    #[test]
    fn trusting_all_measurements_more_never_loosens_the_set(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = consistent(&mut rng, n, true);
        let start: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut prev = f64::INFINITY;
        for step in 0..=10 {
            let scale = 1.0 - step as f64 / 10.0;
            for (b, a) in c.bundles.iter_mut().zip(&start) {
                b.attack_status = a * scale;
            }
            let t = corrected_trace(&c);
            prop_assert!(t <= prev * (1.0 + 1e-10), "scale {scale}: {t} > {prev}");
            prev = t;
        }
    }

    #[test]
    fn gaussian_sets_follow_the_point_covariance(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = consistent(&mut rng, n, false);
        let refs: Vec<&MeasurementBundle> = c.bundles.iter().collect();
        let out = sr_measurement_update(&c.state, &refs).unwrap();
        prop_assert!(rel_err(out.err_corr.covariance(), &dynm(&out.point.covariance)) < 1e-9);
        prop_assert_eq!(out.err_corr.n_generators(), 0);
    }

    #[test]
    fn single_receiver_update_matches_direct_evaluation(seed in any::<u64>(), alpha in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = consistent(&mut rng, 1, true);
        c.bundles[0].attack_status = alpha;
        let b = &c.bundles[0];
        let out = sr_measurement_update(&c.state, &[b]).unwrap();

        // Optimal gain by the covariance form, then scaled.
        let p = c.state.err_pred.covariance();
        let s = &b.h * p * b.h.transpose() + &b.r;
        let k = p * b.h.transpose() * s.try_inverse().unwrap() * (1.0 - alpha);
        let contraction = DMatrix::identity(2, 2) - &k * &b.h;
        let cov = &contraction * p * contraction.transpose() + &k * b.noise_pz.covariance() * k.transpose();
        let mut gens = (&contraction * c.state.err_pred.generators()).columns(0, 2).into_owned();
        gens = gens.insert_columns(2, b.h.nrows(), 0.0);
        let kg = &k * b.noise_pz.generators();
        gens.columns_mut(2, b.h.nrows()).copy_from(&kg);
        let keep: Vec<usize> = (0..gens.ncols()).filter(|&i| gens.column(i).iter().any(|&x| x != 0.0)).collect();
        let gens = gens.select_columns(&keep);

        prop_assert!(rel_err(out.err_corr.covariance(), &cov) < 1e-8);
        prop_assert!(rel_err(out.err_corr.generators(), &gens) < 1e-8);
        let innovation = &b.z - &b.h * DVector::from_column_slice(c.state.point.mean.as_slice());
        let mean = DVector::from_column_slice(c.state.point.mean.as_slice()) + &k * innovation;
        let got = DVector::from_column_slice(out.point.mean.as_slice());
        prop_assert!((got - &mean).norm() <= 1e-8 * (1.0 + mean.norm()));
    }
}

#[test]
fn error_sets_stay_centered_at_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let process = PZonotope::from_bounds(&[-2.5e-6, -3.5e-9], &[2.5e-6, 3.5e-9], &[4e-12, 6e-18], 12.0).unwrap();
    let noise = PZonotope::from_bounds(&[-1e-6, -2.5e-9], &[1e-6, 2.5e-9], &[3e-12, 6e-18], 12.0).unwrap();
    let init = PZonotope::from_bounds(&[-2e-6, -3e-9], &[2e-6, 3e-9], &[6e-12, 9e-18], 12.0).unwrap();
    let mut s = SetState {
        point: PointState {
            mean: Vector2::new(1e-6, 1e-9),
            covariance: Matrix2::new(1.8e-11, 0.0, 0.0, 2.7e-17),
        },
        err_pred: init.clone(),
        err_corr: init,
    };
    let f = clock_transition(1.0);
    let q = Matrix2::new(4e-12, 0.0, 0.0, 6e-18);
    for _ in 0..50 {
        s = sr_time_update(&s, &f, &q, &process).unwrap();
        let b = MeasurementBundle {
            receiver_id: 0,
            z: DVector::from_vec(vec![
                1e-6 * common::gaussian(&mut rng),
                1e-9 * common::gaussian(&mut rng),
            ]),
            h: DMatrix::from_element(2, 2, 1.0),
            r: DMatrix::from_diagonal(&DVector::from_vec(vec![4e-12, 1.2e-17])),
            attack_status: rng.random_range(0.0..1.0),
            noise_pz: noise.clone(),
        };
        s = sr_measurement_update(&s, &[&b]).unwrap();
        assert_eq!(s.err_corr.center(), &DVector::zeros(2));
        assert_eq!(s.err_pred.center(), &DVector::zeros(2));
    }
}
