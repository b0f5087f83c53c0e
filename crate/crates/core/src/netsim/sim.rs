use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::noise::{attack_bias, generate_measurement, measurement_matrix, step_truth, TimeVaryingNoise};
use super::scenario::{EstimatorKind, Interval, Scenario};
use super::NetError;
use crate::estimator::{
    adaptive_r, clock_transition, pv_measurement_update, pv_time_update, FilterError, Observation, PointState,
};
use crate::exec::{map_indexed, ExecutionMode};
use crate::risk::{timing_risk_with, UnsafeSet};
use crate::setcore::PZonotope;
use crate::srdkf::{
    attack_status, innovation_pzonotope, sr_measurement_update, sr_time_update, MeasurementBundle, SetState,
};

/// Random stream of the common clock truth; receiver `i` uses `i + 1`.
const TRUTH_STREAM: u64 = 0;

/// Initial point covariance as a multiple of the initial covariance bounds.
const INITIAL_COVARIANCE_SCALE: f64 = 3.0;

/// Per-estimator output for one receiver and one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub kind: EstimatorKind,
    /// `(T, Ṫ)` estimate after the measurement update.
    pub estimate: [f64; 2],
    /// Estimate minus truth.
    pub error: [f64; 2],
    /// Attack status the receiver broadcast; set-valued filter only.
    pub alpha: Option<f64>,
    /// Timing-risk bound; set-valued filter only.
    pub risk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub k: usize,
    pub t_s: f64,
    pub truth: [f64; 2],
    /// `receivers[i]` holds one record per enabled estimator, in scenario order.
    pub receivers: Vec<Vec<EstimateRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimLog {
    pub n_receivers: usize,
    pub dt_s: f64,
    pub estimators: Vec<EstimatorKind>,
    pub rounds: Vec<RoundRecord>,
}

/// Set-valued node with its attack status and risk, then the two point-valued nodes.
type Updated = (Option<(SrNode, f64, f64)>, Option<PointNode>, Option<PointNode>);

#[derive(Debug, Clone)]
struct SrNode {
    state: SetState,
    r: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct PointNode {
    state: PointState,
    r: DMatrix<f64>,
}

/// Shared, read-only model pieces derived from the scenario.
#[derive(Debug, Clone)]
struct Model {
    f: Matrix2<f64>,
    q: Matrix2<f64>,
    h: DMatrix<f64>,
    r0: DMatrix<f64>,
    r_floor: DMatrix<f64>,
    process_pz: PZonotope,
    measurement_pz: PZonotope,
    unsafe_set: UnsafeSet,
}

impl Model {
    fn new(s: &Scenario) -> Result<Self, NetError> {
        let b = &s.bounds;
        let n_meas = 2 * s.n_satellites;
        let meas_bounds: Vec<Interval> = (0..n_meas)
            .map(|r| if r % 2 == 0 { b.pseudorange } else { b.doppler })
            .collect();
        let r0 = DMatrix::from_diagonal(&DVector::from_iterator(
            n_meas,
            meas_bounds.iter().map(Interval::second_moment_bound),
        ));
        Ok(Self {
            f: clock_transition(s.dt_s),
            q: Matrix2::new(
                b.process_t.second_moment_bound(),
                0.0,
                0.0,
                b.process_tdot.second_moment_bound(),
            ),
            h: measurement_matrix(s.measurement_model, s.n_satellites),
            r_floor: &r0 * s.r_floor,
            r0,
            process_pz: pz_from_intervals(&[b.process_t, b.process_tdot], s.inflation)?,
            measurement_pz: pz_from_intervals(&meas_bounds, s.inflation)?,
            unsafe_set: UnsafeSet::new(s.alert_limit_s)?,
        })
    }

    fn adapt_r(&self, prev: &DMatrix<f64>, psi: f64, eps: &DVector<f64>, p_hat: &Matrix2<f64>) -> DMatrix<f64> {
        adaptive_r(prev, psi, eps, &self.h, p_hat) + &self.r_floor
    }
}

fn pz_from_intervals(bounds: &[Interval], inflation: f64) -> Result<PZonotope, NetError> {
    let lo: Vec<f64> = bounds.iter().map(|b| b.mean_lo).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b.mean_hi).collect();
    let cov: Vec<f64> = bounds.iter().map(|b| b.cov_hi).collect();
    Ok(PZonotope::from_bounds(&lo, &hi, &cov, inflation)?)
}

/// What every receiver produced in phase one of a round.
#[derive(Debug, Clone)]
struct Broadcast {
    sr: Option<(SetState, MeasurementBundle)>,
    pv: Option<(PointState, MeasurementBundle)>,
    akf: Option<(PointState, MeasurementBundle)>,
}

/// Simulation state between rounds.
pub struct World<'a> {
    scenario: &'a Scenario,
    model: Model,
    mode: ExecutionMode,
    k: usize,
    truth: Vector2<f64>,
    truth_rng: ChaCha8Rng,
    process_noise: TimeVaryingNoise,
    rx_rng: Vec<ChaCha8Rng>,
    rx_noise: Vec<TimeVaryingNoise>,
    sr: Option<Vec<SrNode>>,
    pv: Option<Vec<PointNode>>,
    akf: Option<Vec<PointNode>>,
    /// Previous round's bundles, used when broadcasts are delayed.
    last_sr: Option<Vec<MeasurementBundle>>,
    last_pv: Option<Vec<MeasurementBundle>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> World<'a> {
    /// Validates the scenario and initializes every receiver from an
    /// authentic start: the truth begins at zero and each receiver's first
    /// estimate is the truth plus an initial error drawn from its bounds.
    pub fn new(scenario: &'a Scenario, mode: ExecutionMode) -> Result<Self, NetError> {
        scenario.validate()?;
        let model = Model::new(scenario)?;
        let n = scenario.n_receivers();
        let b = &scenario.bounds;
        let hold = (scenario.noise_hold_s / scenario.dt_s).round().max(1.0) as usize;
        let n_meas = 2 * scenario.n_satellites;
        let meas_bounds: Vec<Interval> = (0..n_meas)
            .map(|r| if r % 2 == 0 { b.pseudorange } else { b.doppler })
            .collect();

        let truth = Vector2::zeros();
        let mut rx_rng: Vec<ChaCha8Rng> = (0..n)
            .map(|i| stream(scenario.rng_seed, TRUTH_STREAM + 1 + i as u64))
            .collect();
        let initial_err_pz = pz_from_intervals(&[b.initial_t, b.initial_tdot], scenario.inflation)?;
        let p0 = Matrix2::new(
            INITIAL_COVARIANCE_SCALE * b.initial_t.cov_hi,
            0.0,
            0.0,
            INITIAL_COVARIANCE_SCALE * b.initial_tdot.cov_hi,
        );
        let initial: Vec<PointState> = rx_rng
            .iter_mut()
            .map(|rng| {
                let e = TimeVaryingNoise::new(vec![b.initial_t, b.initial_tdot], 1).sample(rng);
                PointState {
                    mean: truth + Vector2::new(e[0], e[1]),
                    covariance: p0,
                }
            })
            .collect();
        let point_nodes = || {
            initial
                .iter()
                .map(|s| PointNode {
                    state: *s,
                    r: model.r0.clone(),
                })
                .collect::<Vec<_>>()
        };
        let sr = scenario.has(EstimatorKind::Srdkf).then(|| {
            initial
                .iter()
                .map(|s| SrNode {
                    state: SetState {
                        point: *s,
                        err_pred: initial_err_pz.clone(),
                        err_corr: initial_err_pz.clone(),
                    },
                    r: model.r0.clone(),
                })
                .collect()
        });
        let pv = scenario.has(EstimatorKind::Pvdkf).then(point_nodes);
        let akf = scenario.has(EstimatorKind::Akf).then(point_nodes);

        Ok(Self {
            scenario,
            mode,
            k: 0,
            truth,
            truth_rng: stream(scenario.rng_seed, TRUTH_STREAM),
            process_noise: TimeVaryingNoise::new(vec![b.process_t, b.process_tdot], hold),
            rx_noise: (0..n)
                .map(|_| TimeVaryingNoise::new(meas_bounds.clone(), hold))
                .collect(),
            rx_rng,
            sr,
            pv,
            akf,
            last_sr: None,
            last_pv: None,
            model,
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn truth(&self) -> Vector2<f64> {
        self.truth
    }

    /// Corrected set-valued state of receiver `i`, if that filter runs.
    pub fn set_state(&self, i: usize) -> Option<&SetState> {
        self.sr.as_ref().map(|nodes| &nodes[i].state)
    }

    /// Advances truth, measurements and every enabled filter by one step.
    ///
    /// Phase one: each receiver predicts, adapts its measurement covariance
    /// and scores its own innovation. Phase two: bundles are exchanged over
    /// the graph. Phase three: each receiver fuses its neighborhood and,
    /// for the set-valued filter, evaluates its timing risk.
    pub fn run_round(&mut self) -> Result<RoundRecord, NetError> {
        let s = self.scenario;
        let k = self.k;
        let t_s = (k + 1) as f64 * s.dt_s;
        let n = s.n_receivers();

        let nu = self.process_noise.sample(&mut self.truth_rng);
        self.truth = step_truth(&self.truth, &self.model.f, &Vector2::new(nu[0], nu[1]));
        let z: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                let omega = self.rx_noise[i].sample(&mut self.rx_rng[i]);
                let bias = attack_bias(&s.attacks, i, t_s, s.n_satellites);
                generate_measurement(&self.truth, &self.model.h, &omega, &bias)
            })
            .collect();

        let model = &self.model;
        let (sr, pv, akf) = (&self.sr, &self.pv, &self.akf);
        let phase1: Vec<Result<Broadcast, NetError>> = map_indexed(n, self.mode, |i| {
            let wrap = |e: FilterError| NetError::filter(i, k, e);
            let sr = match sr {
                Some(nodes) => {
                    Some(sr_predict(model, s.srdkf_adaptive_r.then_some(s.psi), &nodes[i], i, &z[i]).map_err(wrap)?)
                }
                None => None,
            };
            let pv = pv
                .as_ref()
                .map(|nodes| point_predict(model, s.psi, &nodes[i], i, &z[i]));
            let akf = akf
                .as_ref()
                .map(|nodes| point_predict(model, s.psi, &nodes[i], i, &z[i]));
            Ok(Broadcast { sr, pv, akf })
        });
        let phase1 = phase1.into_iter().collect::<Result<Vec<_>, _>>()?;

        let sr_bundles: Option<Vec<MeasurementBundle>> = self
            .sr
            .as_ref()
            .map(|_| phase1.iter().map(|b| b.sr.as_ref().unwrap().1.clone()).collect());
        let pv_bundles: Option<Vec<MeasurementBundle>> = self
            .pv
            .as_ref()
            .map(|_| phase1.iter().map(|b| b.pv.as_ref().unwrap().1.clone()).collect());
        let delayed = s.broadcast_delay;
        let (last_sr, last_pv) = (&self.last_sr, &self.last_pv);
        let graph = &s.graph;
        // Own bundle is always fresh; neighbors' are a round old when delayed.
        let pick = |i: usize,
                    fresh: &'_ [MeasurementBundle],
                    stale: &'_ Option<Vec<MeasurementBundle>>|
         -> Vec<MeasurementBundle> {
            graph
                .neighborhood(i)
                .into_iter()
                .filter_map(|j| {
                    if j == i || !delayed {
                        Some(fresh[j].clone())
                    } else {
                        stale.as_ref().map(|prev| prev[j].clone())
                    }
                })
                .collect()
        };

        let phase3: Vec<Result<Updated, NetError>> = map_indexed(n, self.mode, |i| {
            let wrap = |e: FilterError| NetError::filter(i, k, e);
            let b = &phase1[i];
            let sr_out = match (&b.sr, &sr_bundles) {
                (Some((pred, own)), Some(all)) => {
                    let nb = pick(i, all, last_sr);
                    let refs: Vec<&MeasurementBundle> = nb.iter().collect();
                    let mut state = sr_measurement_update(pred, &refs).map_err(wrap)?;
                    if let Some(cap) = s.max_generators {
                        state.err_corr = state.err_corr.reduce_order(cap);
                    }
                    let risk = timing_risk_with(&state.err_corr, &model.unsafe_set, s.gamma, s.levels, s.risk_form)
                        .map_err(|e| wrap(e.into()))?
                        .risk;
                    Some((
                        SrNode {
                            state,
                            r: own.r.clone(),
                        },
                        own.attack_status,
                        risk,
                    ))
                }
                _ => None,
            };
            let pv_out = match (&b.pv, &pv_bundles) {
                (Some((pred, own)), Some(all)) => {
                    let nb = pick(i, all, last_pv);
                    let obs: Vec<Observation<'_>> = nb.iter().map(|m| m.observation()).collect();
                    let state = pv_measurement_update(pred, &obs, s.update_form).map_err(wrap)?;
                    Some(PointNode {
                        state,
                        r: own.r.clone(),
                    })
                }
                _ => None,
            };
            let akf_out = match &b.akf {
                Some((pred, own)) => {
                    let state = pv_measurement_update(pred, &[own.observation()], s.update_form).map_err(wrap)?;
                    Some(PointNode {
                        state,
                        r: own.r.clone(),
                    })
                }
                None => None,
            };
            Ok((sr_out, pv_out, akf_out))
        });
        let phase3 = phase3.into_iter().collect::<Result<Vec<_>, _>>()?;

        let truth = [self.truth[0], self.truth[1]];
        let mut receivers = vec![Vec::with_capacity(s.estimators.len()); n];
        let mut sr_nodes = Vec::with_capacity(n);
        let mut pv_nodes = Vec::with_capacity(n);
        let mut akf_nodes = Vec::with_capacity(n);
        for (i, (sr_out, pv_out, akf_out)) in phase3.into_iter().enumerate() {
            for &kind in &s.estimators {
                let rec = match kind {
                    EstimatorKind::Srdkf => sr_out
                        .as_ref()
                        .map(|(node, alpha, risk)| record(kind, &node.state.point, truth, Some(*alpha), Some(*risk))),
                    EstimatorKind::Pvdkf => pv_out.as_ref().map(|node| record(kind, &node.state, truth, None, None)),
                    EstimatorKind::Akf => akf_out
                        .as_ref()
                        .map(|node| record(kind, &node.state, truth, None, None)),
                };
                if let Some(rec) = rec {
                    if !receivers[i].iter().any(|r: &EstimateRecord| r.kind == kind) {
                        receivers[i].push(rec);
                    }
                }
            }
            sr_nodes.extend(sr_out.map(|(node, _, _)| node));
            pv_nodes.extend(pv_out);
            akf_nodes.extend(akf_out);
        }
        if self.sr.is_some() {
            self.sr = Some(sr_nodes);
        }
        if self.pv.is_some() {
            self.pv = Some(pv_nodes);
        }
        if self.akf.is_some() {
            self.akf = Some(akf_nodes);
        }
        self.last_sr = sr_bundles;
        self.last_pv = pv_bundles;
        self.k += 1;
        Ok(RoundRecord {
            k,
            t_s,
            truth,
            receivers,
        })
    }
}

fn record(
    kind: EstimatorKind,
    state: &PointState,
    truth: [f64; 2],
    alpha: Option<f64>,
    risk: Option<f64>,
) -> EstimateRecord {
    let est = [state.mean[0], state.mean[1]];
    EstimateRecord {
        kind,
        estimate: est,
        error: [est[0] - truth[0], est[1] - truth[1]],
        alpha,
        risk,
    }
}

/// `psi` is `None` when the set-valued filter keeps the nominal covariance.
fn sr_predict(
    model: &Model,
    psi: Option<f64>,
    node: &SrNode,
    receiver: usize,
    z: &DVector<f64>,
) -> Result<(SetState, MeasurementBundle), FilterError> {
    let pred = sr_time_update(&node.state, &model.f, &model.q, &model.process_pz)?;
    let x = DVector::from_column_slice(pred.point.mean.as_slice());
    let eps = z - &model.h * x;
    let r = match psi {
        Some(psi) => model.adapt_r(&node.r, psi, &eps, &pred.point.covariance),
        None => model.r0.clone(),
    };
    let innovation_set = innovation_pzonotope(&pred.err_pred, &model.h, &model.measurement_pz)?;
    let alpha = attack_status(&innovation_set, &eps)?;
    let bundle = MeasurementBundle {
        receiver_id: receiver,
        z: z.clone(),
        h: model.h.clone(),
        r,
        attack_status: alpha,
        noise_pz: model.measurement_pz.clone(),
    };
    Ok((pred, bundle))
}

fn point_predict(
    model: &Model,
    psi: f64,
    node: &PointNode,
    receiver: usize,
    z: &DVector<f64>,
) -> (PointState, MeasurementBundle) {
    let pred = pv_time_update(&node.state, &model.f, &model.q);
    let x = DVector::from_column_slice(pred.mean.as_slice());
    let eps = z - &model.h * x;
    let r = model.adapt_r(&node.r, psi, &eps, &pred.covariance);
    let bundle = MeasurementBundle {
        receiver_id: receiver,
        z: z.clone(),
        h: model.h.clone(),
        r,
        attack_status: 0.0,
        noise_pz: model.measurement_pz.clone(),
    };
    (pred, bundle)
}

/// Runs every iteration of the scenario with the given parallelism inside
/// each round.
pub fn run_scenario_with(s: &Scenario, mode: ExecutionMode) -> Result<SimLog, NetError> {
    let mut world = World::new(s, mode)?;
    let iterations = s.iterations();
    let mut rounds = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        rounds.push(world.run_round()?);
    }
    Ok(SimLog {
        n_receivers: s.n_receivers(),
        dt_s: s.dt_s,
        estimators: dedup_kinds(&s.estimators),
        rounds,
    })
}

pub fn run_scenario(s: &Scenario) -> Result<SimLog, NetError> {
    run_scenario_with(s, ExecutionMode::Parallel)
}

fn dedup_kinds(kinds: &[EstimatorKind]) -> Vec<EstimatorKind> {
    let mut out = Vec::with_capacity(kinds.len());
    for &k in kinds {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}
