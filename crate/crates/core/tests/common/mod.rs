//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the crate's set algebra: every quantity is
//! recomputed from first principles with plain loops, closed forms or
//! exhaustive search.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * gaussian(rng))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * gaussian(rng))
}

/// `B Bᵀ + floor·I` with a Gaussian `B`: symmetric positive definite.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, scale: f64, floor: f64) -> DMatrix<f64> {
    let b = random_matrix(rng, n, n, scale);
    let mut m = &b * b.transpose();
    for i in 0..n {
        m[(i, i)] += floor;
    }
    m
}

/// Triple-loop product.
pub fn naive_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Largest entrywise deviation relative to the magnitude of `want`.
pub fn rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    assert_eq!(got.shape(), want.shape());
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want.iter())
        .fold(0.0f64, |m, (g, w)| m.max((g - w).abs()))
        / scale
}

/// `min ‖r − Aβ‖` over `β ∈ [−1, 1]^e` by repeatedly refined grid search.
///
/// Each pass evaluates a full tensor grid over the current search box and
/// recenters a box of eight grid steps on the best node, so the box shrinks
/// by roughly half per pass while the convex objective keeps the minimizer
/// inside it.
pub fn grid_box_distance(a: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    const NODES: usize = 17;
    const PASSES: usize = 48;
    let e = a.ncols();
    let objective = |beta: &[f64]| {
        let mut res = r.clone();
        for (k, b) in beta.iter().enumerate() {
            res.axpy(-b, &a.column(k), 1.0);
        }
        res.norm()
    };
    if e == 0 {
        return r.norm();
    }
    let mut lo = vec![-1.0; e];
    let mut hi = vec![1.0; e];
    let mut best = f64::INFINITY;
    let mut best_beta = vec![0.0; e];
    let total = NODES.pow(e as u32);
    let mut beta = vec![0.0; e];
    for _ in 0..PASSES {
        for idx in 0..total {
            let mut rest = idx;
            for k in 0..e {
                let node = rest % NODES;
                rest /= NODES;
                beta[k] = lo[k] + (hi[k] - lo[k]) * node as f64 / (NODES - 1) as f64;
            }
            let f = objective(&beta);
            if f < best {
                best = f;
                best_beta.copy_from_slice(&beta);
            }
        }
        for k in 0..e {
            let step = (hi[k] - lo[k]) / (NODES - 1) as f64;
            lo[k] = (best_beta[k] - 4.0 * step).max(-1.0);
            hi[k] = (best_beta[k] + 4.0 * step).min(1.0);
        }
    }
    best
}

/// Principal axes of a 2×2 symmetric positive definite matrix scaled by
/// the square roots of their eigenvalues, in closed form. The columns
/// `s₁, s₂` satisfy `s₁s₁ᵀ + s₂s₂ᵀ = Σ`.
pub fn principal_axes2(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, b, d) = (sigma[(0, 0)], sigma[(0, 1)], sigma[(1, 1)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let mut out = DMatrix::zeros(2, 2);
    for (k, lambda) in [mid + rad, mid - rad].into_iter().enumerate() {
        // Either row of (Σ − λI) is orthogonal to the eigenvector; take the
        // better conditioned one.
        let v = if (a - lambda).abs() + b.abs() >= (d - lambda).abs() + b.abs() {
            [-b, a - lambda]
        } else {
            [d - lambda, -b]
        };
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let v = if norm > 0.0 {
            [v[0] / norm, v[1] / norm]
        } else if k == 0 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        out[(0, k)] = v[0] * lambda.max(0.0).sqrt();
        out[(1, k)] = v[1] * lambda.max(0.0).sqrt();
    }
    out
}

/// Edge normals of the planar zonotope spanned by `gens` (one per
/// non-degenerate generator), unit length.
pub fn edge_normals(gens: &[[f64; 2]]) -> Vec<[f64; 2]> {
    gens.iter()
        .filter_map(|g| {
            let len = (g[0] * g[0] + g[1] * g[1]).sqrt();
            (len > 0.0).then(|| [-g[1] / len, g[0] / len])
        })
        .collect()
}

fn support(n: &[f64; 2], gens: &[[f64; 2]]) -> f64 {
    gens.iter().map(|g| (n[0] * g[0] + n[1] * g[1]).abs()).sum()
}

fn columns(m: &DMatrix<f64>) -> Vec<[f64; 2]> {
    (0..m.ncols()).map(|j| [m[(0, j)], m[(1, j)]]).collect()
}

/// Half-plane membership test for the planar zonotope `⟨c, G⟩`.
pub fn zonotope_contains(c: &[f64; 2], g: &DMatrix<f64>, p: &[f64; 2]) -> bool {
    let gens = columns(g);
    let d = [p[0] - c[0], p[1] - c[1]];
    let normals = edge_normals(&gens);
    if normals.is_empty() {
        return d == [0.0, 0.0];
    }
    normals.iter().all(|n| {
        let h = support(n, &gens);
        (n[0] * d[0] + n[1] * d[1]).abs() <= h * (1.0 + 1e-12)
    })
}

/// Area of a planar zonotope by Monte-Carlo sampling of its bounding box.
pub fn zonotope_area_mc<R: Rng>(rng: &mut R, c: &[f64; 2], g: &DMatrix<f64>, samples: usize) -> f64 {
    let hx: f64 = (0..g.ncols()).map(|j| g[(0, j)].abs()).sum();
    let hy: f64 = (0..g.ncols()).map(|j| g[(1, j)].abs()).sum();
    let mut inside = 0usize;
    for _ in 0..samples {
        let p = [
            c[0] + hx * (2.0 * rng.random::<f64>() - 1.0),
            c[1] + hy * (2.0 * rng.random::<f64>() - 1.0),
        ];
        if zonotope_contains(c, g, &p) {
            inside += 1;
        }
    }
    4.0 * hx * hy * inside as f64 / samples as f64
}

/// Planar p-Zonotope seen through its confidence footprints
/// `⟨c, [G, r·S]⟩`, with `S` the principal axes of `Σ`.
pub struct Footprints {
    c: [f64; 2],
    normals: Vec<(f64, [f64; 2], f64)>,
    pub peak: f64,
    s: Vec<[f64; 2]>,
    g: Vec<[f64; 2]>,
}

impl Footprints {
    pub fn new(c: &DVector<f64>, g: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Self {
        let s_mat = principal_axes2(sigma);
        let g_cols = columns(g);
        let s_cols = columns(&s_mat);
        let mut all = g_cols.clone();
        all.extend_from_slice(&s_cols);
        let normals = edge_normals(&all)
            .into_iter()
            .map(|n| (support(&n, &g_cols), n, support(&n, &s_cols)))
            .collect();
        let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
        Self {
            c: [c[0], c[1]],
            normals,
            peak: 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()),
            s: s_cols,
            g: g_cols,
        }
    }

    /// Smallest `r ≥ 0` with `p ∈ ⟨c, [G, r·S]⟩`.
    pub fn radius(&self, p: &[f64; 2]) -> f64 {
        let d = [p[0] - self.c[0], p[1] - self.c[1]];
        self.normals
            .iter()
            .map(|(hg, n, hs)| ((n[0] * d[0] + n[1] * d[1]).abs() - hg) / hs)
            .fold(0.0f64, f64::max)
    }

    /// Half-widths of the bounding box of the footprint at radius `r`.
    pub fn extent(&self, r: f64) -> [f64; 2] {
        let ax = |k: usize| -> f64 {
            self.g.iter().map(|v| v[k].abs()).sum::<f64>() + r * self.s.iter().map(|v| v[k].abs()).sum::<f64>()
        };
        [ax(0), ax(1)]
    }

    pub fn center(&self) -> [f64; 2] {
        self.c
    }
}

/// Brute-force integral over `|x₁| ≥ alert_limit` of the level-ceiling
/// density: a point at footprint radius `ρ ≤ γ` gets `peak·exp(−γ_j²/2)`
/// minus the base density `peak·exp(−γ²/2)`, where `γ_j` is the schedule
/// radius `γ·j/levels` one step inside the first one at or beyond `ρ`.
/// Midpoint rule on `cells × cells` over the bounding box of the
/// `γ` footprint.
pub fn slab_mass_oracle(fp: &Footprints, alert_limit: f64, gamma: f64, levels: usize, cells: usize) -> f64 {
    let [ex, ey] = fp.extent(gamma);
    let [cx, cy] = fp.center();
    let (x0, x1) = (cx - ex, cx + ex);
    let (y0, y1) = (cy - ey, cy + ey);
    let hx = (x1 - x0) / cells as f64;
    let hy = (y1 - y0) / cells as f64;
    let base = fp.peak * (-0.5 * gamma * gamma).exp();
    let mut total = 0.0;
    for i in 0..cells {
        let x = x0 + (i as f64 + 0.5) * hx;
        if x.abs() < alert_limit {
            continue;
        }
        for j in 0..cells {
            let y = y0 + (j as f64 + 0.5) * hy;
            let rho = fp.radius(&[x, y]);
            if rho > gamma {
                continue;
            }
            // Snap ρ up to the schedule; the slab whose footprint first
            // contains the point has its top at one schedule step inward.
            let steps_out = (rho / gamma * levels as f64).ceil().max(1.0);
            let top_radius = gamma * (steps_out - 1.0) / levels as f64;
            total += fp.peak * (-0.5 * top_radius * top_radius).exp() - base;
        }
    }
    total * hx * hy
}

/// A random planar p-Zonotope `(c, G, Σ)` and an alert limit that cuts
/// through its `γ = 3` footprint, so both the safe and the unsafe part
/// carry mass.
pub fn random_risk_case<R: Rng>(rng: &mut R) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let e = rng.random_range(0..=3);
    let g = random_matrix(rng, 2, e, 1.0);
    let sigma = random_spd(rng, 2, 0.8, 0.05);
    let probe = Footprints::new(&DVector::zeros(2), &g, &sigma);
    let [ex, _] = probe.extent(3.0);
    let c = DVector::from_vec(vec![ex * rng.random_range(-0.4..0.4), gaussian(rng)]);
    let alert_limit = ex * rng.random_range(0.15..0.7);
    (c, g, sigma, alert_limit)
}
