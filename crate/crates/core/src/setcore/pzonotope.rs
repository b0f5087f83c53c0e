use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::qp::BoxQpSolution;
use super::zonotope::regularized_cholesky;
use super::{check_dim, sqrt_psd, Polytope2D, Result, SetError, Zonotope};
use crate::setcore::qp::{solve_box_least_squares, QP_MAX_SWEEPS, QP_TOLERANCE};

/// Probabilistic zonotope `(c, G, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PZonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    covariance: DMatrix<f64>,
}

/// One slab of the stacked-polytope over-approximation used for risk.
#[derive(Debug, Clone, PartialEq)]
pub struct LeveledPolytope {
    pub polytope: Polytope2D,
    /// Density at the top face of the slab.
    pub level_density: f64,
    /// Slab thickness in density units.
    pub density_increment: f64,
    /// Confidence radius (in standard deviations) the polytope was built with.
    pub radius: f64,
}

impl PZonotope {
    /// Builds a p-Zonotope, checking dimensions and that `covariance` is
    /// symmetric PSD. Eigenvalues down to `−1e-12·‖Σ‖` are accepted and
    /// clamped to zero.
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        check_dim("PZonotope::new", n, generators.nrows())?;
        check_dim("PZonotope::new", n, covariance.nrows())?;
        check_dim("PZonotope::new", n, covariance.ncols())?;
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let asym = (&covariance - &sym).norm();
        let scale = sym.norm();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
            return Err(SetError::InvalidParameter {
                name: "covariance",
                reason: "not symmetric".into(),
            });
        }
        let covariance = if n == 0 || scale == 0.0 {
            sym
        } else {
            let eig = SymmetricEigen::new(sym.clone());
            let min = eig.eigenvalues.min();
            if min < -1e-12 * scale {
                return Err(SetError::NotPositiveSemidefinite { min_eigenvalue: min });
            }
            if min < 0.0 {
                let clamped = eig.eigenvalues.map(|l| l.max(0.0));
                &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
            } else {
                sym
            }
        };
        Ok(Self {
            center,
            generators,
            covariance,
        })
    }

    /// Internal constructor for results of closed operations: symmetrizes
    /// but skips the eigenvalue check.
    pub(crate) fn from_parts(center: DVector<f64>, generators: DMatrix<f64>, covariance: DMatrix<f64>) -> Self {
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        Self {
            center,
            generators,
            covariance,
        }
    }

    /// The neutral element of the Minkowski sum in `n` dimensions.
    pub fn zero(n: usize) -> Self {
        Self {
            center: DVector::zeros(n),
            generators: DMatrix::zeros(n, 0),
            covariance: DMatrix::zeros(n, n),
        }
    }

    /// Turns interval knowledge about an uncertain Gaussian into a p-Zonotope:
    /// center at the midpoint of the mean interval, one axis-aligned
    /// generator per coordinate with the interval half-width, and covariance
    /// `inflation · diag(cov_hi)`.
    ///
    /// Zero half-widths produce zero generator columns, which are kept so
    /// the generator count always equals the dimension.
    pub fn from_bounds(mean_lo: &[f64], mean_hi: &[f64], cov_hi: &[f64], inflation: f64) -> Result<Self> {
        let n = mean_lo.len();
        check_dim("from_bounds", n, mean_hi.len())?;
        check_dim("from_bounds", n, cov_hi.len())?;
        if inflation.is_nan() || inflation <= 0.0 {
            return Err(SetError::InvalidParameter {
                name: "inflation",
                reason: format!("must be > 0, got {inflation}"),
            });
        }
        for i in 0..n {
            if mean_lo[i].is_nan() || mean_hi[i].is_nan() || mean_lo[i] > mean_hi[i] {
                return Err(SetError::InvertedBounds {
                    index: i,
                    lower: mean_lo[i],
                    upper: mean_hi[i],
                });
            }
            if cov_hi[i].is_nan() || cov_hi[i] < 0.0 {
                return Err(SetError::InvalidParameter {
                    name: "cov_hi",
                    reason: format!("entry {i} is negative: {}", cov_hi[i]),
                });
            }
        }
        let center = DVector::from_iterator(n, (0..n).map(|i| 0.5 * mean_lo[i] + 0.5 * mean_hi[i]));
        let half = DVector::from_iterator(n, (0..n).map(|i| 0.5 * (mean_hi[i] - mean_lo[i])));
        let cov = DVector::from_iterator(n, cov_hi.iter().map(|c| inflation * c));
        Ok(Self {
            center,
            generators: DMatrix::from_diagonal(&half),
            covariance: DMatrix::from_diagonal(&cov),
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// The zonotope `⟨c, G⟩` the Gaussian means range over.
    pub fn center_zonotope(&self) -> Zonotope {
        Zonotope::new(self.center.clone(), self.generators.clone()).expect("dimensions checked at construction")
    }

    /// `(c₁ + c₂, [G₁ G₂], Σ₁ + Σ₂)`.
    pub fn minkowski_sum(&self, other: &PZonotope) -> Result<PZonotope> {
        check_dim("minkowski_sum", self.dim(), other.dim())?;
        Ok(Self {
            center: &self.center + &other.center,
            generators: hcat(&[&self.generators, &other.generators]),
            covariance: &self.covariance + &other.covariance,
        })
    }

    /// Folds the Minkowski sum left to right; generators are concatenated
    /// in iteration order.
    pub fn minkowski_sum_all<'a, I>(items: I) -> Result<PZonotope>
    where
        I: IntoIterator<Item = &'a PZonotope>,
    {
        let mut iter = items.into_iter();
        let first = iter.next().ok_or(SetError::InvalidParameter {
            name: "items",
            reason: "empty Minkowski sum".into(),
        })?;
        let n = first.dim();
        let rest: Vec<&PZonotope> = iter.collect();
        for r in &rest {
            check_dim("minkowski_sum_all", n, r.dim())?;
        }
        let mut center = first.center.clone();
        let mut covariance = first.covariance.clone();
        let mut gens: Vec<&DMatrix<f64>> = vec![&first.generators];
        for r in &rest {
            center += &r.center;
            covariance += &r.covariance;
            gens.push(&r.generators);
        }
        Ok(Self {
            center,
            generators: hcat(&gens),
            covariance,
        })
    }

    /// `(A c, A G, A Σ Aᵀ)`.
    pub fn linear_map(&self, a: &DMatrix<f64>) -> Result<PZonotope> {
        check_dim("linear_map", self.dim(), a.ncols())?;
        Ok(Self::from_parts(
            a * &self.center,
            a * &self.generators,
            a * &self.covariance * a.transpose(),
        ))
    }

    /// `(μ + c, G, Σ)`; generators and covariance are copied untouched.
    pub fn translate(&self, mu: &DVector<f64>) -> Result<PZonotope> {
        check_dim("translate", self.dim(), mu.len())?;
        Ok(Self {
            center: mu + &self.center,
            generators: self.generators.clone(),
            covariance: self.covariance.clone(),
        })
    }

    /// Removes generator columns that are exactly zero.
    pub fn without_zero_generators(&self) -> PZonotope {
        let keep: Vec<usize> = (0..self.n_generators())
            .filter(|&i| self.generators.column(i).iter().any(|&x| x != 0.0))
            .collect();
        if keep.len() == self.n_generators() {
            return self.clone();
        }
        Self {
            center: self.center.clone(),
            generators: self.generators.select_columns(&keep),
            covariance: self.covariance.clone(),
        }
    }

    /// Bounds the generator count by keeping the `max_generators − n` longest
    /// generators and enclosing the rest in their axis-aligned interval hull
    /// (`n` diagonal columns). The result contains the original set.
    pub fn reduce_order(&self, max_generators: usize) -> PZonotope {
        let n = self.dim();
        let e = self.n_generators();
        if e <= max_generators || max_generators < n {
            return self.clone();
        }
        let keep_count = max_generators - n;
        let mut order: Vec<usize> = (0..e).collect();
        let score: Vec<f64> = (0..e)
            .map(|i| {
                let c = self.generators.column(i);
                c.iter().map(|x| x.abs()).sum::<f64>() - c.amax()
            })
            .collect();
        let norms: Vec<f64> = (0..e).map(|i| self.generators.column(i).norm()).collect();
        // Girard's criterion first, length as tie-break; stable for determinism.
        order.sort_by(|&i, &j| {
            (score[j] + norms[j])
                .partial_cmp(&(score[i] + norms[i]))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let (kept, boxed) = order.split_at(keep_count);
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        let mut hull = DVector::zeros(n);
        for &i in boxed {
            for r in 0..n {
                hull[r] += self.generators[(r, i)].abs();
            }
        }
        let kept_cols = self.generators.select_columns(&kept);
        let generators = hcat(&[&kept_cols, &DMatrix::from_diagonal(&hull)]);
        Self {
            center: self.center.clone(),
            generators,
            covariance: self.covariance.clone(),
        }
    }

    fn whitened(&self, point: &DVector<f64>) -> Result<(f64, BoxQpSolution)> {
        check_dim("sup_density", self.dim(), point.len())?;
        let chol = regularized_cholesky(&self.covariance)?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(SetError::Singular);
        }
        let rhs = point - &self.center;
        let r = l.solve_lower_triangular(&rhs).ok_or(SetError::Singular)?;
        let a = l.solve_lower_triangular(&self.generators).ok_or(SetError::Singular)?;
        let sol = solve_box_least_squares(&a, &r, QP_TOLERANCE, QP_MAX_SWEEPS)?;
        Ok((log_det, sol))
    }

    /// Mahalanobis distance (metric `Σ⁻¹`) from `point` to `⟨c, G⟩`.
    pub fn distance_to_center_zonotope(&self, point: &DVector<f64>) -> Result<BoxQpSolution> {
        Ok(self.whitened(point)?.1)
    }

    /// `log((2π)^(−n/2) det(Σ)^(−1/2))`.
    pub fn log_peak_density(&self) -> Result<f64> {
        let chol = regularized_cholesky(&self.covariance)?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(SetError::Singular);
        }
        Ok(-0.5 * (self.dim() as f64 * (2.0 * PI).ln() + log_det))
    }

    /// `log sup_{m ∈ ⟨c,G⟩} N(point; m, Σ)`.
    pub fn log_sup_density(&self, point: &DVector<f64>) -> Result<f64> {
        let (log_det, sol) = self.whitened(point)?;
        let log_peak = -0.5 * (self.dim() as f64 * (2.0 * PI).ln() + log_det);
        Ok(log_peak - 0.5 * sol.distance * sol.distance)
    }

    pub fn sup_density(&self, point: &DVector<f64>) -> Result<f64> {
        self.log_sup_density(point).map(f64::exp)
    }

    /// `⟨c, [G, γS]⟩` with `S Sᵀ = Σ`: every point within `γ` standard
    /// deviations of some admissible mean.
    pub fn gamma_confidence_zonotope(&self, gamma: f64) -> Zonotope {
        let s = sqrt_psd(&self.covariance) * gamma;
        let s = drop_zero_columns(s);
        Zonotope::new(self.center.clone(), hcat(&[&self.generators, &s])).expect("dimensions match by construction")
    }

    /// Stacked polytopes over-approximating the density hill of a planar
    /// p-Zonotope truncated at `gamma` standard deviations.
    ///
    /// Level `l` (1-based, `levels` total) sits at confidence radius
    /// `γ_l = γ·(levels − l)/levels` with density `p_l = peak·exp(−γ_l²/2)`.
    /// Its slab spans `(p_{l−1}, p_l]` (with `p_0` at radius `γ`) and is
    /// drawn with the footprint of the wider radius `γ_{l−1}`, so summing
    /// slab volumes bounds the truncated hill from above. Output is ordered
    /// by increasing density.
    pub fn overapprox_leveled_polytopes(&self, gamma: f64, levels: usize) -> Result<Vec<LeveledPolytope>> {
        check_dim("overapprox_leveled_polytopes", 2, self.dim())?;
        if levels == 0 {
            return Err(SetError::InvalidParameter {
                name: "levels",
                reason: "must be >= 1".into(),
            });
        }
        if gamma.is_nan() || gamma < 0.0 {
            return Err(SetError::InvalidParameter {
                name: "gamma",
                reason: format!("must be >= 0, got {gamma}"),
            });
        }
        let log_peak = self.log_peak_density()?;
        let sqrt_cov = drop_zero_columns(sqrt_psd(&self.covariance));
        let radius = |l: usize| gamma * (levels - l) as f64 / levels as f64;
        let density = |g: f64| (log_peak - 0.5 * g * g).exp();

        let mut out = Vec::with_capacity(levels);
        let mut prev = density(gamma);
        for l in 1..=levels {
            let outer = radius(l - 1);
            let level_density = density(radius(l));
            let z = Zonotope::new(self.center.clone(), hcat(&[&self.generators, &(&sqrt_cov * outer)]))?;
            out.push(LeveledPolytope {
                polytope: z.to_polygon()?,
                level_density,
                density_increment: level_density - prev,
                radius: outer,
            });
            prev = level_density;
        }
        Ok(out)
    }
}

pub(crate) fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

fn drop_zero_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..m.ncols())
        .filter(|&i| m.column(i).iter().any(|&x| x != 0.0))
        .collect();
    if keep.len() == m.ncols() {
        m
    } else {
        m.select_columns(&keep)
    }
}
