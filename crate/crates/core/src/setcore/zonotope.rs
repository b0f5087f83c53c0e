use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, Vector2};

use super::qp::{solve_box_least_squares, BoxQpSolution, QP_MAX_SWEEPS, QP_TOLERANCE};
use super::{check_dim, Polytope2D, Result, SetError};

/// Generators shorter than this are treated as absent when building polygons.
const DEGENERATE_GENERATOR: f64 = 1e-15;

/// The set `{c + Gβ : β ∈ [−1, 1]^e}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        check_dim("Zonotope::new", center.len(), generators.nrows())?;
        Ok(Self { center, generators })
    }

    pub fn singleton(center: DVector<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// Distance from `point` to the zonotope in the metric induced by
    /// `metric⁻¹`, together with the minimizing generator weights.
    ///
    /// The metric is regularized by `1e-12·tr(M)·I` when its Cholesky
    /// factorization fails.
    pub fn mahalanobis_distance(&self, point: &DVector<f64>, metric: &DMatrix<f64>) -> Result<BoxQpSolution> {
        check_dim("mahalanobis_distance", self.dim(), point.len())?;
        check_dim("mahalanobis_distance", self.dim(), metric.nrows())?;
        check_dim("mahalanobis_distance", self.dim(), metric.ncols())?;
        let chol = regularized_cholesky(metric)?;
        let l = chol.l();
        let rhs = point - &self.center;
        let r = l.solve_lower_triangular(&rhs).ok_or(SetError::Singular)?;
        let a = l.solve_lower_triangular(&self.generators).ok_or(SetError::Singular)?;
        solve_box_least_squares(&a, &r, QP_TOLERANCE, QP_MAX_SWEEPS)
    }

    /// Euclidean membership test up to `tol`.
    pub fn contains(&self, point: &DVector<f64>, tol: f64) -> Result<bool> {
        let identity = DMatrix::identity(self.dim(), self.dim());
        Ok(self.mahalanobis_distance(point, &identity)?.distance <= tol)
    }

    /// Exact vertex enumeration of a planar zonotope.
    ///
    /// Generators are flipped into the upper half-plane, parallel ones are
    /// merged, and the boundary is walked once in angle order. A zonotope
    /// whose generators are all parallel yields a two-vertex segment.
    pub fn to_polygon(&self) -> Result<Polytope2D> {
        check_dim("to_polygon", 2, self.dim())?;
        let c = Vector2::new(self.center[0], self.center[1]);
        let mut gens: Vec<Vector2<f64>> = self
            .generators
            .column_iter()
            .map(|g| Vector2::new(g[0], g[1]))
            .filter(|g| g.norm() >= DEGENERATE_GENERATOR)
            .map(|g| if g.y < 0.0 || (g.y == 0.0 && g.x < 0.0) { -g } else { g })
            .collect();
        gens.sort_by(|a, b| {
            a.y.atan2(a.x)
                .partial_cmp(&b.y.atan2(b.x))
                .unwrap_or(Ordering::Equal)
                .then(b.x.partial_cmp(&a.x).unwrap_or(Ordering::Equal))
        });

        let mut merged: Vec<Vector2<f64>> = Vec::with_capacity(gens.len());
        for g in gens {
            match merged.last_mut() {
                Some(last) if parallel(last, &g) => *last += g,
                _ => merged.push(g),
            }
        }
        // The angle sort wraps at π: a generator just below π is parallel
        // to one at angle 0 after flipping.
        if merged.len() > 1 && parallel(&merged[0], &-merged[merged.len() - 1]) {
            let last = merged.pop().unwrap();
            merged[0] -= last;
        }

        if merged.is_empty() {
            return Ok(Polytope2D::from_vertices_unchecked(vec![c]));
        }
        let total: Vector2<f64> = merged.iter().sum();
        let mut vertices = Vec::with_capacity(2 * merged.len());
        let mut p = c - total;
        for g in &merged {
            vertices.push(p);
            p += 2.0 * g;
        }
        for g in &merged {
            vertices.push(p);
            p -= 2.0 * g;
        }
        Ok(Polytope2D::from_vertices_unchecked(vertices))
    }
}

fn parallel(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let cross = a.x * b.y - a.y * b.x;
    cross.abs() <= 1e-12 * a.norm() * b.norm() && a.dot(b) > 0.0
}

pub(crate) fn regularized_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let valid = |c: Cholesky<f64, Dyn>| {
        c.l_dirty()
            .diagonal()
            .iter()
            .all(|d| *d > 0.0 && d.is_finite())
            .then_some(c)
    };
    if let Some(chol) = Cholesky::new(m.clone()).and_then(valid) {
        return Ok(chol);
    }
    let trace = m.trace();
    if trace.is_nan() || trace <= 0.0 {
        return Err(SetError::Singular);
    }
    let n = m.nrows();
    let reg = m + DMatrix::identity(n, n) * (1e-12 * trace);
    Cholesky::new(reg).and_then(valid).ok_or(SetError::Singular)
}

/// Square root `S` of a PSD matrix with `S Sᵀ = Σ`, built from the symmetric
/// eigendecomposition: columns are principal axes scaled by `√λ`, ordered by
/// descending eigenvalue. Negative eigenvalues are clamped to zero and the
/// corresponding columns are dropped, as are exactly-zero ones.
pub fn sqrt_psd(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(Ordering::Equal)
    });
    let cols: Vec<DVector<f64>> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > 0.0)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.neg_mut();
            }
            v * eig.eigenvalues[i].sqrt()
        })
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
