use nalgebra::Vector2;

use super::{Result, SetError};

/// Convex polygon with counter-clockwise vertices.
///
/// One vertex is a point, two vertices a segment; both have zero area.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope2D {
    vertices: Vec<Vector2<f64>>,
}

impl Polytope2D {
    /// Validates convexity (non-negative turn at every vertex) and rejects
    /// duplicate consecutive vertices.
    pub fn new(vertices: Vec<Vector2<f64>>) -> Result<Self> {
        let n = vertices.len();
        let scale = vertices
            .iter()
            .map(|v| v.amax())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if n > 1 && (b - a).amax() <= 1e-12 * scale {
                return Err(SetError::InvalidParameter {
                    name: "vertices",
                    reason: format!("duplicate consecutive vertices at index {i}"),
                });
            }
            if n > 2 {
                let c = vertices[(i + 2) % n];
                if cross(&(b - a), &(c - b)) < -1e-12 * scale * scale {
                    return Err(SetError::InvalidParameter {
                        name: "vertices",
                        reason: format!("not convex counter-clockwise at index {}", (i + 1) % n),
                    });
                }
            }
        }
        Ok(Self { vertices })
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Vector2<f64>>) -> Self {
        Self { vertices }
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new() }
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n]))
            .sum();
        (0.5 * twice).abs()
    }

    /// Closed-set membership for polygons with at least three vertices.
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(&(b - a), &(p - a)) >= 0.0
        })
    }

    /// One Sutherland–Hodgman pass: keeps the part with `normal·x ≥ offset`.
    pub fn clip_halfplane(&self, normal: &Vector2<f64>, offset: f64) -> Polytope2D {
        let n = self.vertices.len();
        if n == 0 {
            return Polytope2D::empty();
        }
        let side = |p: &Vector2<f64>| normal.dot(p) - offset;
        let mut out = Vec::with_capacity(n + 2);
        for i in 0..n {
            let s = self.vertices[i];
            let e = self.vertices[(i + 1) % n];
            let ds = side(&s);
            let de = side(&e);
            match (ds >= 0.0, de >= 0.0) {
                (true, true) => out.push(e),
                (true, false) => out.push(s + (e - s) * (ds / (ds - de))),
                (false, true) => {
                    out.push(s + (e - s) * (ds / (ds - de)));
                    out.push(e);
                }
                (false, false) => {}
            }
            if n == 1 {
                break;
            }
        }
        out.dedup_by(|a, b| a == b);
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        Polytope2D { vertices: out }
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}
