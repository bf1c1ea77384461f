//! Planar convex polygons and axis-aligned boxes in workspace coordinates (meters).

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A convex polygon stored counterclockwise, with one outward-facing half-plane per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
    faces: Vec<Face>,
}

/// Supporting half-plane `normal · p ≤ offset` with unit outward `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub normal: [f64; 2],
    pub offset: f64,
}

const AREA_EPS: f64 = 1e-12;

impl ConvexPolygon {
    /// Builds a polygon from vertices in either orientation. Rejects fewer than three
    /// vertices, zero area, and non-convex vertex chains.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Invalid(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("polygon vertex"));
        }
        let area = signed_area(&vertices);
        if area.abs() <= AREA_EPS {
            return Err(Error::Invalid("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross < -1e-12 {
                return Err(Error::Invalid("polygon is not convex".into()));
            }
        }
        let mut faces = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            if len <= 1e-12 {
                continue;
            }
            let normal = [dy / len, -dx / len];
            faces.push(Face {
                normal,
                offset: normal[0] * a[0] + normal[1] * a[1],
            });
        }
        Ok(Self { vertices, faces })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * cross;
            cy += (p[1] + q[1]) * cross;
            a2 += cross;
        }
        [cx / (3.0 * a2), cy / (3.0 * a2)]
    }

    /// Closed-set membership.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.faces
            .iter()
            .all(|f| f.normal[0] * p[0] + f.normal[1] * p[1] <= f.offset)
    }

    /// Whether the segment `a`–`b` touches the polygon.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        // Liang-Barsky style clipping against every face.
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let d = [b[0] - a[0], b[1] - a[1]];
        for f in &self.faces {
            let num = f.offset - (f.normal[0] * a[0] + f.normal[1] * a[1]);
            let den = f.normal[0] * d[0] + f.normal[1] * d[1];
            if den.abs() < 1e-15 {
                if num < 0.0 {
                    return false;
                }
            } else {
                let t = num / den;
                if den > 0.0 {
                    t1 = t1.min(t);
                } else {
                    t0 = t0.max(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let p = v[i];
            let q = v[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Axis-aligned box in `k` position coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Aabb {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "box bounds of length {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Invalid("box has an empty side".into()));
        }
        Ok(Self {
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .take(self.dim())
            .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..self.dim().min(other.dim()))
            .all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }
}
