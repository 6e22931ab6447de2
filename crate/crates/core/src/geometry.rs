//! Planes as orthogonal projection matrices, regions, and the distance
//! primitives used by every checker.
//!
//! An `m`-plane `P` in `R^n` is identified with its projection `P_#`. The
//! distance between planes is the Frobenius norm `|S_# - P_#|_F`. For two
//! `m`-planes the difference `S_# - P_#` has rank at most `2m` and its
//! eigenvalues come in pairs `±sin θ_i` (principal angles), so
//!
//! ```text
//! |S - P|_op <= |S - P|_F = sqrt(2 Σ sin² θ_i) <= sqrt(2m) |S - P|_op
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Algebraic identities (idempotency, trace, Pythagoras).
    pub algebraic: f64,
    /// Comparisons against closed forms evaluated by quadrature.
    pub quadrature: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        algebraic: 1e-12,
        quadrature: 1e-6,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Volume of the unit ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    // ω_0 = 1, ω_1 = 2, ω_m = ω_{m-2} 2π / m
    let mut even = 1.0;
    let mut odd = 2.0;
    if m == 0 {
        return even;
    }
    if m == 1 {
        return odd;
    }
    let mut k = 2;
    while k <= m {
        if k % 2 == 0 {
            even *= 2.0 * std::f64::consts::PI / k as f64;
        } else {
            odd *= 2.0 * std::f64::consts::PI / k as f64;
        }
        k += 1;
    }
    if m % 2 == 0 {
        even
    } else {
        odd
    }
}

/// An `m`-dimensional linear subspace of `R^n`, stored as its orthogonal
/// projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    n: usize,
    m: usize,
    proj: DMatrix<f64>,
}

impl Plane {
    /// Orthogonal projection onto the span of `vectors`.
    pub fn from_basis(vectors: &[Vec<f64>]) -> Result<Plane> {
        let Some(first) = vectors.first() else {
            return Err(Error::DegenerateBasis("empty basis".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::DegenerateBasis("zero ambient dimension".into()));
        }
        if vectors.len() > n {
            return Err(Error::DegenerateBasis(format!(
                "{} vectors in R^{}",
                vectors.len(),
                n
            )));
        }
        let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            let original = DVector::from_column_slice(v);
            let scale = original.norm();
            if !scale.is_finite() || scale == 0.0 {
                return Err(Error::DegenerateBasis(format!("vector {i} is zero")));
            }
            let mut u = original.clone();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for e in &ortho {
                    let c = e.dot(&u);
                    u -= e * c;
                }
            }
            let residual = u.norm();
            if residual <= 1e-10 * scale {
                return Err(Error::DegenerateBasis(format!(
                    "vector {i} lies in the span of the previous ones"
                )));
            }
            ortho.push(u / residual);
        }
        let mut proj = DMatrix::zeros(n, n);
        for e in &ortho {
            proj += e * e.transpose();
        }
        let proj = (&proj + proj.transpose()) * 0.5;
        Ok(Plane {
            n,
            m: ortho.len(),
            proj,
        })
    }

    /// Validate an explicit projection matrix.
    pub fn from_projection(proj: DMatrix<f64>, tol: f64) -> Result<Plane> {
        let n = proj.nrows();
        if proj.ncols() != n || n == 0 {
            return Err(Error::InvalidProjection("matrix is not square".into()));
        }
        if (&proj - proj.transpose()).norm() > tol {
            return Err(Error::InvalidProjection("matrix is not symmetric".into()));
        }
        if (&proj * &proj - &proj).norm() > tol {
            return Err(Error::InvalidProjection("matrix is not idempotent".into()));
        }
        let trace = proj.trace();
        let m = trace.round();
        if (trace - m).abs() > tol || m < 0.0 {
            return Err(Error::InvalidProjection(format!(
                "trace {trace} is not an integer"
            )));
        }
        Ok(Plane {
            n,
            m: m as usize,
            proj,
        })
    }

    /// The span of the first `m` coordinate axes of `R^n`.
    pub fn coordinate(n: usize, m: usize) -> Result<Plane> {
        if m == 0 || m > n {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("need 1 <= m <= n, got m = {m}, n = {n}"),
            });
        }
        let mut proj = DMatrix::zeros(n, n);
        for i in 0..m {
            proj[(i, i)] = 1.0;
        }
        Ok(Plane { n, m, proj })
    }

    /// The line in `R^2` spanned by `(cos angle, sin angle)`.
    pub fn line_2d(angle: f64) -> Plane {
        let (s, c) = angle.sin_cos();
        let proj = DMatrix::from_row_slice(2, 2, &[c * c, c * s, c * s, s * s]);
        Plane { n: 2, m: 1, proj }
    }

    /// The line spanned by a nonzero direction.
    pub fn line(direction: &[f64]) -> Result<Plane> {
        Plane::from_basis(&[direction.to_vec()])
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.proj
    }

    /// `P_#^⊥ = I - P_#`.
    pub fn complement_projection(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) - &self.proj
    }

    /// Row-major flattening of the projection (a point of `Y`).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.proj[(i, j)]);
            }
        }
        out
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|j| self.proj[(i, j)] * v[j]).sum();
        }
        out
    }

    pub fn project_perp(&self, v: &[f64]) -> Vec<f64> {
        let p = self.project(v);
        v.iter().zip(p).map(|(x, y)| x - y).collect()
    }

    /// `|P_#(x - a)|` and `|P_#^⊥(x - a)|`.
    pub fn split_norms(&self, x: &[f64], a: &[f64]) -> (f64, f64) {
        let d = sub(x, a);
        let tangential = self.project(&d);
        let normal: Vec<f64> = d.iter().zip(&tangential).map(|(u, t)| u - t).collect();
        (norm(&tangential), norm(&normal))
    }

    /// Orthonormal bases `(tangent, normal)` of the plane and its complement.
    /// Deterministic: pivoted Gram-Schmidt on the columns of `P_#` and
    /// `I - P_#`, each vector signed so its first significant entry is positive.
    pub fn frame(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let tangent = column_basis(&self.proj, self.m);
        let normal = column_basis(&self.complement_projection(), self.n - self.m);
        (tangent, normal)
    }

    /// Frobenius distance between projections.
    pub fn distance(&self, other: &Plane) -> Result<f64> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::DimensionMismatch {
                expected: self.n * 100 + self.m,
                found: other.n * 100 + other.m,
            });
        }
        Ok((&self.proj - &other.proj).norm())
    }

    /// Residuals of the defining identities: (`|P² - P|_F`, `|P - Pᵀ|_F`, `|tr P - m|`).
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        (
            (&self.proj * &self.proj - &self.proj).norm(),
            (&self.proj - self.proj.transpose()).norm(),
            (self.proj.trace() - self.m as f64).abs(),
        )
    }
}

fn column_basis(mat: &DMatrix<f64>, count: usize) -> Vec<Vec<f64>> {
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| mat.column(j).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    for j in order {
        if basis.len() == count {
            break;
        }
        let mut u: DVector<f64> = mat.column(j).into_owned();
        for _ in 0..2 {
            for e in &basis {
                let c = e.dot(&u);
                u -= e * c;
            }
        }
        let r = u.norm();
        if r > 1e-8 {
            let mut v = u / r;
            if let Some(first) = v.iter().find(|c| c.abs() > 1e-12).copied() {
                if first < 0.0 {
                    v = -v;
                }
            }
            basis.push(v);
        }
    }
    basis.into_iter().map(|v| v.iter().copied().collect()).collect()
}

#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    n: usize,
    m: usize,
    proj: Vec<Vec<f64>>,
}

impl Serialize for Plane {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let proj = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.proj[(i, j)]).collect())
            .collect();
        PlaneRepr {
            n: self.n,
            m: self.m,
            proj,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Plane {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PlaneRepr::deserialize(d)?;
        if repr.proj.len() != repr.n || repr.proj.iter().any(|row| row.len() != repr.n) {
            return Err(serde::de::Error::custom("projection shape does not match n"));
        }
        let flat: Vec<f64> = repr.proj.into_iter().flatten().collect();
        let mat = DMatrix::from_row_slice(repr.n, repr.n, &flat);
        let plane = Plane::from_projection(mat, 1e-9).map_err(serde::de::Error::custom)?;
        if plane.m != repr.m {
            return Err(serde::de::Error::custom("projection trace does not match m"));
        }
        Ok(plane)
    }
}

/// `plane_distance`: Frobenius norm of the projection difference.
pub fn plane_distance(s: &Plane, p: &Plane) -> Result<f64> {
    s.distance(p)
}

/// `plane_from_basis`.
pub fn plane_from_basis(vectors: &[Vec<f64>]) -> Result<Plane> {
    Plane::from_basis(vectors)
}

/// Regions of `R^n`. Open/closed conventions follow the set braces: balls
/// and cylinders are open unless named closed, the cone complement is strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Everything,
    OpenBall {
        center: Vec<f64>,
        radius: f64,
    },
    ClosedBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{ |P(x-a)| < radius, |P^⊥(x-a)| < height }`
    TruncatedCylinder {
        center: Vec<f64>,
        plane: Plane,
        radius: f64,
        height: f64,
    },
    /// Closed `distance`-neighborhood of the closure of a truncated cylinder.
    CylinderNeighborhood {
        center: Vec<f64>,
        plane: Plane,
        radius: f64,
        height: f64,
        distance: f64,
    },
    /// `{ |P^⊥(x-a)| > aperture |P(x-a)| }`
    ConeComplement {
        center: Vec<f64>,
        plane: Plane,
        aperture: f64,
    },
    /// `{ inner < |x-a| < outer }`
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// `{ <normal, x> >= offset }`
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    Intersection {
        parts: Vec<Region>,
    },
    Difference {
        base: Box<Region>,
        removed: Box<Region>,
    },
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive, got {value}"),
        })
    }
}

impl Region {
    pub fn open_ball(center: &[f64], radius: f64) -> Result<Region> {
        positive("radius", radius)?;
        Ok(Region::OpenBall {
            center: center.to_vec(),
            radius,
        })
    }

    pub fn closed_ball(center: &[f64], radius: f64) -> Result<Region> {
        positive("radius", radius)?;
        Ok(Region::ClosedBall {
            center: center.to_vec(),
            radius,
        })
    }

    pub fn cylinder(center: &[f64], plane: &Plane, radius: f64, height: f64) -> Result<Region> {
        positive("radius", radius)?;
        positive("height", height)?;
        Ok(Region::TruncatedCylinder {
            center: center.to_vec(),
            plane: plane.clone(),
            radius,
            height,
        })
    }

    pub fn cylinder_neighborhood(
        center: &[f64],
        plane: &Plane,
        radius: f64,
        height: f64,
        distance: f64,
    ) -> Result<Region> {
        positive("radius", radius)?;
        positive("height", height)?;
        positive("distance", distance)?;
        Ok(Region::CylinderNeighborhood {
            center: center.to_vec(),
            plane: plane.clone(),
            radius,
            height,
            distance,
        })
    }

    pub fn cone_complement(center: &[f64], plane: &Plane, aperture: f64) -> Result<Region> {
        if !(aperture > 0.0 && aperture < 1.0) {
            return Err(Error::InvalidParameter {
                name: "aperture",
                reason: format!("must lie in (0,1), got {aperture}"),
            });
        }
        Ok(Region::ConeComplement {
            center: center.to_vec(),
            plane: plane.clone(),
            aperture,
        })
    }

    pub fn annulus(center: &[f64], inner: f64, outer: f64) -> Result<Region> {
        positive("outer", outer)?;
        if !(inner >= 0.0 && inner < outer) {
            return Err(Error::InvalidParameter {
                name: "inner",
                reason: format!("need 0 <= inner < outer, got {inner}"),
            });
        }
        Ok(Region::Annulus {
            center: center.to_vec(),
            inner,
            outer,
        })
    }

    /// `region_contains`.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Everything => true,
            Region::OpenBall { center, radius } => distance(x, center) < *radius,
            Region::ClosedBall { center, radius } => distance(x, center) <= *radius,
            Region::TruncatedCylinder {
                center,
                plane,
                radius,
                height,
            } => {
                let (t, h) = plane.split_norms(x, center);
                t < *radius && h < *height
            }
            Region::CylinderNeighborhood {
                center,
                plane,
                radius,
                height,
                distance: reach,
            } => {
                let (t, h) = plane.split_norms(x, center);
                let dt = (t - radius).max(0.0);
                let dh = (h - height).max(0.0);
                (dt * dt + dh * dh).sqrt() <= *reach
            }
            Region::ConeComplement {
                center,
                plane,
                aperture,
            } => {
                let (t, h) = plane.split_norms(x, center);
                h > aperture * t
            }
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let d = distance(x, center);
                *inner < d && d < *outer
            }
            Region::HalfSpace { normal, offset } => dot(normal, x) >= *offset,
            Region::Intersection { parts } => parts.iter().all(|r| r.contains(x)),
            Region::Difference { base, removed } => base.contains(x) && !removed.contains(x),
        }
    }
}

/// `region_contains`.
pub fn region_contains(region: &Region, x: &[f64]) -> bool {
    region.contains(x)
}
