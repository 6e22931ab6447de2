//! Quadrature varifolds: finitely many weighted atoms `(x, S, w)` carrying
//! optional mean curvature `H`, second fundamental form `B`, and a sampled
//! function `f` with its weak derivative `df`.
//!
//! Derivative layouts (row-major, direction index first):
//! * `B[k·n² + i·n + j] = ∂_k (S_♯)_{ij}`, so `H_i = Σ_j B[j·n² + i·n + j]`.
//! * `df[k·dimY + p] = ∂_k f_p`.

pub mod scene;
pub mod testfield;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, norm, Plane, Region};

pub use scene::{build_scene, GraphFn, Primitive, SceneSpec, Shape};
pub use testfield::TestField;

/// Tolerance for the trace identity `H = tr_S B`.
pub const TRACE_TOL: f64 = 1e-8;

/// Above this many distinct values `support_diameter` switches from the
/// exact pairwise maximum to a two-sided bound.
pub const EXACT_DIAMETER_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub s: Plane,
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<Vec<f64>>,
    /// Diameter of the quadrature cell the atom represents.
    pub cell: f64,
    /// Index of the generating primitive.
    #[serde(default)]
    pub tag: usize,
}

impl Atom {
    pub fn new(x: Vec<f64>, s: Plane, w: f64, cell: f64) -> Self {
        Atom {
            x,
            s,
            w,
            h: None,
            b: None,
            f: None,
            df: None,
            cell,
            tag: 0,
        }
    }

    /// `tr_S B`, contracted as `Σ_j ∂_j S_{ij}`.
    pub fn trace_contraction(&self) -> Option<Vec<f64>> {
        let b = self.b.as_ref()?;
        let n = self.x.len();
        Some(
            (0..n)
                .map(|i| (0..n).map(|j| b[j * n * n + i * n + j]).sum())
                .collect(),
        )
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let n = self.x.len();
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "w",
                reason: format!("atom {index} has non-positive weight {}", self.w),
            });
        }
        if self.s.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.s.ambient_dim(),
            });
        }
        if let Some(h) = &self.h {
            if h.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: h.len(),
                });
            }
        }
        if let Some(b) = &self.b {
            if b.len() != n * n * n {
                return Err(Error::DimensionMismatch {
                    expected: n * n * n,
                    found: b.len(),
                });
            }
        }
        if let (Some(f), Some(df)) = (&self.f, &self.df) {
            if df.len() != f.len() * n {
                return Err(Error::DimensionMismatch {
                    expected: f.len() * n,
                    found: df.len(),
                });
            }
        }
        if let (Some(h), Some(tr)) = (&self.h, self.trace_contraction()) {
            if distance(h, &tr) > TRACE_TOL * norm(h).max(1.0) {
                return Err(Error::InvalidParameter {
                    name: "h",
                    reason: format!("atom {index} violates H = tr B"),
                });
            }
        }
        Ok(())
    }
}

/// Which per-atom quantity an `L^q` seminorm integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    H,
    B,
    Df,
}

/// Which per-atom value a support diameter is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSelector {
    F,
    S,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SceneSpec>,
    /// Multiplicity of each primitive, indexed by atom tag.
    #[serde(default)]
    pub multiplicities: Vec<u32>,
    #[serde(default)]
    pub cell_sizes: Vec<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVarifold {
    pub n: usize,
    pub m: usize,
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub scene: SceneRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    /// `Σ w S:Dg`
    pub lhs: f64,
    /// `-Σ w ⟨H, g⟩`
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterEstimate {
    pub value: f64,
    /// `false` when `value` is the upper bound `2 max |v - v_0|`.
    pub exact: bool,
    pub distinct_values: usize,
}

impl QuadratureVarifold {
    pub fn new(n: usize, m: usize, atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if a.x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.x.len(),
                });
            }
            if a.s.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: a.s.dim(),
                });
            }
            a.validate(i)?;
        }
        Ok(QuadratureVarifold {
            n,
            m,
            atoms,
            scene: SceneRecord::default(),
        })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        QuadratureVarifold {
            n,
            m,
            atoms: Vec::new(),
            scene: SceneRecord::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn mass(&self, region: &Region) -> f64 {
        self.atoms
            .iter()
            .filter(|a| region.contains(&a.x))
            .map(|a| a.w)
            .sum()
    }

    /// Largest quadrature cell diameter.
    pub fn cell_size(&self) -> f64 {
        self.atoms.iter().map(|a| a.cell).fold(0.0, f64::max)
    }

    pub fn reject_empty(&self, context: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyVarifold(context.to_string()))
        } else {
            Ok(())
        }
    }

    fn field_norm(atom: &Atom, index: usize, field: Field) -> Result<f64> {
        let values = match field {
            Field::H => atom.h.as_ref().ok_or(Error::MissingField { field: "H", atom: index })?,
            Field::B => atom.b.as_ref().ok_or(Error::MissingField { field: "B", atom: index })?,
            Field::Df => atom.df.as_ref().ok_or(Error::MissingField { field: "df", atom: index })?,
        };
        Ok(norm(values))
    }

    /// `(Σ_{x_i ∈ R} w_i |field_i|^q)^{1/q}`.
    pub fn lq_seminorm(&self, region: &Region, field: Field, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("need q >= 1, got {q}"),
            });
        }
        let mut sum = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            if region.contains(&a.x) {
                let v = Self::field_norm(a, i, field)?;
                sum += a.w * v.powf(q);
            }
        }
        Ok(sum.powf(1.0 / q))
    }

    /// `Σ w_i |field_i|` over the region.
    pub fn l1(&self, region: &Region, field: Field) -> Result<f64> {
        self.lq_seminorm(region, field, 1.0)
    }

    pub fn first_variation_check(&self, g: &dyn TestField) -> Result<FirstVariation> {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            let h = a.h.as_ref().ok_or(Error::MissingField { field: "H", atom: i })?;
            let dg = g.jacobian(&a.x);
            let gv = g.value(&a.x);
            lhs += a.w * a.s.projection().component_mul(&dg).sum();
            rhs -= a.w * h.iter().zip(gv.iter()).map(|(u, v)| u * v).sum::<f64>();
        }
        Ok(FirstVariation {
            lhs,
            rhs,
            gap: (lhs - rhs).abs(),
        })
    }

    /// Keep the atoms satisfying `pred`; the label is recorded in the scene notes.
    pub fn restrict(&self, label: &str, pred: impl Fn(&Atom) -> bool) -> QuadratureVarifold {
        let atoms: Vec<Atom> = self.atoms.iter().filter(|a| pred(a)).cloned().collect();
        let mut scene = self.scene.clone();
        scene.notes.push(format!("restrict: {label}"));
        if atoms.is_empty() {
            scene.notes.push("restriction is the zero varifold".into());
        }
        QuadratureVarifold {
            n: self.n,
            m: self.m,
            atoms,
            scene,
        }
    }

    pub fn restrict_region(&self, region: &Region) -> QuadratureVarifold {
        self.restrict(&format!("{region:?}"), |a| region.contains(&a.x))
    }

    /// Keep the atoms with the given indices (in order).
    pub fn select(&self, label: &str, indices: &[usize]) -> QuadratureVarifold {
        let mut scene = self.scene.clone();
        scene.notes.push(format!("select: {label}"));
        QuadratureVarifold {
            n: self.n,
            m: self.m,
            atoms: indices.iter().map(|&i| self.atoms[i].clone()).collect(),
            scene,
        }
    }

    pub fn values(&self, selector: ValueSelector) -> Result<Vec<Vec<f64>>> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| match selector {
                ValueSelector::S => Ok(a.s.flatten()),
                ValueSelector::F => a.f.clone().ok_or(Error::MissingField { field: "f", atom: i }),
            })
            .collect()
    }

    pub fn support_diameter(&self, selector: ValueSelector) -> Result<f64> {
        Ok(self.support_diameter_estimate(selector)?.value)
    }

    pub fn support_diameter_estimate(&self, selector: ValueSelector) -> Result<DiameterEstimate> {
        let values = self.values(selector)?;
        Ok(diameter_of(&values))
    }

    /// Populate `f` with the tangent map `S_♯` and `df` with `B` where present.
    pub fn with_tangent_field(&self) -> QuadratureVarifold {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.f = Some(a.s.flatten());
            a.df = a.b.clone();
        }
        out
    }

    /// Populate `f` and `df` from a closure evaluated per atom.
    pub fn with_field(&self, field: impl Fn(&Atom) -> (Vec<f64>, Vec<f64>)) -> QuadratureVarifold {
        let mut out = self.clone();
        for a in &mut out.atoms {
            let (f, df) = field(a);
            a.f = Some(f);
            a.df = Some(df);
        }
        out
    }

    /// Index and distance of the atom closest to `a`.
    pub fn nearest_atom(&self, a: &[f64]) -> Option<(usize, f64)> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, at)| (i, distance(&at.x, a)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
    }

    /// Discrete `a ∈ spt ‖V‖`: some atom within 1.5 of its cell diameter.
    pub fn support_contains(&self, a: &[f64]) -> bool {
        self.atoms
            .iter()
            .any(|at| distance(&at.x, a) <= 1.5 * at.cell)
    }

    /// Image under `x ↦ center + c (x - center)`.
    pub fn dilate(&self, center: &[f64], c: f64) -> QuadratureVarifold {
        let mut out = self.clone();
        let mf = self.m as f64;
        for a in &mut out.atoms {
            for (xi, ci) in a.x.iter_mut().zip(center) {
                *xi = ci + c * (*xi - ci);
            }
            a.w *= c.powf(mf);
            a.cell *= c;
            if let Some(h) = &mut a.h {
                h.iter_mut().for_each(|v| *v /= c);
            }
            if let Some(b) = &mut a.b {
                b.iter_mut().for_each(|v| *v /= c);
            }
            if let Some(df) = &mut a.df {
                df.iter_mut().for_each(|v| *v /= c);
            }
        }
        out.scene.cell_sizes.iter_mut().for_each(|h| *h *= c);
        out.scene.notes.push(format!("dilate by {c}"));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: QuadratureVarifold = serde_json::from_str(s)?;
        let checked = QuadratureVarifold::new(v.n, v.m, v.atoms)?;
        Ok(QuadratureVarifold {
            scene: v.scene,
            ..checked
        })
    }

    /// Union of atom lists (same dimensions).
    pub fn union(&self, other: &QuadratureVarifold) -> Result<QuadratureVarifold> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        Ok(out)
    }
}

/// Maximum pairwise Euclidean distance after removing duplicate values.
pub fn diameter_of(values: &[Vec<f64>]) -> DiameterEstimate {
    let unique = dedupe(values);
    let count = unique.len();
    if count <= 1 {
        return DiameterEstimate {
            value: 0.0,
            exact: true,
            distinct_values: count,
        };
    }
    if count > EXACT_DIAMETER_LIMIT {
        let far = unique
            .iter()
            .map(|v| distance(v, &unique[0]))
            .fold(0.0, f64::max);
        return DiameterEstimate {
            value: 2.0 * far,
            exact: false,
            distinct_values: count,
        };
    }
    let mut best = 0.0f64;
    for i in 0..count {
        for j in i + 1..count {
            best = best.max(distance(&unique[i], &unique[j]));
        }
    }
    DiameterEstimate {
        value: best,
        exact: true,
        distinct_values: count,
    }
}

/// Distinct values by bit pattern, in first-seen order.
pub fn dedupe(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::new();
    for v in values {
        let key: Vec<u64> = v.iter().map(|x| (x + 0.0).to_bits()).collect();
        if seen.insert(key) {
            out.push(v.clone());
        }
    }
    out
}

/// `mass`.
pub fn mass(v: &QuadratureVarifold, region: &Region) -> f64 {
    v.mass(region)
}

/// `lq_seminorm`.
pub fn lq_seminorm(v: &QuadratureVarifold, region: &Region, field: Field, q: f64) -> Result<f64> {
    v.lq_seminorm(region, field, q)
}

/// `first_variation_check`.
pub fn first_variation_check(v: &QuadratureVarifold, g: &dyn TestField) -> Result<FirstVariation> {
    v.first_variation_check(g)
}

/// `restrict`.
pub fn restrict(v: &QuadratureVarifold, label: &str, pred: impl Fn(&Atom) -> bool) -> QuadratureVarifold {
    v.restrict(label, pred)
}

/// `support_diameter`.
pub fn support_diameter(v: &QuadratureVarifold, selector: ValueSelector) -> Result<f64> {
    v.support_diameter(selector)
}

#[cfg(test)]
mod tests {
    use super::scene::tests::{circle, line, lines};
    use super::testfield::{Constant, Cutoff, Position, Quadratic};
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn everything() -> Region {
        Region::Everything
    }

    #[test]
    fn mass_examples() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 1000);
        assert!((l.total_mass() - 2.0).abs() < 1e-9);
        let half = Region::closed_ball(&[0.0, 0.0], 0.5).unwrap();
        assert!((l.mass(&half) - 1.0).abs() < 1e-9);
        let c = circle(1.0, 4096);
        let big = Region::closed_ball(&[0.0, 0.0], 2.0).unwrap();
        assert!((c.mass(&big) - 2.0 * PI).abs() < 1e-6);
        let far = Region::open_ball(&[10.0, 10.0], 1.0).unwrap();
        assert_eq!(c.mass(&far), 0.0);
    }

    #[test]
    fn seminorm_examples() {
        let c = circle(1.0, 4096);
        let l2 = c.lq_seminorm(&everything(), Field::H, 2.0).unwrap();
        assert!((l2 - (2.0 * PI).sqrt()).abs() < 1e-5);
        let l1 = c.lq_seminorm(&everything(), Field::H, 1.0).unwrap();
        assert!((l1 - 2.0 * PI).abs() < 1e-5);
        let l = line(&[0.0, 0.0], 0.3, 1.0, 64);
        assert_eq!(l.lq_seminorm(&everything(), Field::H, 3.0).unwrap(), 0.0);
        let mut bare = l.clone();
        bare.atoms[5].h = None;
        assert_eq!(
            bare.lq_seminorm(&everything(), Field::H, 2.0).unwrap_err(),
            Error::MissingField { field: "H", atom: 5 }
        );
        assert!(bare.lq_seminorm(&everything(), Field::H, 0.5).is_err());
    }

    #[test]
    fn first_variation_examples() {
        let c = circle(1.0, 4096);
        let fv = c
            .first_variation_check(&Position { origin: vec![0.0, 0.0] })
            .unwrap();
        assert!((fv.lhs - 2.0 * PI).abs() < 1e-5);
        assert!((fv.rhs - 2.0 * PI).abs() < 1e-5);
        assert!(fv.gap < 1e-5);
        let fv = c.first_variation_check(&Constant(vec![0.3, -1.0])).unwrap();
        assert!(fv.lhs.abs() < 1e-5 && fv.rhs.abs() < 1e-5);
        // line of half-length 3 so the boundary lies outside the cutoff support
        let l = line(&[0.0, 0.0], 0.0, 3.0, 3000);
        let g = Cutoff::new(Position { origin: vec![0.0, 0.0] }, &[0.0, 0.0], 1.0, 2.0);
        let fv = l.first_variation_check(&g).unwrap();
        assert!(fv.gap < 1e-6, "{fv:?}");
    }

    #[test]
    fn restrict_examples() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 1000);
        let r = l.restrict_region(&Region::open_ball(&[0.0, 0.0], 0.5).unwrap());
        assert!((r.total_mass() - 1.0).abs() < 1e-9);
        assert_eq!(l.restrict("all", |_| true).atoms, l.atoms);
        let two = lines(&[0.0, PI / 2.0], 1.0, 100);
        let x_axis = Plane::line_2d(0.0);
        let r = two.restrict("x-axis", |a| a.s.distance(&x_axis).unwrap() < 0.1);
        assert_eq!(r.len(), 100);
        assert!(r.atoms.iter().all(|a| a.x[1] == 0.0));
        let e = l.restrict("none", |_| false);
        assert!(e.is_empty() && e.reject_empty("x").is_err());
    }

    #[test]
    fn support_diameter_examples() {
        let l = line(&[0.0, 0.0], 0.2, 1.0, 50);
        assert_eq!(l.support_diameter(ValueSelector::S).unwrap(), 0.0);
        let two = lines(&[0.0, PI / 2.0], 1.0, 50);
        let d = two.support_diameter(ValueSelector::S).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        let parallel = line(&[0.0, 0.0], 0.0, 1.0, 50)
            .union(&line(&[0.0, 0.5], 0.0, 1.0, 50))
            .unwrap();
        assert_eq!(parallel.support_diameter(ValueSelector::S).unwrap(), 0.0);
        assert!(l.support_diameter(ValueSelector::F).is_err());
    }

    #[test]
    fn tangent_map_distances() {
        let c = circle(1.0, 64).with_tangent_field();
        let f0 = c.atoms[0].f.clone().unwrap();
        let f32 = c.atoms[32].f.clone().unwrap();
        // antipodal tangents are parallel
        assert!(distance(&f0, &f32) < 1e-12);
        let f16 = c.atoms[16].f.clone().unwrap();
        assert!((distance(&f0, &f16) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let c = circle(1.0, 16);
        let back = QuadratureVarifold::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.len(), c.len());
        assert!((back.total_mass() - c.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn midpoint_refinement_converges() {
        let mut previous = f64::INFINITY;
        for res in [16usize, 32, 64, 128] {
            let c = circle(1.0, res);
            // weights are exact arc lengths; the midpoint error shows in the
            // position-field pairing
            let fv = c
                .first_variation_check(&Position { origin: vec![0.0, 0.0] })
                .unwrap();
            let err = (c.total_mass() - 2.0 * PI).abs() + fv.gap;
            assert!(err <= previous / 2.0 || err < 1e-12, "{res}: {err} vs {previous}");
            previous = err;
        }
    }

    proptest! {
        #[test]
        fn mass_is_additive(cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.05f64..2.0) {
            let c = circle(1.0, 256);
            let region = Region::closed_ball(&[cx, cy], r).unwrap();
            let restricted = c.restrict_region(&region);
            prop_assert_eq!(c.mass(&region), restricted.mass(&Region::Everything));
        }

        #[test]
        fn stationary_polynomial_fields(
            c in proptest::collection::vec(-1.0f64..1.0, 2),
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 8),
            angle in 0.0f64..std::f64::consts::PI,
        ) {
            let l = line(&[0.0, 0.0], angle, 3.0, 600);
            let g = Quadratic::new(
                DVector::from_vec(c),
                DMatrix::from_row_slice(2, 2, &a),
                vec![DMatrix::from_row_slice(2, 2, &b[..4]), DMatrix::from_row_slice(2, 2, &b[4..])],
            );
            let g = Cutoff::new(g, &[0.0, 0.0], 1.0, 2.5);
            let fv = l.first_variation_check(&g).unwrap();
            prop_assert!(fv.gap <= 1e-6, "{:?}", fv);
        }

        #[test]
        fn trace_identity_on_circles(r in 0.2f64..3.0) {
            let c = circle(r, 64);
            for a in &c.atoms {
                let tr = a.trace_contraction().unwrap();
                prop_assert!(distance(a.h.as_ref().unwrap(), &tr) <= 1e-8);
            }
        }
    }
}
