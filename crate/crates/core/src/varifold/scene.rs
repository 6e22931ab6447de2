//! Analytic scenes and their midpoint quadrature.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Atom, QuadratureVarifold, SceneRecord};
use crate::error::{Error, Result};
use crate::geometry::Plane;

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n: usize,
    pub m: usize,
    pub primitives: Vec<Primitive>,
}

fn one() -> u32 {
    1
}

fn unit() -> f64 {
    1.0
}

fn full_turn() -> f64 {
    2.0 * PI
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default = "one")]
    pub multiplicity: u32,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Disk of radius `extent` in the affine plane `center + span(basis)`.
    PlanePatch {
        basis: Vec<Vec<f64>>,
        center: Vec<f64>,
        extent: f64,
    },
    Segment {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    CircleArc {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        start: f64,
        #[serde(default = "full_turn")]
        end: f64,
    },
    /// `{(x, f(x)) : x ∈ interval}` in the first two coordinates.
    GraphCurve {
        function: GraphFn,
        interval: [f64; 2],
    },
    /// Lines through `center` with the given angles, clipped to `B(center, radius)`.
    LineFan {
        angles: Vec<f64>,
        #[serde(default = "unit")]
        radius: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
    /// Alternating half-sine arches between consecutive zeros, amplitude
    /// `amplitude · width`.
    SineZeros {
        zeros: Vec<f64>,
        #[serde(default = "half")]
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GraphFn {
    Affine { slope: f64, intercept: f64 },
    /// `c x²`
    Quadratic { c: f64 },
    /// `c |x|^p`
    AbsPower { c: f64, p: f64 },
}

impl GraphFn {
    /// `(f, f', f'')`
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            GraphFn::Affine { slope, intercept } => (slope * x + intercept, slope, 0.0),
            GraphFn::Quadratic { c } => (c * x * x, 2.0 * c * x, 2.0 * c),
            GraphFn::AbsPower { c, p } => {
                let a = x.abs();
                let s = x.signum();
                let d2 = if a == 0.0 && p < 2.0 {
                    f64::INFINITY
                } else {
                    c * p * (p - 1.0) * a.powf(p - 2.0)
                };
                (c * a.powf(p), c * p * a.powf(p - 1.0) * s, d2)
            }
        }
    }
}

impl Primitive {
    pub fn new(shape: Shape, resolution: usize) -> Self {
        Primitive {
            shape,
            multiplicity: 1,
            resolution,
        }
    }

    pub fn with_multiplicity(mut self, k: u32) -> Self {
        self.multiplicity = k;
        self
    }

    /// Segment of half-length `extent` through `center` at `angle` in `R^2`.
    pub fn line_2d(center: [f64; 2], angle: f64, extent: f64, resolution: usize) -> Self {
        let (s, c) = angle.sin_cos();
        Primitive::new(
            Shape::PlanePatch {
                basis: vec![vec![c, s]],
                center: center.to_vec(),
                extent,
            },
            resolution,
        )
    }

    pub fn circle(center: [f64; 2], radius: f64, resolution: usize) -> Self {
        Primitive::new(
            Shape::CircleArc {
                center,
                radius,
                start: 0.0,
                end: 2.0 * PI,
            },
            resolution,
        )
    }

    pub fn graph(function: GraphFn, a: f64, b: f64, resolution: usize) -> Self {
        Primitive::new(
            Shape::GraphCurve {
                function,
                interval: [a, b],
            },
            resolution,
        )
    }
}

impl SceneSpec {
    pub fn new(n: usize, m: usize, primitives: Vec<Primitive>) -> Self {
        SceneSpec { n, m, primitives }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidScene(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidScene(format!(
                "need 1 <= m <= n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if self.primitives.is_empty() {
            return Err(Error::InvalidScene("no primitives".into()));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            if p.multiplicity == 0 {
                return Err(Error::InvalidScene(format!("primitive {i}: multiplicity must be >= 1")));
            }
            if p.resolution < MIN_RESOLUTION {
                return Err(Error::InvalidScene(format!(
                    "primitive {i}: resolution {} < {MIN_RESOLUTION}",
                    p.resolution
                )));
            }
            let curve = !matches!(p.shape, Shape::PlanePatch { .. } | Shape::Segment { .. });
            if curve && (self.m != 1 || self.n < 2) {
                return Err(Error::InvalidScene(format!(
                    "primitive {i}: curves need m = 1 and n >= 2"
                )));
            }
        }
        Ok(())
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS5.iter().map(|(t, w)| w * f(mid + half * t)).sum::<f64>() * half
}

fn embed(n: usize, xy: [f64; 2]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = xy[0];
    v[1] = xy[1];
    v
}

/// Atom on a curve with unit tangent `t` and curvature vector `k = dt/ds`.
fn curve_atom(n: usize, x: Vec<f64>, t: [f64; 2], k: [f64; 2], w: f64, cell: f64) -> Result<Atom> {
    let tv = embed(n, t);
    let kv = embed(n, k);
    let s = Plane::from_basis(&[tv.clone()])?;
    let mut b = vec![0.0; n * n * n];
    for kk in 0..n {
        if tv[kk] == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                b[kk * n * n + i * n + j] = tv[kk] * (kv[i] * tv[j] + tv[i] * kv[j]);
            }
        }
    }
    let mut atom = Atom::new(x, s, w, cell);
    atom.h = Some(kv);
    atom.b = Some(b);
    Ok(atom)
}

fn flat_atom(plane: &Plane, x: Vec<f64>, w: f64, cell: f64) -> Atom {
    let n = x.len();
    let mut atom = Atom::new(x, plane.clone(), w, cell);
    atom.h = Some(vec![0.0; n]);
    atom.b = Some(vec![0.0; n * n * n]);
    atom
}

fn segment_atoms(plane: &Plane, start: &[f64], dir: &[f64], length: f64, res: usize) -> Vec<Atom> {
    let h = length / res as f64;
    (0..res)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            let x = start.iter().zip(dir).map(|(s, d)| s + t * d).collect();
            flat_atom(plane, x, h, h)
        })
        .collect()
}

fn zero_measure(i: usize, what: &str) -> Error {
    Error::InvalidScene(format!("primitive {i}: zero-measure {what}"))
}

fn check_len(i: usize, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidScene(format!(
            "primitive {i}: expected a point of R^{n}, got length {}",
            v.len()
        )));
    }
    Ok(())
}

fn build_primitive(spec: &SceneSpec, i: usize, p: &Primitive) -> Result<(Vec<Atom>, f64)> {
    let n = spec.n;
    let res = p.resolution;
    let mut cell = 0.0f64;
    let atoms = match &p.shape {
        Shape::PlanePatch {
            basis,
            center,
            extent,
        } => {
            check_len(i, center, n)?;
            if basis.len() != spec.m {
                return Err(Error::InvalidScene(format!(
                    "primitive {i}: basis has {} vectors, scene m = {}",
                    basis.len(),
                    spec.m
                )));
            }
            if !(*extent > 0.0) {
                return Err(zero_measure(i, "plane patch"));
            }
            let plane = Plane::from_basis(basis)?;
            let (frame, _) = plane.frame();
            match spec.m {
                1 => {
                    let d = &frame[0];
                    let start: Vec<f64> = center.iter().zip(d).map(|(c, u)| c - extent * u).collect();
                    cell = 2.0 * extent / res as f64;
                    segment_atoms(&plane, &start, d, 2.0 * extent, res)
                }
                2 => {
                    let dr = extent / res as f64;
                    let sectors = 4 * res;
                    let dt = 2.0 * PI / sectors as f64;
                    let mut atoms = Vec::with_capacity(res * sectors);
                    for ring in 0..res {
                        let r1 = ring as f64 * dr;
                        let r2 = r1 + dr;
                        let area = 0.5 * (r2 * r2 - r1 * r1) * dt;
                        let rm = 0.5 * (r1 + r2);
                        let diam = dr.max(r2 * dt);
                        cell = cell.max(diam);
                        for k in 0..sectors {
                            let th = (k as f64 + 0.5) * dt;
                            let (s, c) = th.sin_cos();
                            let x = (0..n)
                                .map(|j| center[j] + rm * (c * frame[0][j] + s * frame[1][j]))
                                .collect();
                            atoms.push(flat_atom(&plane, x, area, diam));
                        }
                    }
                    atoms
                }
                m => {
                    return Err(Error::InvalidScene(format!(
                        "primitive {i}: plane patches of dimension {m} are not supported"
                    )))
                }
            }
        }
        Shape::Segment { start, end } => {
            check_len(i, start, n)?;
            check_len(i, end, n)?;
            if spec.m != 1 {
                return Err(Error::InvalidScene(format!("primitive {i}: segments need m = 1")));
            }
            let d: Vec<f64> = end.iter().zip(start).map(|(a, b)| a - b).collect();
            let len = crate::geometry::norm(&d);
            if !(len > 0.0) {
                return Err(zero_measure(i, "segment"));
            }
            let dir: Vec<f64> = d.iter().map(|v| v / len).collect();
            let plane = Plane::from_basis(&[dir.clone()])?;
            cell = len / res as f64;
            segment_atoms(&plane, start, &dir, len, res)
        }
        Shape::CircleArc {
            center,
            radius,
            start,
            end,
        } => {
            if !(*radius > 0.0) || !(end > start) {
                return Err(zero_measure(i, "circle arc"));
            }
            let dt = (end - start) / res as f64;
            cell = radius * dt;
            (0..res)
                .map(|k| {
                    let th = start + (k as f64 + 0.5) * dt;
                    let (s, c) = th.sin_cos();
                    let x = embed(n, [center[0] + radius * c, center[1] + radius * s]);
                    curve_atom(n, x, [-s, c], [-c / radius, -s / radius], radius * dt, radius * dt)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Shape::GraphCurve { function, interval } => {
            let [a, b] = *interval;
            if !(b > a) {
                return Err(zero_measure(i, "graph interval"));
            }
            let h = (b - a) / res as f64;
            (0..res)
                .map(|k| {
                    let x0 = a + k as f64 * h;
                    let x1 = x0 + h;
                    let xm = 0.5 * (x0 + x1);
                    let len = gauss(x0, x1, |x| {
                        let d = function.eval(x).1;
                        (1.0 + d * d).sqrt()
                    });
                    cell = cell.max(len);
                    let (y, d1, d2) = function.eval(xm);
                    graph_atom(n, xm, y, d1, d2, len)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Shape::LineFan {
            angles,
            radius,
            center,
        } => {
            if angles.is_empty() || !(*radius > 0.0) {
                return Err(zero_measure(i, "line fan"));
            }
            let c = center.unwrap_or([0.0, 0.0]);
            cell = 2.0 * radius / res as f64;
            let mut atoms = Vec::with_capacity(angles.len() * res);
            for &angle in angles {
                let (s, co) = angle.sin_cos();
                let dir = embed(n, [co, s]);
                let plane = Plane::from_basis(&[dir.clone()])?;
                let start = embed(n, [c[0] - radius * co, c[1] - radius * s]);
                atoms.extend(segment_atoms(&plane, &start, &dir, 2.0 * radius, res));
            }
            atoms
        }
        Shape::SineZeros { zeros, amplitude } => {
            if zeros.len() < 2 {
                return Err(zero_measure(i, "sine scene"));
            }
            if zeros.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::OverlappingArches(format!(
                    "primitive {i}: zeros must be strictly increasing"
                )));
            }
            let mut atoms = Vec::with_capacity((zeros.len() - 1) * res);
            for (k, w) in zeros.windows(2).enumerate() {
                let (z0, z1) = (w[0], w[1]);
                let width = z1 - z0;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let amp = sign * amplitude * width;
                let om = PI / width;
                let eval = |x: f64| {
                    let (s, c) = (om * (x - z0)).sin_cos();
                    (amp * s, amp * om * c, -amp * om * om * s)
                };
                let h = width / res as f64;
                for j in 0..res {
                    let x0 = z0 + j as f64 * h;
                    let x1 = x0 + h;
                    let xm = 0.5 * (x0 + x1);
                    let len = gauss(x0, x1, |x| {
                        let d = eval(x).1;
                        (1.0 + d * d).sqrt()
                    });
                    cell = cell.max(len);
                    let (y, d1, d2) = eval(xm);
                    atoms.push(graph_atom(n, xm, y, d1, d2, len)?);
                }
            }
            atoms
        }
    };
    Ok((atoms, cell))
}

fn graph_atom(n: usize, x: f64, y: f64, d1: f64, d2: f64, len: f64) -> Result<Atom> {
    let g = (1.0 + d1 * d1).sqrt();
    let t = [1.0 / g, d1 / g];
    let nu = [-d1 / g, 1.0 / g];
    let kappa = d2 / (g * g * g);
    curve_atom(n, embed(n, [x, y]), t, [kappa * nu[0], kappa * nu[1]], len, len)
}

/// Quadrature varifold of an analytic scene.
pub fn build_scene(spec: &SceneSpec) -> Result<QuadratureVarifold> {
    spec.validate()?;
    let mut atoms = Vec::new();
    let mut record = SceneRecord {
        spec: Some(spec.clone()),
        ..SceneRecord::default()
    };
    for (i, p) in spec.primitives.iter().enumerate() {
        let (prim_atoms, cell) = build_primitive(spec, i, p)?;
        let k = p.multiplicity as f64;
        atoms.extend(prim_atoms.into_iter().map(|mut a| {
            a.w *= k;
            a.tag = i;
            a
        }));
        record.multiplicities.push(p.multiplicity);
        record.cell_sizes.push(cell);
    }
    let mut v = QuadratureVarifold::new(spec.n, spec.m, atoms)?;
    v.scene = record;
    Ok(v)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::varifold::Field;

    pub(crate) fn line(center: &[f64], angle: f64, extent: f64, res: usize) -> QuadratureVarifold {
        build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::line_2d([center[0], center[1]], angle, extent, res)],
        ))
        .unwrap()
    }

    pub(crate) fn circle(radius: f64, res: usize) -> QuadratureVarifold {
        build_scene(&SceneSpec::new(2, 1, vec![Primitive::circle([0.0, 0.0], radius, res)])).unwrap()
    }

    pub(crate) fn lines(angles: &[f64], radius: f64, res: usize) -> QuadratureVarifold {
        build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::new(
                Shape::LineFan {
                    angles: angles.to_vec(),
                    radius,
                    center: None,
                },
                res,
            )],
        ))
        .unwrap()
    }

    #[test]
    fn build_examples() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 1000);
        assert!((l.total_mass() - 2.0).abs() < 1e-9);
        let c = circle(1.0, 4096);
        assert!((c.total_mass() - 2.0 * PI).abs() < 1e-6);
        for a in &c.atoms {
            assert!((crate::geometry::norm(a.h.as_ref().unwrap()) - 1.0).abs() < 1e-9);
        }
        let fan = lines(&[0.0, 1.0, 2.0], 1.0, 100);
        assert!((fan.total_mass() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn disk_patch_mass_is_exact_on_rings() {
        let spec = SceneSpec::new(
            3,
            2,
            vec![Primitive::new(
                Shape::PlanePatch {
                    basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                    center: vec![0.0, 0.0, 0.0],
                    extent: 1.0,
                },
                16,
            )],
        );
        let v = build_scene(&spec).unwrap();
        assert!((v.total_mass() - PI).abs() < 1e-12);
        let ball = Region::closed_ball(&[0.0; 3], 0.5).unwrap();
        assert!((v.mass(&ball) - PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn multiplicity_scales_weights() {
        let spec = SceneSpec::new(
            2,
            1,
            vec![Primitive::line_2d([0.0, 0.0], 0.0, 1.0, 10).with_multiplicity(3)],
        );
        let v = build_scene(&spec).unwrap();
        assert!((v.total_mass() - 6.0).abs() < 1e-12);
        assert_eq!(v.scene.multiplicities, vec![3]);
    }

    #[test]
    fn graph_curve_arclength() {
        let v = build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::graph(GraphFn::Affine { slope: 0.5, intercept: 0.0 }, -1.0, 1.0, 10)],
        ))
        .unwrap();
        assert!((v.total_mass() - 2.0 * 1.25f64.sqrt()).abs() < 1e-12);
        let v = build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::graph(GraphFn::Quadratic { c: 1.0 }, 0.0, 1.0, 64)],
        ))
        .unwrap();
        // arclength of y = x² on [0,1]
        let exact = 0.5 * 5f64.sqrt() + 0.25 * (2.0 + 5f64.sqrt()).ln();
        assert!((v.total_mass() - exact).abs() < 1e-10);
        for a in &v.atoms {
            let tr = a.trace_contraction().unwrap();
            assert!(crate::geometry::distance(&tr, a.h.as_ref().unwrap()) < 1e-12);
        }
    }

    #[test]
    fn sine_arch_curvature_grows_as_width_shrinks() {
        let norm_for = |w: f64| {
            let v = build_scene(&SceneSpec::new(
                2,
                1,
                vec![Primitive::new(
                    Shape::SineZeros {
                        zeros: vec![0.0, w],
                        amplitude: 0.5,
                    },
                    256,
                )],
            ))
            .unwrap();
            v.lq_seminorm(&Region::Everything, Field::B, 2.0).unwrap()
        };
        let a = norm_for(0.5);
        let b = norm_for(0.25);
        // ∫|B|^2 scales like 1/w
        assert!(((b / a).powi(2) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_specs() {
        let bad_res = SceneSpec::new(2, 1, vec![Primitive::line_2d([0.0, 0.0], 0.0, 1.0, 4)]);
        assert!(build_scene(&bad_res).is_err());
        let zero = SceneSpec::new(2, 1, vec![Primitive::line_2d([0.0, 0.0], 0.0, 0.0, 10)]);
        assert!(matches!(build_scene(&zero), Err(Error::InvalidScene(_))));
        let unknown = r#"{"n":2,"m":1,"primitives":[{"kind":"torus","resolution":10}]}"#;
        let err = SceneSpec::from_json(unknown).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let overlapping = SceneSpec::new(
            2,
            1,
            vec![Primitive::new(
                Shape::SineZeros {
                    zeros: vec![0.0, 0.5, 0.5],
                    amplitude: 0.5,
                },
                16,
            )],
        );
        assert!(matches!(build_scene(&overlapping), Err(Error::OverlappingArches(_))));
    }

    #[test]
    fn json_schema() {
        let text = r#"{"n":2,"m":1,"primitives":[
            {"kind":"plane-patch","basis":[[1,0]],"center":[0,0],"extent":1,"resolution":100},
            {"kind":"circle-arc","center":[0,0],"radius":1,"resolution":64,"multiplicity":2},
            {"kind":"graph-curve","function":{"type":"abs-power","c":0.3,"p":1.5},"interval":[-1,1],"resolution":64}
        ]}"#;
        let spec = SceneSpec::from_json(text).unwrap();
        let v = build_scene(&spec).unwrap();
        assert_eq!(v.len(), 228);
        let again: SceneSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }
}
