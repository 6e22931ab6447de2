//! Density ratios, the tilt integral `G_V(s, r)`, and certified checks of
//! the two-sided monotonicity inequalities and the mass lemmas built on them.
//!
//! The smallness functional is `r^μ (∫_{B̄(a,r)} |H|^q d‖V‖)^{1/q}`.

use serde::{Deserialize, Serialize};

use crate::constants::{mu_lambda, ConstantsTable};
use crate::error::{Error, Result};
use crate::geometry::{distance, norm, unit_ball_volume, Region};
use crate::report::{CheckRecord, Report};
use crate::varifold::{Field, QuadratureVarifold};

/// Default number of radii in a logarithmic grid.
pub const DEFAULT_GRID_POINTS: usize = 20;

/// Atoms sorted by distance from a center, with prefix sums of weight and
/// tilt terms `w |x-a|^{-m-2} |S^⊥(x-a)|²`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub center: Vec<f64>,
    pub m: usize,
    dist: Vec<f64>,
    cum_w: Vec<f64>,
    cum_tilt: Vec<f64>,
    /// Weight of atoms exactly at the center.
    pub center_weight: f64,
}

impl RadialProfile {
    pub fn new(v: &QuadratureVarifold, a: &[f64]) -> Result<Self> {
        if a.len() != v.n {
            return Err(Error::DimensionMismatch {
                expected: v.n,
                found: a.len(),
            });
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(v.len());
        let mut center_weight = 0.0;
        for at in &v.atoms {
            let d = distance(&at.x, a);
            let tilt = if d > 0.0 {
                let diff: Vec<f64> = at.x.iter().zip(a).map(|(x, c)| x - c).collect();
                let perp = norm(&at.s.project_perp(&diff));
                at.w * perp * perp / d.powi(v.m as i32 + 2)
            } else {
                center_weight += at.w;
                0.0
            };
            rows.push((d, at.w, tilt));
        }
        rows.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut cum_w = Vec::with_capacity(rows.len() + 1);
        let mut cum_tilt = Vec::with_capacity(rows.len() + 1);
        cum_w.push(0.0);
        cum_tilt.push(0.0);
        let (mut sw, mut st) = (0.0, 0.0);
        for r in &rows {
            sw += r.1;
            st += r.2;
            cum_w.push(sw);
            cum_tilt.push(st);
        }
        Ok(RadialProfile {
            center: a.to_vec(),
            m: v.m,
            dist: rows.iter().map(|r| r.0).collect(),
            cum_w,
            cum_tilt,
            center_weight,
        })
    }

    /// Number of atoms with distance `<= s`.
    fn count_le(&self, s: f64) -> usize {
        self.dist.partition_point(|&d| d <= s)
    }

    fn count_lt(&self, s: f64) -> usize {
        self.dist.partition_point(|&d| d < s)
    }

    /// `‖V‖(B̄(a, s))`
    pub fn mass_closed(&self, s: f64) -> f64 {
        self.cum_w[self.count_le(s)]
    }

    /// `‖V‖(B(a, s))`
    pub fn mass_open(&self, s: f64) -> f64 {
        self.cum_w[self.count_lt(s)]
    }

    /// `G_V(s, t)`: atoms with `s < |x-a| <= t`.
    pub fn tilt(&self, s: f64, t: f64) -> f64 {
        self.cum_tilt[self.count_le(t)] - self.cum_tilt[self.count_le(s)]
    }

    pub fn ratio(&self, s: f64) -> f64 {
        self.mass_closed(s) / s.powi(self.m as i32)
    }

    /// Distinct atom distances (relative tolerance `1e-12`).
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &d in &self.dist {
            match out.last() {
                Some(&last) if d - last <= 1e-12 * d.max(1e-300) => {}
                _ => out.push(d),
            }
        }
        out
    }

    /// Replace `s` by the midpoint of the gap between consecutive atom
    /// distances containing it.
    pub fn snap(&self, s: f64, distinct: &[f64]) -> f64 {
        let k = distinct.partition_point(|&d| d <= s);
        if k == 0 || k == distinct.len() {
            return s;
        }
        0.5 * (distinct[k - 1] + distinct[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub points: usize,
    /// Smallest radius; defaults to `max(r/1000, 16 cells)`.
    pub r_min: Option<f64>,
    /// Move interior radii to gap midpoints between atom distances.
    pub snap: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            points: DEFAULT_GRID_POINTS,
            r_min: None,
            snap: true,
        }
    }
}

/// Strictly increasing logarithmic grid ending at `r`.
pub fn radius_grid(profile: &RadialProfile, r: f64, cell: f64, opts: &GridOptions) -> Vec<f64> {
    let points = opts.points.max(2);
    let mut lo = opts.r_min.unwrap_or_else(|| (r / 1000.0).max(16.0 * cell));
    if !(lo < r) {
        lo = 0.5 * r;
    }
    let distinct = if opts.snap {
        profile.distinct_distances()
    } else {
        Vec::new()
    };
    let ratio = (r / lo).ln();
    let mut grid: Vec<f64> = Vec::with_capacity(points);
    for j in 0..points {
        let s = if j + 1 == points {
            r
        } else {
            let raw = lo * (ratio * j as f64 / (points - 1) as f64).exp();
            if opts.snap {
                profile.snap(raw, &distinct)
            } else {
                raw
            }
        };
        if s > 0.0 && s <= r && grid.last().map_or(true, |&p| s > p) {
            grid.push(s);
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    pub ratio: f64,
    pub normalized: f64,
}

/// `r^{-m} ‖V‖(B̄(a, r))`, also divided by `ω_m`.
pub fn density_ratio(v: &QuadratureVarifold, a: &[f64], r: f64) -> Result<DensityRatio> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("must be positive, got {r}"),
        });
    }
    v.reject_empty("density ratio")?;
    let ball = Region::closed_ball(a, r)?;
    let ratio = v.mass(&ball) / r.powi(v.m as i32);
    Ok(DensityRatio {
        ratio,
        normalized: ratio / unit_ball_volume(v.m),
    })
}

/// `G_V(s, r) = Σ_{s < |x-a| <= r} w |x-a|^{-m-2} |S^⊥(x-a)|²`.
pub fn tilt_integral(v: &QuadratureVarifold, a: &[f64], s: f64, r: f64) -> Result<f64> {
    if !(s >= 0.0 && s < r) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("need 0 <= s < r, got s = {s}, r = {r}"),
        });
    }
    let mut sum = 0.0;
    for (i, at) in v.atoms.iter().enumerate() {
        let d = distance(&at.x, a);
        if d == 0.0 && s == 0.0 {
            return Err(Error::SingularAtCenter(i));
        }
        if d > s && d <= r {
            let diff: Vec<f64> = at.x.iter().zip(a).map(|(x, c)| x - c).collect();
            let perp = norm(&at.s.project_perp(&diff));
            sum += at.w * perp * perp / d.powi(v.m as i32 + 2);
        }
    }
    Ok(sum)
}

/// `r^μ ‖H‖_{L^q(‖V‖ ⌞ B̄(a,r))}`.
pub fn smallness(v: &QuadratureVarifold, a: &[f64], r: f64, q: f64) -> Result<f64> {
    let (mu, _) = mu_lambda(v.m, q)?;
    let ball = Region::closed_ball(a, r)?;
    Ok(r.powf(mu) * v.lq_seminorm(&ball, Field::H, q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityOptions {
    pub grid: GridOptions,
    /// Allowed violation of either inequality.
    pub tolerance: f64,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions {
            grid: GridOptions::default(),
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub center: Vec<f64>,
    pub r: f64,
    pub q: f64,
    pub delta: f64,
    pub mu: f64,
    pub lambda_const: f64,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `G(s_j, r)`
    pub tilts: Vec<f64>,
    /// Largest violation of the upper inequality over pairs `s < t`.
    pub residual_upper: f64,
    /// Largest violation of the lower inequality over pairs `s < t`.
    pub residual_lower: f64,
    pub residual: f64,
    /// Largest `|lhs - rhs|` over both inequalities and all pairs.
    pub equality_gap: f64,
    pub smallness: f64,
    pub report: Report,
    pub pass: bool,
}

impl MonotonicityReport {
    /// `(s, ratio, tilt)` series.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,ratio,tilt\n");
        for ((s, r), g) in self.radii.iter().zip(&self.ratios).zip(&self.tilts) {
            out.push_str(&format!("{s:.17e},{r:.17e},{g:.17e}\n"));
        }
        out
    }
}

/// Certify both monotonicity inequalities on a radius grid.
pub fn check_monotonicity(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    q: f64,
    delta: f64,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    v.reject_empty("monotonicity check")?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("must be positive, got {r}"),
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be nonnegative, got {delta}"),
        });
    }
    let (mu, lambda) = mu_lambda(v.m, q)?;
    let small = smallness(v, a, r, q)?;
    let profile = RadialProfile::new(v, a)?;
    let mut report = Report::new();
    report.premise(CheckRecord::le("Lambda delta <= 1", lambda * delta, 1.0, 0.0));
    report.premise(
        CheckRecord::flag("a in spt |V|", v.support_contains(a))
            .with_detail("some atom within 1.5 cell diameters of a"),
    );
    report.premise(CheckRecord::le(
        "r^mu |H|_q <= delta",
        small,
        delta,
        1e-12 * delta.max(1.0),
    ));
    report.premise(CheckRecord::flag(
        "density >= 1 (scene multiplicities)",
        v.scene.multiplicities.iter().all(|&k| k >= 1),
    ));

    let radii = radius_grid(&profile, r, v.cell_size(), &opts.grid);
    let ratios: Vec<f64> = radii.iter().map(|&s| profile.ratio(s)).collect();
    let tilts: Vec<f64> = radii.iter().map(|&s| profile.tilt(s, r)).collect();
    let weight = |s: f64, sign: f64| (sign * lambda * delta * (s / r).powf(mu)).exp();
    let (mut up, mut low, mut gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            let (s, t) = (radii[i], radii[j]);
            let g = profile.tilt(s, t);
            let lhs1 = weight(s, 1.0) * ratios[i];
            let rhs1 = weight(t, 1.0) * ratios[j] - g;
            let lhs2 = weight(s, -1.0) * ratios[i];
            let rhs2 = weight(t, -1.0) * ratios[j] - g;
            up = up.max(lhs1 - rhs1);
            low = low.max(rhs2 - lhs2);
            gap = gap.max((lhs1 - rhs1).abs()).max((lhs2 - rhs2).abs());
        }
    }
    let residual_upper = up.max(0.0);
    let residual_lower = low.max(0.0);
    let residual = residual_upper.max(residual_lower);
    report.conclusion(CheckRecord::le(
        "upper inequality residual",
        residual_upper,
        0.0,
        opts.tolerance,
    ));
    report.conclusion(CheckRecord::le(
        "lower inequality residual",
        residual_lower,
        0.0,
        opts.tolerance,
    ));
    let pass = report.passed();
    Ok(MonotonicityReport {
        center: a.to_vec(),
        r,
        q,
        delta,
        mu,
        lambda_const: lambda,
        radii,
        ratios,
        tilts,
        residual_upper,
        residual_lower,
        residual,
        equality_gap: gap,
        smallness: small,
        report,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundResult {
    pub ratio: f64,
    pub bound: f64,
    pub margin: f64,
    pub report: Report,
}

/// `r^{-m} ‖W‖(B(a,r)) >= e^{-Λδ(1-γ)^μ} (1-γ)^m ω_m`.
#[allow(clippy::too_many_arguments)]
pub fn check_lower_bound_mass(
    v: &QuadratureVarifold,
    w: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    q: f64,
    delta: f64,
    gamma: f64,
    tolerance: f64,
) -> Result<LowerBoundResult> {
    v.reject_empty("lower bound mass")?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("must be positive, got {r}"),
        });
    }
    let (mu, lambda) = mu_lambda(v.m, q)?;
    let mf = v.m as f64;
    let mut report = Report::new();
    report.premise(CheckRecord::lt("Lambda delta < 1", lambda * delta, 1.0));
    report.premise(CheckRecord::flag("0 < gamma < 1", gamma > 0.0 && gamma < 1.0));
    let small = smallness(v, a, r, q)?;
    report.premise(CheckRecord::le("r^mu |H|_q <= delta", small, delta, 1e-12));
    let inner = Region::open_ball(a, gamma.max(f64::MIN_POSITIVE) * r)?;
    let meets = w.atoms.iter().any(|at| inner.contains(&at.x));
    report.premise(CheckRecord::flag("spt |W| meets B(a, gamma r)", meets));
    let ratio = w.mass(&Region::open_ball(a, r)?) / r.powf(mf);
    let bound = (-lambda * delta * (1.0 - gamma).powf(mu)).exp()
        * (1.0 - gamma).powf(mf)
        * unit_ball_volume(v.m);
    report.conclusion(CheckRecord::ge("lower mass bound", ratio, bound, tolerance));
    Ok(LowerBoundResult {
        ratio,
        bound,
        margin: ratio - bound,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSupport {
    pub index: usize,
    pub meets_half_ball: bool,
    pub nearest_distance: f64,
    pub contains_center: bool,
    pub small_scale_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSupportReport {
    pub components: Vec<ComponentSupport>,
    pub pi_prime: Vec<usize>,
    pub tilt_at_zero: f64,
    pub report: Report,
}

/// Center-support lemma on a partition `pi` of `V_r`.
pub fn check_center_support(
    v: &QuadratureVarifold,
    pi: &[QuadratureVarifold],
    a: &[f64],
    r: f64,
    q: f64,
    table: &ConstantsTable,
) -> Result<CenterSupportReport> {
    v.reject_empty("center support")?;
    let m = v.m;
    let om = unit_ball_volume(m);
    let qf = table.params.big_q as f64;
    let mut report = Report::new();
    let dr = density_ratio(v, a, r)?;
    report.premise(CheckRecord::le(
        "r^-m |V|(B(a,r)) <= (Q+eps0) omega",
        dr.ratio,
        (qf + table.eps0) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        "r^mu |H|_q <= eps1",
        smallness(v, a, r, q)?,
        table.eps1,
        1e-12,
    ));
    report.premise(CheckRecord::flag("a in spt |V|", v.support_contains(a)));
    let open = Region::open_ball(a, r)?;
    let total: f64 = pi.iter().map(|w| w.mass(&open)).sum();
    let expected = v.mass(&open);
    report.premise(CheckRecord::eq(
        "partition mass additivity",
        total,
        expected,
        1e-9 * expected.max(1.0),
    ));

    let profile = RadialProfile::new(v, a)?;
    let grid = radius_grid(&profile, r, v.cell_size(), &GridOptions::default());
    let small_s = grid[0];
    let tilt_at_zero = profile.tilt(0.0, r);
    report.conclusion(
        CheckRecord::le("G_V(0+, r) <= 2^(-m-2) omega", tilt_at_zero, 2f64.powi(-(m as i32) - 2) * om, 1e-12)
            .with_detail(format!("{} weight at the center excluded", profile.center_weight)),
    );
    let half = Region::open_ball(a, 0.5 * r)?;
    let mut components = Vec::with_capacity(pi.len());
    let mut pi_prime = Vec::new();
    for (i, w) in pi.iter().enumerate() {
        let meets = w.atoms.iter().any(|at| half.contains(&at.x));
        let (nearest, contains) = match w.nearest_atom(a) {
            Some((j, d)) => (d, d <= 1.5 * w.atoms[j].cell),
            None => (f64::INFINITY, false),
        };
        let wp = RadialProfile::new(w, a)?;
        let ratio = grid
            .iter()
            .take_while(|&&s| s <= 2.0 * small_s)
            .map(|&s| wp.ratio(s))
            .fold(f64::INFINITY, f64::min);
        if meets {
            pi_prime.push(i);
            report.conclusion(CheckRecord::flag(format!("component {i}: a in spt |W|"), contains));
            report.conclusion(CheckRecord::ge(
                format!("component {i}: small-scale ratio >= 2^(-m-1) omega"),
                ratio,
                2f64.powi(-(m as i32) - 1) * om,
                1e-12,
            ));
        }
        components.push(ComponentSupport {
            index: i,
            meets_half_ball: meets,
            nearest_distance: nearest,
            contains_center: contains,
            small_scale_ratio: ratio,
        });
    }
    report.conclusion(CheckRecord::le("|Pi'| <= Q", pi_prime.len() as f64, qf, 0.0));
    Ok(CenterSupportReport {
        components,
        pi_prime,
        tilt_at_zero,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varifold::scene::tests::{circle, line, lines};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// The part of the line `y = d` inside the closed unit ball.
    fn chord(d: f64, res: usize) -> QuadratureVarifold {
        use crate::varifold::{build_scene, Primitive, SceneSpec, Shape};
        let c = (1.0 - d * d).sqrt();
        build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::new(
                Shape::Segment {
                    start: vec![-c, d],
                    end: vec![c, d],
                },
                res,
            )],
        ))
        .unwrap()
    }

    #[test]
    fn density_ratio_examples() {
        let l = line(&[0.0, 0.0], 0.4, 1.0, 1000);
        let d = density_ratio(&l, &[0.0, 0.0], 0.7).unwrap();
        assert!((d.ratio - 2.0).abs() < 1e-9);
        assert!((d.normalized - 1.0).abs() < 1e-9);
        let fan = lines(&[0.0, 0.5, 1.0, 1.5, 2.0], 1.0, 1000);
        let d = density_ratio(&fan, &[0.0, 0.0], 0.7).unwrap();
        assert!((d.normalized - 5.0).abs() < 1e-6);
        let off = chord(0.5, 4000);
        let d = density_ratio(&off, &[0.0, 0.0], 1.0).unwrap();
        assert!((d.ratio - 3f64.sqrt()).abs() < 1e-6);
        assert!(density_ratio(&l, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn tilt_examples() {
        let l = line(&[0.0, 0.0], 1.1, 1.0, 1000);
        assert!(tilt_integral(&l, &[0.0, 0.0], 0.0, 1.0).unwrap() < 1e-20);
        let off = chord(0.5, 4000);
        let g = tilt_integral(&off, &[0.0, 0.0], 0.0, 1.0).unwrap();
        assert!((g - 3f64.sqrt()).abs() < 1e-5, "{g}");
        let odd = line(&[0.0, 0.0], 0.0, 1.0, 9);
        assert_eq!(
            tilt_integral(&odd, &[0.0, 0.0], 0.0, 1.0),
            Err(Error::SingularAtCenter(4))
        );
    }

    #[test]
    fn circle_tilt_matches_fine_quadrature() {
        // a = (1, 0) on the unit circle; independent Simpson oracle in angle
        let c = circle(1.0, 1 << 16);
        let g = tilt_integral(&c, &[1.0, 0.0], 0.1, 0.5).unwrap();
        // |x-a| = 2 sin(θ/2), |S^⊥(x-a)| = 2 sin²(θ/2), integrand sin(θ/2)/2 dθ
        let th = |d: f64| 2.0 * (d / 2.0).asin();
        let (t0, t1) = (th(0.1), th(0.5));
        let n = 2000;
        let h = (t1 - t0) / n as f64;
        let f = |t: f64| 0.5 * (t / 2.0).sin();
        let mut s = f(t0) + f(t1);
        for k in 1..n {
            s += f(t0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = 2.0 * s * h / 3.0;
        assert!((g - oracle).abs() < 1e-5, "{g} vs {oracle}");
    }

    #[test]
    fn monotonicity_on_a_line_is_exact() {
        let l = line(&[0.0, 0.0], 0.3, 1.0, 1000);
        let rep = check_monotonicity(&l, &[0.0, 0.0], 0.5, 2.0, 0.0, &Default::default()).unwrap();
        assert!(rep.pass, "{:?}", rep.report);
        assert!(rep.residual <= 1e-9 && rep.equality_gap <= 1e-9);
        for r in &rep.ratios {
            assert!((r - 2.0).abs() < 1e-9);
        }
        assert!(rep.tilts.iter().all(|&g| g < 1e-12));
    }

    #[test]
    fn monotonicity_on_two_lines() {
        let two = lines(&[0.0, 1.0], 1.0, 1000);
        let rep = check_monotonicity(&two, &[0.0, 0.0], 0.5, 2.0, 0.0, &Default::default()).unwrap();
        assert!(rep.pass);
        for r in &rep.ratios {
            assert!((r - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn monotonicity_on_circle() {
        let c = circle(1.0, 1 << 15);
        let a = [1.0, 0.0];
        let r = 0.2;
        let delta = smallness(&c, &a, r, 2.0).unwrap();
        let opts = MonotonicityOptions {
            tolerance: 1e-5,
            ..Default::default()
        };
        let rep = check_monotonicity(&c, &a, r, 2.0, delta, &opts).unwrap();
        assert!(rep.pass, "{:?}", rep.report);
        // the same circle at r = 0.5 violates Λδ <= 1
        let delta = smallness(&c, &a, 0.5, 2.0).unwrap();
        let rep = check_monotonicity(&c, &a, 0.5, 2.0, delta, &opts).unwrap();
        assert_eq!(rep.report.outcome(), crate::report::Outcome::PremiseViolated);
        assert!(rep.report.find("Lambda delta <= 1").is_some_and(|c| !c.holds));
    }

    #[test]
    fn lower_bound_examples() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 1000);
        let res = check_lower_bound_mass(&l, &l, &[0.0, 0.0], 0.5, 2.0, 0.0, 0.5, 1e-9).unwrap();
        assert!((res.bound - 1.0).abs() < 1e-12);
        assert!((res.ratio - 2.0).abs() < 1e-9);
        assert!((res.margin - 1.0).abs() < 1e-9);
        assert!(res.report.passed());
        let res = check_lower_bound_mass(&l, &l, &[0.0, 0.0], 0.5, 2.0, 0.0, 0.01, 1e-9).unwrap();
        assert!((res.bound - 0.99 * 2.0).abs() < 1e-12);
        assert!(res.report.passed());
        // W lives only in the annulus γr < |x - a| < r
        let w = l.restrict("annulus", |at| at.x[0].abs() > 0.3);
        let res = check_lower_bound_mass(&l, &w, &[0.0, 0.0], 0.5, 2.0, 0.0, 0.5, 1e-9).unwrap();
        assert_eq!(res.report.outcome(), crate::report::Outcome::PremiseViolated);
    }

    #[test]
    fn center_support_examples() {
        use crate::constants::{ConstantParams, ConstantsTable};
        let two = lines(&[0.0, PI / 2.0], 1.0, 1000);
        let table = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 2, 1.0)).unwrap();
        let pi: Vec<_> = (0..2)
            .map(|k| two.restrict("line", |at| (at.s.projection()[(0, 0)] - (1 - k) as f64).abs() < 0.5))
            .collect();
        let rep = check_center_support(&two, &pi, &[0.0, 0.0], 0.5, 2.0, &table).unwrap();
        assert!(rep.report.passed(), "{:?}", rep.report);
        assert_eq!(rep.pi_prime, vec![0, 1]);
        assert!(rep.tilt_at_zero < 1e-12);

        let near = line(&[0.0, 0.0], 0.0, 1.0, 1000);
        let far = line(&[0.0, 0.9], 0.0, 1.0, 1000);
        let v = near.union(&far).unwrap();
        let table = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 1, 1.0)).unwrap();
        let rep = check_center_support(&v, &[near, far], &[0.0, 0.0], 0.5, 2.0, &table).unwrap();
        assert!(rep.report.passed(), "{:?}", rep.report);
        assert_eq!(rep.pi_prime, vec![0]);
        assert!(!rep.components[1].meets_half_ball);
    }

    #[test]
    fn csv_export() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 100);
        let rep = check_monotonicity(&l, &[0.0, 0.0], 0.5, 2.0, 0.0, &Default::default()).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("s,ratio,tilt\n"));
        assert_eq!(csv.lines().count(), rep.radii.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn stationary_ratio_is_nondecreasing(angle in 0.0f64..3.1, k in 2usize..40) {
            let fan = lines(&[angle, angle + 1.0], 1.0, 400);
            let r = k as f64 * 2.0 / 400.0 * 5.0;
            let rep = check_monotonicity(&fan, &[0.0, 0.0], r.min(0.9), 2.0, 0.0, &Default::default()).unwrap();
            for w in rep.ratios.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
        }

        #[test]
        fn tilt_is_monotone(s1 in 0.05f64..0.3, ds in 0.0f64..0.2, r1 in 0.5f64..0.8, dr in 0.0f64..0.5) {
            let c = circle(1.0, 2048);
            let a = [0.8, 0.1];
            let g = |s: f64, r: f64| tilt_integral(&c, &a, s, r).unwrap();
            prop_assert!(g(s1, r1) >= 0.0);
            prop_assert!(g(s1, r1 + dr) >= g(s1, r1));
            prop_assert!(g(s1 + ds, r1) <= g(s1, r1));
        }

        #[test]
        fn scale_invariance(c in 0.2f64..5.0) {
            let v = circle(1.0, 4096);
            let a = [1.0, 0.0];
            let delta = smallness(&v, &a, 0.2, 2.0).unwrap();
            let opts = MonotonicityOptions { tolerance: 1e-5, ..Default::default() };
            let base = check_monotonicity(&v, &a, 0.2, 2.0, delta, &opts).unwrap();
            let scaled_v = v.dilate(&[0.0, 0.0], c);
            let sa = [c, 0.0];
            let delta_s = smallness(&scaled_v, &sa, 0.2 * c, 2.0).unwrap();
            prop_assert!((delta_s - delta).abs() <= 1e-9 * delta.max(1.0));
            let scaled = check_monotonicity(&scaled_v, &sa, 0.2 * c, 2.0, delta_s, &opts).unwrap();
            prop_assert_eq!(base.radii.len(), scaled.radii.len());
            for (x, y) in base.ratios.iter().zip(&scaled.ratios) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
            prop_assert_eq!(base.pass, scaled.pass);
        }
    }
}
