//! The nested-set counterexample: the sequence `(R_i, P_i, ρ_i)`, the sets
//! `S(ρ)`, certification of its three properties at finite depth, and the
//! two planar scenes built from it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::monotonicity::RadialProfile;
use crate::report::{CheckRecord, Report};
use crate::varifold::{build_scene, Field, Primitive, QuadratureVarifold, SceneSpec, Shape};

/// Positive increasing functions on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MonotoneFn {
    Identity,
    /// `t^alpha`
    Power { alpha: f64 },
    /// `1 / ln(1 + 1/t)`
    LogScaled,
}

impl MonotoneFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            MonotoneFn::Identity => t,
            MonotoneFn::Power { alpha } => t.powf(alpha),
            MonotoneFn::LogScaled => 1.0 / (1.0 / t).ln_1p(),
        }
    }

    /// `sup {t > 0 : f(t) < b}`.
    pub fn sup_below(&self, b: f64) -> f64 {
        match *self {
            MonotoneFn::Identity => b,
            MonotoneFn::Power { alpha } => b.powf(1.0 / alpha),
            MonotoneFn::LogScaled => 1.0 / (1.0 / b).exp_m1(),
        }
    }

    /// Positivity, monotonicity and decay to zero along `2^-k`.
    pub fn check_vanishing(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for k in 0..=60 {
            let y = self.eval((-(k as f64)).exp2());
            if !(y > 0.0) || !y.is_finite() || !(y < prev) {
                return Err(Error::InvalidFunction(format!(
                    "{self:?} is not positive and decreasing towards 0 at t = 2^-{k}"
                )));
            }
            prev = y;
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<MonotoneFn> {
        match s {
            "id" | "identity" => Ok(MonotoneFn::Identity),
            "log" | "log-scaled" => Ok(MonotoneFn::LogScaled),
            _ => {
                let alpha = s
                    .strip_prefix("power:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidFunction(format!("unknown function '{s}'")))?;
                Ok(MonotoneFn::Power { alpha })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub r: f64,
    pub p: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSequence {
    pub eps: f64,
    pub f: MonotoneFn,
    pub g: MonotoneFn,
    pub requested_depth: usize,
    pub depth: usize,
    pub triples: Vec<Triple>,
    pub rule: String,
    /// Why generation stopped before the requested depth.
    pub truncated: Option<String>,
}

const RULE: &str = "half-supremum";

fn usable(x: f64) -> bool {
    x.is_normal() && x > 0.0
}

/// Builds the sequence by halving every supremum the recursion allows.
pub fn generate_sequence(eps: f64, f: MonotoneFn, g: MonotoneFn, depth: usize) -> Result<CounterexampleSequence> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    if depth == 0 {
        return Err(Error::InvalidParameter {
            name: "depth",
            reason: "must be at least 1".into(),
        });
    }
    f.check_vanishing()?;
    g.check_vanishing()?;
    let mut triples = Vec::with_capacity(depth);
    let mut truncated = None;
    let (mut r, mut p): (f64, f64) = (1.0, 0.5);
    let mut rho_bound = eps;
    for i in 1..=depth {
        let rho = 0.5 * rho_bound.min(f.sup_below(p.min(r - p)));
        if !usable(rho) || !usable(g.eval(rho)) || !(f.eval(rho) < p.min(r - p)) {
            truncated = Some(format!("rho_{i} underflows"));
            break;
        }
        triples.push(Triple { r, p, rho });
        if i == depth {
            break;
        }
        let r_next = p - f.eval(rho);
        let p_next = 0.5 * g.eval(rho).min(r_next);
        if !usable(r_next) || !usable(p_next) || !(p_next < r_next) {
            truncated = Some(format!("P_{} underflows", i + 1));
            break;
        }
        r = r_next;
        p = p_next;
        rho_bound = rho.min(1.0 / i as f64);
    }
    let seq = CounterexampleSequence {
        eps,
        f,
        g,
        requested_depth: depth,
        depth: triples.len(),
        triples,
        rule: RULE.into(),
        truncated,
    };
    seq.check_invariants()?;
    Ok(seq)
}

impl CounterexampleSequence {
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |i: usize, what: &str| Err(Error::SelfCheck(format!("i = {i}: {what}")));
        let t = &self.triples;
        if t.is_empty() {
            return fail(0, "empty sequence");
        }
        if t[0].r != 1.0 {
            return fail(1, "R_1 = 1");
        }
        if !(t[0].rho < self.eps) {
            return fail(1, "rho_1 < eps");
        }
        for (k, x) in t.iter().enumerate() {
            let i = k + 1;
            if !(0.0 < x.p && x.p < x.r) {
                return fail(i, "0 < P_i < R_i");
            }
            if !(self.f.eval(x.rho) < x.p.min(x.r - x.p)) {
                return fail(i, "f(rho_i) < min{P_i, R_i - P_i}");
            }
            if let Some(y) = t.get(k + 1) {
                if !(y.rho < x.rho.min(1.0 / i as f64)) {
                    return fail(i, "rho_{i+1} < min{rho_i, 1/i}");
                }
                if y.r != x.p - self.f.eval(x.rho) {
                    return fail(i, "R_{i+1} = P_i - f(rho_i)");
                }
                if !(y.p < self.g.eval(x.rho).min(y.r)) {
                    return fail(i, "P_{i+1} < min{g(rho_i), R_{i+1}}");
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn points(&self) -> Vec<f64> {
        self.triples.iter().map(|t| t.p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSet {
    pub points: Vec<f64>,
    /// `ρ` lies below the last `ρ_i` computed, so deeper terms are missing.
    pub depth_limited: bool,
}

/// `S(ρ) = {P_i : ρ_i ≤ ρ}` at the generated depth.
pub fn s_of_rho(seq: &CounterexampleSequence, rho: f64) -> RhoSet {
    let points: Vec<f64> = seq.triples.iter().filter(|t| t.rho <= rho).map(|t| t.p).collect();
    let last = seq.triples.last().map(|t| t.rho).unwrap_or(0.0);
    RhoSet {
        points,
        depth_limited: rho < last,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyReport {
    pub nesting: bool,
    pub covering: bool,
    /// Longest prefix of pairwise disjoint intervals `[P_i - f(ρ_i), P_i + f(ρ_i)]`.
    pub certified_size: usize,
    pub failures: Vec<String>,
    pub report: Report,
}

fn rho_grid(seq: &CounterexampleSequence) -> Vec<f64> {
    let mut grid = vec![seq.eps.max(2.0 * seq.triples[0].rho)];
    for (k, t) in seq.triples.iter().enumerate() {
        grid.push(t.rho);
        if let Some(n) = seq.triples.get(k + 1) {
            grid.push(t.rho.sqrt() * n.rho.sqrt());
        }
    }
    grid
}

/// Certifies properties (1)–(3) of the lemma at the generated depth.
pub fn verify_properties(seq: &CounterexampleSequence) -> Result<PropertyReport> {
    if seq.triples.is_empty() {
        return Err(Error::InvalidParameter {
            name: "seq",
            reason: "no triples".into(),
        });
    }
    let mut failures = Vec::new();
    let grid = rho_grid(seq);

    // (1) S(τ) ⊂ S(ρ) for τ ≤ ρ.
    let mut nesting = true;
    for w in grid.windows(2) {
        let (big, small) = (s_of_rho(seq, w[0]), s_of_rho(seq, w[1]));
        if !small.points.iter().all(|p| big.points.contains(p)) {
            nesting = false;
            failures.push(format!("(1) S({}) is not contained in S({})", w[1], w[0]));
        }
    }

    // (2) the two centers are P_i and 0, with i = min{i : ρ_i ≤ ρ}.
    let mut covering = true;
    for &rho in &grid {
        let Some(i) = seq.triples.iter().position(|t| t.rho <= rho) else {
            continue;
        };
        let radius = seq.g.eval(rho);
        let center = seq.triples[i].p;
        for (j, p) in s_of_rho(seq, rho).points.iter().enumerate() {
            if !((p - center).abs() < radius || p.abs() < radius) {
                covering = false;
                failures.push(format!(
                    "(2) rho = {rho}: P_{} = {p} outside B(P_{}, g) and B(0, g)",
                    j + 1,
                    i + 1
                ));
            }
        }
    }

    // (3) pairwise disjoint intervals force |A| ≥ depth.
    let intervals: Vec<(f64, f64)> = seq
        .triples
        .iter()
        .map(|t| {
            let f = seq.f.eval(t.rho);
            (t.p - f, t.p + f)
        })
        .collect();
    let mut certified = intervals.len();
    'outer: for j in 1..intervals.len() {
        for i in 0..j {
            let (a, b) = (intervals[i], intervals[j]);
            if a.0 <= b.1 && b.0 <= a.1 {
                failures.push(format!("(3) intervals {} and {} intersect", i + 1, j + 1));
                certified = j;
                break 'outer;
            }
        }
    }
    for (k, t) in seq.triples.iter().enumerate() {
        let (lo, hi) = intervals[k];
        let below = seq.triples.get(k + 1).map(|n| n.r).unwrap_or(lo);
        if !(below <= lo && hi < t.r) {
            failures.push(format!("(3) R_{} <= Q <= R_{} fails", k + 2, k + 1));
            certified = certified.min(k);
        }
    }

    let mut report = Report::new();
    report.premise(CheckRecord::flag(
        "sequence invariants",
        seq.check_invariants().is_ok(),
    ));
    report.conclusion(CheckRecord::flag("(1) S(tau) in S(rho)", nesting));
    report.conclusion(CheckRecord::flag("(2) two-ball covering", covering));
    report.conclusion(CheckRecord::ge(
        "(3) any admissible A has at least depth points",
        certified as f64,
        seq.depth as f64,
        0.0,
    ));
    Ok(PropertyReport {
        nesting,
        covering,
        certified_size: certified,
        failures,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactTriple {
    pub r: BigRational,
    pub p: BigRational,
    pub rho: BigRational,
}

fn exact_eval(f: MonotoneFn, t: &BigRational) -> Result<BigRational> {
    match f {
        MonotoneFn::Identity => Ok(t.clone()),
        MonotoneFn::Power { alpha } if alpha >= 1.0 && alpha.fract() == 0.0 => Ok(num_traits::pow(t.clone(), alpha as usize)),
        _ => Err(Error::InvalidFunction(format!("{f:?} has no exact rational mode"))),
    }
}

/// Rational arithmetic version of [`generate_sequence`]; `f` must be the
/// identity and `g` the identity or an integer power.
pub fn generate_sequence_exact(eps: &BigRational, g: MonotoneFn, depth: usize) -> Result<Vec<ExactTriple>> {
    if !eps.is_positive() || depth == 0 {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "eps must be positive and depth at least 1".into(),
        });
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut r = BigRational::one();
    let mut p = &r * &half;
    let mut bound = eps.clone();
    let mut out = Vec::with_capacity(depth);
    for i in 1..=depth {
        let gap = (&r - &p).min(p.clone());
        let rho = &half * bound.min(gap);
        out.push(ExactTriple {
            r: r.clone(),
            p: p.clone(),
            rho: rho.clone(),
        });
        let r_next = &p - &rho;
        let p_next = &half * exact_eval(g, &rho)?.min(r_next.clone());
        r = r_next;
        p = p_next;
        bound = rho.min(BigRational::new(BigInt::one(), BigInt::from(i)));
    }
    debug_assert!(out.iter().all(|t| !t.rho.is_zero()));
    Ok(out)
}

impl ExactTriple {
    pub fn to_f64(&self) -> Triple {
        Triple {
            r: self.r.to_f64().unwrap_or(f64::NAN),
            p: self.p.to_f64().unwrap_or(f64::NAN),
            rho: self.rho.to_f64().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FanDiagnostic {
    pub lines: usize,
    pub radius: f64,
    /// `|V|(B̄(0,t)) / (ω₁ t)` at a lattice-aligned `t`.
    pub density: f64,
}

/// Lines through the origin at angles `P_1, …, P_d` clipped to the unit disk.
pub fn build_line_fan(
    seq: &CounterexampleSequence,
    depth_used: usize,
    resolution: usize,
) -> Result<(QuadratureVarifold, FanDiagnostic)> {
    let d = depth_used.min(seq.depth);
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "depth_used",
            reason: "must be at least 1".into(),
        });
    }
    let spec = SceneSpec::new(
        2,
        1,
        vec![Primitive::new(
            Shape::LineFan {
                angles: seq.points()[..d].to_vec(),
                radius: 1.0,
                center: None,
            },
            resolution,
        )],
    );
    let v = build_scene(&spec)?;
    let profile = RadialProfile::new(&v, &[0.0, 0.0])?;
    let t = profile.snap(0.5, &profile.distinct_distances());
    let density = profile.mass_closed(t) / (2.0 * t);
    Ok((
        v,
        FanDiagnostic {
            lines: d,
            radius: t,
            density,
        },
    ))
}

/// Zeros `0 < P_d < … < P_1` of the sine scene.
pub fn sine_zeros(seq: &CounterexampleSequence, depth_used: usize) -> Vec<f64> {
    let d = depth_used.min(seq.depth);
    let mut zeros = vec![0.0];
    zeros.extend(seq.points()[..d].iter().rev());
    zeros
}

/// Graph of alternating half-sine arches vanishing at `{0} ∪ S(ρ_d)`, each of
/// amplitude `amplitude · width`, with `resolution` atoms per arch.
pub fn build_sine_scene(
    seq: &CounterexampleSequence,
    depth_used: usize,
    amplitude: f64,
    resolution: usize,
) -> Result<QuadratureVarifold> {
    build_scene(&SceneSpec::new(
        2,
        1,
        vec![Primitive::new(
            Shape::SineZeros {
                zeros: sine_zeros(seq, depth_used),
                amplitude,
            },
            resolution,
        )],
    ))
}

/// `‖B‖_{L^q(B(0,1))}` of the sine scene at each depth.
pub fn sine_growth(
    seq: &CounterexampleSequence,
    depths: &[usize],
    q: f64,
    amplitude: f64,
    resolution: usize,
) -> Result<Vec<(usize, f64)>> {
    let ball = Region::open_ball(&[0.0, 0.0], 1.0)?;
    depths
        .iter()
        .map(|&d| {
            let v = build_sine_scene(seq, d, amplitude, resolution)?;
            Ok((d.min(seq.depth), v.lq_seminorm(&ball, Field::B, q)?))
        })
        .collect()
}
