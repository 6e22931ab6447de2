//! Value-based separation, single-scale partitions, the nested scale ladder
//! and the Hölder decay certificate.
//!
//! Components are index sets into the atoms of the input varifold, so
//! nesting and mass additivity are checked as exact set relations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::{mu_lambda, ConstantsTable};
use crate::error::{Error, Result};
use crate::geometry::{distance, unit_ball_volume, Region};
use crate::monotonicity::{radius_grid, GridOptions, RadialProfile};
use crate::report::{CheckRecord, Report};
use crate::varifold::testfield::{Position, TestField};
use crate::varifold::{diameter_of, Field, QuadratureVarifold};

const LINK_SLACK: f64 = 1e-12;
const MASS_REL_TOL: f64 = 1e-12;

/// Closed `radius`-thickening of a finite set of `Y`-points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSet {
    pub points: Vec<Vec<f64>>,
    pub radius: f64,
}

impl ValueSet {
    pub fn new(points: Vec<Vec<f64>>, radius: f64) -> Self {
        ValueSet { points, radius }
    }

    pub fn points(points: Vec<Vec<f64>>) -> Self {
        ValueSet { points, radius: 0.0 }
    }

    /// Distance from `y` to the thickened set; `+∞` when empty.
    pub fn distance_to(&self, y: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| (distance(p, y) - self.radius).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance_between(&self, other: &ValueSet) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.points {
            for q in &other.points {
                best = best.min(distance(p, q));
            }
        }
        (best - self.radius - other.radius).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Separation {
    pub w: QuadratureVarifold,
    pub rest: QuadratureVarifold,
    /// Indices of `w`'s atoms in the input.
    pub indices: Vec<usize>,
    /// `|gap(V) - gap(W) - gap(V - W)|` for signed first-variation gaps,
    /// `None` when curvature is not sampled.
    pub additivity_residual: Option<f64>,
}

fn signed_gap(v: &QuadratureVarifold, g: &dyn TestField) -> Result<f64> {
    let fv = v.first_variation_check(g)?;
    Ok(fv.lhs - fv.rhs)
}

/// `W = V ⌞ f⁻¹(B(K, δ))` for value sets `K`, `D` at distance at least `2δ`.
pub fn separate(v: &QuadratureVarifold, d: &ValueSet, k: &ValueSet, delta: f64) -> Result<Separation> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be positive, got {delta}"),
        });
    }
    let gap = k.distance_between(d);
    if gap < 2.0 * delta {
        return Err(Error::ValueSetsTooClose {
            distance: gap,
            required: 2.0 * delta,
        });
    }
    let tol = 1e-9 * delta.max(1.0);
    let values = v.values(crate::varifold::ValueSelector::F)?;
    let mut indices = Vec::new();
    let mut rest = Vec::new();
    for (i, y) in values.iter().enumerate() {
        let dk = k.distance_to(y);
        if dk < delta {
            indices.push(i);
        } else if d.distance_to(y) <= tol {
            rest.push(i);
        } else {
            return Err(Error::SeparationViolated(format!(
                "atom {i} has a value at distance {dk:.3e} from K and {:.3e} from D",
                d.distance_to(y)
            )));
        }
    }
    let w = v.select("separate: K", &indices);
    let others = v.select("separate: D", &rest);
    let additivity_residual = if v.atoms.iter().all(|a| a.h.is_some()) && !v.is_empty() {
        let g = Position {
            origin: v.atoms[0].x.clone(),
        };
        let total = signed_gap(v, &g)?;
        let parts = signed_gap(&w, &g)? + signed_gap(&others, &g)?;
        Some((total - parts).abs())
    } else {
        None
    };
    Ok(Separation {
        w,
        rest: others,
        indices,
        additivity_residual,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage clusters at threshold `2τ` (ties merge).
///
/// Returns, for each cluster, the indices into `values` in increasing order;
/// clusters are ordered by their smallest index.
pub fn cluster_indices(values: &[Vec<f64>], tau: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let threshold = 2.0 * tau.max(0.0) + LINK_SLACK;
    // Deduplicate exactly, then sweep along the first coordinate.
    let mut distinct: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut rep = Vec::with_capacity(n);
    let mut reps: Vec<usize> = Vec::new();
    for (i, y) in values.iter().enumerate() {
        let key: Vec<u64> = y.iter().map(|c| (c + 0.0).to_bits()).collect();
        let id = *distinct.entry(key).or_insert_with(|| {
            reps.push(i);
            reps.len() - 1
        });
        rep.push(id);
    }
    let mut uf = UnionFind::new(reps.len());
    let mut order: Vec<usize> = (0..reps.len()).collect();
    let first = |j: usize| values[reps[j]].first().copied().unwrap_or(0.0);
    order.sort_by(|&a, &b| first(a).total_cmp(&first(b)));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if first(b) - first(a) > threshold {
                break;
            }
            if distance(&values[reps[a]], &values[reps[b]]) <= threshold {
                uf.union(a, b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(rep[i]);
        groups.entry(root).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Clusters `Υ₁ … Υ_l` as lists of distinct values.
pub fn cluster_values(values: &[Vec<f64>], tau: f64) -> Vec<Vec<Vec<f64>>> {
    cluster_indices(values, tau)
        .into_iter()
        .map(|g| {
            let pts: Vec<Vec<f64>> = g.iter().map(|&i| values[i].clone()).collect();
            crate::varifold::dedupe(&pts)
        })
        .collect()
}

fn weighted_barycenter(v: &QuadratureVarifold, idx: &[usize]) -> Option<Vec<f64>> {
    // Offsets from the first value keep constant fields exact.
    let first = v.atoms.get(*idx.first()?)?.f.as_ref()?;
    let mut acc = vec![0.0; first.len()];
    let mut mass = 0.0;
    for &i in idx {
        let a = &v.atoms[i];
        let f = a.f.as_ref()?;
        for ((s, y), y0) in acc.iter_mut().zip(f).zip(first) {
            *s += a.w * (y - y0);
        }
        mass += a.w;
    }
    if mass > 0.0 {
        Some(acc.into_iter().zip(first).map(|(s, y0)| y0 + s / mass).collect())
    } else {
        None
    }
}

fn require_fields(v: &QuadratureVarifold) -> Result<()> {
    for (i, a) in v.atoms.iter().enumerate() {
        if a.f.is_none() {
            return Err(Error::MissingField { field: "f", atom: i });
        }
        if a.df.is_none() {
            return Err(Error::MissingField { field: "df", atom: i });
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("need 0 < lambda < 1, got {lambda}"),
        });
    }
    Ok(())
}

/// One member of a single-scale partition.
#[derive(Debug, Clone)]
pub struct ScaleComponent {
    /// Indices into the atoms of the varifold passed in.
    pub indices: Vec<usize>,
    pub w: QuadratureVarifold,
    pub cluster: Vec<Vec<f64>>,
    pub value_support_diameter: f64,
}

#[derive(Debug, Clone)]
pub struct ScalePartition {
    pub tau: f64,
    pub diameter_bound: f64,
    pub components: Vec<ScaleComponent>,
    pub report: Report,
}

/// Atoms of `v` (indices) strictly inside `B(a, radius)`.
fn open_ball_indices(v: &QuadratureVarifold, idx: &[usize], a: &[f64], radius: f64) -> Vec<usize> {
    idx.iter()
        .copied()
        .filter(|&i| distance(&v.atoms[i].x, a) < radius)
        .collect()
}

struct Refinement {
    tau: f64,
    children: Vec<(Vec<usize>, Vec<Vec<f64>>)>,
}

/// Lemma step on the atoms `parent` of `v` (a varifold on `B(a, r)`):
/// `τ_m` from the parent's `df`, then value clusters of its restriction to
/// `B(a, λ r)`.
fn refine(
    v: &QuadratureVarifold,
    parent: &[usize],
    a: &[f64],
    r: f64,
    lambda: f64,
    table: &ConstantsTable,
) -> Result<Refinement> {
    let sub = v.select("parent", parent);
    let q = table.params.q;
    let l1 = sub.l1(&Region::Everything, Field::Df)?;
    let lq = sub.lq_seminorm(&Region::Everything, Field::Df, q)?;
    let tau = table.tau_m(lambda, r, l1, lq);
    let inner = open_ball_indices(v, parent, a, lambda * r);
    let values: Vec<Vec<f64>> = inner
        .iter()
        .map(|&i| v.atoms[i].f.clone().unwrap_or_default())
        .collect();
    let children = cluster_indices(&values, tau)
        .into_iter()
        .map(|g| {
            let idx: Vec<usize> = g.iter().map(|&j| inner[j]).collect();
            let pts: Vec<Vec<f64>> = g.iter().map(|&j| values[j].clone()).collect();
            (idx, crate::varifold::dedupe(&pts))
        })
        .collect();
    Ok(Refinement { tau, children })
}

fn lemma_premises(
    report: &mut Report,
    prefix: &str,
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    lambda: f64,
    table: &ConstantsTable,
) -> Result<()> {
    let qf = table.params.big_q as f64;
    let om = unit_ball_volume(v.m);
    let ball = Region::closed_ball(a, r)?;
    report.premise(CheckRecord::le(
        format!("{prefix}lambda <= eps2/(1+eps2)"),
        lambda,
        table.partition_lambda_bound(),
        0.0,
    ));
    report.premise(CheckRecord::le(
        format!("{prefix}r^-m |V|(B(a,r)) <= (Q+1/4) omega"),
        v.mass(&ball) / r.powi(v.m as i32),
        (qf + 0.25) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        format!("{prefix}|H|_m on B(a,r) <= eps2"),
        v.lq_seminorm(&ball, Field::H, v.m as f64)?,
        table.eps2,
        1e-12,
    ));
    Ok(())
}

/// Partition of `V_{λ r}` from the value clusters of `f` at scale `τ_m`.
///
/// `v_r` is the varifold restricted to `B(a, r)`; premise failures and more
/// than `Q` clusters are errors.
pub fn partition_at_scale(
    v_r: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    lambda: f64,
    table: &ConstantsTable,
) -> Result<ScalePartition> {
    check_lambda(lambda)?;
    v_r.reject_empty("partition at scale")?;
    require_fields(v_r)?;
    let mut report = Report::new();
    lemma_premises(&mut report, "", v_r, a, r, lambda, table)?;
    report.premise(CheckRecord::flag("a in spt |V|", v_r.support_contains(a)));
    if let Some(bad) = report.failed_premises().next() {
        return Err(Error::LevelPremise {
            level: 1,
            detail: bad.name.clone(),
        });
    }
    let all: Vec<usize> = (0..v_r.len()).collect();
    let all = open_ball_indices(v_r, &all, a, r);
    let step = refine(v_r, &all, a, r, lambda, table)?;
    let big_q = table.params.big_q as usize;
    if step.children.len() > big_q {
        return Err(Error::PartitionLemmaViolated(format!(
            "{} value clusters at tau = {:.3e} exceed Q = {big_q}",
            step.children.len(),
            step.tau
        )));
    }
    let bound = 2.0 * big_q as f64 * step.tau;
    let mut components = Vec::new();
    let mut covered = 0usize;
    for (k, (idx, cluster)) in step.children.into_iter().enumerate() {
        let w = v_r.select(&format!("cluster {k}"), &idx);
        let diam = w.support_diameter(crate::varifold::ValueSelector::F)?;
        report.conclusion(CheckRecord::le(
            format!("diam f(spt W_{k}) <= 2 Q tau"),
            diam,
            bound,
            1e-12,
        ));
        covered += idx.len();
        components.push(ScaleComponent {
            indices: idx,
            w,
            cluster,
            value_support_diameter: diam,
        });
    }
    report.conclusion(CheckRecord::le(
        "|Pi| <= Q",
        components.len() as f64,
        big_q as f64,
        0.0,
    ));
    let inner = Region::open_ball(a, lambda * r)?;
    let total = v_r.mass(&inner);
    let sum: f64 = components.iter().map(|c| c.w.total_mass()).sum();
    report.conclusion(CheckRecord::eq(
        "sum |W| = |V_{lambda r}|",
        sum,
        total,
        MASS_REL_TOL * total.max(1.0),
    ));
    report.conclusion(CheckRecord::eq(
        "atoms of V_{lambda r} covered",
        covered as f64,
        open_ball_indices(v_r, &all, a, lambda * r).len() as f64,
        0.0,
    ));
    Ok(ScalePartition {
        tau: step.tau,
        diameter_bound: bound,
        components,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: usize,
    /// Index of the parent in the previous level; `None` on level 1.
    pub parent: Option<usize>,
    /// Distinct values of the defining cluster and its thickening radius.
    pub cluster: ValueSet,
    pub atom_count: usize,
    pub mass: f64,
    /// Meets `B(a, r_k / 2)`, i.e. belongs to `Π′_k`.
    pub meets_half_ball: bool,
    pub value_support_diameter: f64,
    pub diameter_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_value: Option<Vec<f64>>,
    /// Atom indices into the ladder's input varifold.
    pub atoms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLevel {
    pub k: usize,
    pub radius: f64,
    pub tau: f64,
    /// `C₀ ‖df‖` on `V_{r_{k-1}}`, times `r_k^μ` when `m > 1`.
    pub theorem_bound: f64,
    pub components: Vec<ComponentRecord>,
    /// Value barycenters of the components.
    pub upsilon: Vec<Vec<f64>>,
}

impl PartitionLevel {
    pub fn pi_prime(&self) -> usize {
        self.components.iter().filter(|c| c.meets_half_ball).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLadder {
    pub center: Vec<f64>,
    pub r: f64,
    pub lambda: f64,
    pub depth: usize,
    pub q: f64,
    pub big_q: u32,
    pub levels: Vec<PartitionLevel>,
    pub k0: usize,
    /// Limit values `y_i`, one per final-level `Π′` component.
    pub upsilon: Vec<Vec<f64>>,
    pub report: Report,
}

impl PartitionLadder {
    pub fn radius(&self, k: usize) -> f64 {
        self.r * self.lambda.powi(k as i32)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn level(&self, k: usize) -> Option<&PartitionLevel> {
        self.levels.iter().find(|l| l.k == k)
    }
}

/// First `k ≥ 1` after which `|Π′_k|` stays constant.
pub fn stabilization_index(counts: &[usize]) -> usize {
    if counts.is_empty() {
        return 1;
    }
    let last = counts[counts.len() - 1];
    let mut k0 = counts.len();
    while k0 > 1 && counts[k0 - 2] == last {
        k0 -= 1;
    }
    k0
}

/// Partitions `Π_k` of `V_{r_k}`, `r_k = λ^k r`, for `k = 1..=depth`.
///
/// Premise failures are recorded in the ladder report rather than aborting,
/// so a negative control still yields a ladder to inspect.
pub fn nested_partition(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    lambda: f64,
    depth: usize,
    table: &ConstantsTable,
) -> Result<PartitionLadder> {
    check_lambda(lambda)?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("must be positive, got {r}"),
        });
    }
    if depth == 0 {
        return Err(Error::InvalidParameter {
            name: "depth",
            reason: "need at least one level".into(),
        });
    }
    v.reject_empty("nested partition")?;
    require_fields(v)?;
    let m = v.m;
    let q = table.params.q;
    let (mu, _) = mu_lambda(m, q)?;
    let big_q = table.params.big_q;
    let qf = big_q as f64;
    let om = unit_ball_volume(m);
    let mut report = Report::new();

    report.premise(CheckRecord::le(
        "lambda <= eps2/(1+eps2)",
        lambda,
        table.partition_lambda_bound(),
        0.0,
    ));
    report.premise(CheckRecord::flag("a in spt |V|", v.support_contains(a)));
    let profile = RadialProfile::new(v, a)?;
    let grid = radius_grid(&profile, r, v.cell_size(), &GridOptions::default());
    let worst = grid
        .iter()
        .map(|&t| profile.mass_closed(t) / t.powi(m as i32))
        .fold(0.0, f64::max);
    report.premise(CheckRecord::le(
        "sup_t t^-m |V|(B(a,t)) <= (Q+1/4) omega",
        worst,
        (qf + 0.25) * om,
        1e-9,
    ));
    let ball = Region::closed_ball(a, r)?;
    report.premise(CheckRecord::le(
        "|H|_m on B(a,r) <= eps2",
        v.lq_seminorm(&ball, Field::H, m as f64)?,
        table.eps2,
        1e-12,
    ));

    let all: Vec<usize> = (0..v.len()).collect();
    let root = open_ball_indices(v, &all, a, r);
    let mut parents: Vec<(Option<usize>, Vec<usize>)> = vec![(None, root.clone())];
    let mut prev_all = root;
    let mut levels: Vec<PartitionLevel> = Vec::with_capacity(depth);

    for k in 1..=depth {
        let r_prev = r * lambda.powi(k as i32 - 1);
        let r_k = r_prev * lambda;
        let prev = v.select("level", &prev_all);
        let l1 = prev.l1(&Region::Everything, Field::Df)?;
        let lq = prev.lq_seminorm(&Region::Everything, Field::Df, q)?;
        let theorem_bound = if m == 1 {
            table.c0 * l1
        } else {
            table.c0 * lq * r_k.powf(mu)
        };
        let mut components = Vec::new();
        let mut tau_level: f64 = 0.0;
        for (pid, parent) in &parents {
            if parent.is_empty() {
                continue;
            }
            if k > 1 {
                let sub = v.select("parent", parent);
                let pball = Region::closed_ball(a, r_prev)?;
                let mut lemma = Report::new();
                lemma.premise(CheckRecord::le(
                    "r^-m |W|(B(a,r)) <= (Q+1/4) omega",
                    sub.mass(&pball) / r_prev.powi(m as i32),
                    (qf + 0.25) * om,
                    1e-9,
                ));
                lemma.premise(CheckRecord::le(
                    "|H|_m on B(a,r) <= eps2",
                    sub.lq_seminorm(&pball, Field::H, m as f64)?,
                    table.eps2,
                    1e-12,
                ));
                let tag = format!("level {k} parent {}: ", pid.unwrap_or(0));
                report.absorb(&tag, lemma);
            }
            let step = refine(v, parent, a, r_prev, lambda, table)?;
            tau_level = tau_level.max(step.tau);
            let bound = 2.0 * qf * step.tau;
            for (idx, cluster) in step.children {
                let sub = v.select("component", &idx);
                let values = sub.values(crate::varifold::ValueSelector::F)?;
                let diam = diameter_of(&values).value;
                let meets = idx.iter().any(|&i| distance(&v.atoms[i].x, a) < 0.5 * r_k);
                components.push(ComponentRecord {
                    id: components.len(),
                    parent: *pid,
                    cluster: ValueSet::new(cluster, step.tau),
                    atom_count: idx.len(),
                    mass: sub.total_mass(),
                    meets_half_ball: meets,
                    value_support_diameter: diam,
                    diameter_bound: bound,
                    limit_value: None,
                    atoms: idx,
                });
            }
        }
        let upsilon = components
            .iter()
            .filter_map(|c| weighted_barycenter(v, &c.atoms))
            .collect();
        let level = PartitionLevel {
            k,
            radius: r_k,
            tau: tau_level,
            theorem_bound,
            components,
            upsilon,
        };
        conclude_level(&mut report, v, a, &level, parents_atoms(&parents), qf)?;
        prev_all = open_ball_indices(v, &prev_all, a, r_k);
        parents = level
            .components
            .iter()
            .map(|c| (Some(c.id), c.atoms.clone()))
            .collect();
        levels.push(level);
    }

    let counts: Vec<usize> = levels.iter().map(|l| l.pi_prime()).collect();
    for w in counts.windows(2).enumerate() {
        let (i, pair) = w;
        report.conclusion(CheckRecord::ge(
            format!("|Pi'_{}| >= |Pi'_{}|", i + 2, i + 1),
            pair[1] as f64,
            pair[0] as f64,
            0.0,
        ));
    }
    let k0 = stabilization_index(&counts);
    let mut upsilon = Vec::new();
    if let Some(last) = levels.last_mut() {
        for c in &mut last.components {
            if c.meets_half_ball {
                c.limit_value = weighted_barycenter(v, &c.atoms);
                if let Some(y) = &c.limit_value {
                    upsilon.push(y.clone());
                }
            }
        }
    }
    Ok(PartitionLadder {
        center: a.to_vec(),
        r,
        lambda,
        depth,
        q,
        big_q,
        levels,
        k0,
        upsilon,
        report,
    })
}

fn parents_atoms(parents: &[(Option<usize>, Vec<usize>)]) -> Vec<Vec<usize>> {
    parents.iter().map(|(_, p)| p.clone()).collect()
}

fn conclude_level(
    report: &mut Report,
    v: &QuadratureVarifold,
    a: &[f64],
    level: &PartitionLevel,
    parents: Vec<Vec<usize>>,
    qf: f64,
) -> Result<()> {
    let k = level.k;
    report.conclusion(CheckRecord::le(
        format!("level {k}: |Pi'| <= Q"),
        level.pi_prime() as f64,
        qf,
        0.0,
    ));
    let mut seen = vec![false; v.len()];
    let mut disjoint = true;
    for c in &level.components {
        for &i in &c.atoms {
            disjoint &= !seen[i];
            seen[i] = true;
        }
    }
    report.conclusion(CheckRecord::flag(format!("level {k}: components disjoint"), disjoint));
    let ball: Vec<usize> = (0..v.len())
        .filter(|&i| distance(&v.atoms[i].x, a) < level.radius)
        .collect();
    let union_parents: std::collections::BTreeSet<usize> = parents.iter().flatten().copied().collect();
    let expected: Vec<usize> = ball.into_iter().filter(|i| union_parents.contains(i)).collect();
    let covered = expected.iter().all(|&i| seen[i]);
    let count: usize = level.components.iter().map(|c| c.atom_count).sum();
    report.conclusion(CheckRecord::flag(
        format!("level {k}: atoms partitioned"),
        covered && count == expected.len(),
    ));
    let total: f64 = expected.iter().map(|&i| v.atoms[i].w).sum();
    let sum: f64 = level.components.iter().map(|c| c.mass).sum();
    report.conclusion(CheckRecord::eq(
        format!("level {k}: mass additivity"),
        sum,
        total,
        MASS_REL_TOL * total.max(1.0),
    ));
    let mut nested = true;
    for c in &level.components {
        let parent = match c.parent {
            Some(p) => &parents[p],
            None => &parents[0],
        };
        let set: std::collections::BTreeSet<usize> = parent.iter().copied().collect();
        nested &= c
            .atoms
            .iter()
            .all(|i| set.contains(i) && distance(&v.atoms[*i].x, a) < level.radius);
    }
    report.conclusion(CheckRecord::flag(format!("level {k}: nesting"), nested));
    let worst_lemma = level
        .components
        .iter()
        .map(|c| c.value_support_diameter - c.diameter_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst_lemma.is_finite() {
        report.conclusion(CheckRecord::le(
            format!("level {k}: diam <= 2 Q tau"),
            worst_lemma,
            0.0,
            1e-12,
        ));
    }
    let worst = level
        .components
        .iter()
        .map(|c| c.value_support_diameter)
        .fold(0.0, f64::max);
    report.conclusion(CheckRecord::le(
        format!("level {k}: diam <= C0 |df|"),
        worst,
        level.theorem_bound,
        1e-12,
    ));
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderViolation {
    pub atom: usize,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub center: Vec<f64>,
    pub r: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
    pub c1: f64,
    pub k0: usize,
    pub upsilon: Vec<Vec<f64>>,
    pub atoms_checked: usize,
    pub violations: usize,
    /// Largest ratio of left to right side over atoms off the center.
    pub worst_ratio: f64,
    pub worst: Option<HolderViolation>,
    pub report: Report,
}

impl HolderCertificate {
    /// Per-atom series `|x-a|, dist(f(x), Υ), bound`.
    pub fn to_csv(&self, v: &QuadratureVarifold) -> String {
        let mut out = String::from("radius,distance,bound\n");
        let ups = ValueSet::points(self.upsilon.clone());
        for a in &v.atoms {
            let d = distance(&a.x, &self.center);
            if d >= self.r {
                continue;
            }
            if let Some(f) = &a.f {
                let dist = ups.distance_to(f);
                let bound = self.c1 * self.sigma * (d / (self.lambda * self.r)).powf(self.mu);
                out.push_str(&format!("{d},{dist},{bound}\n"));
            }
        }
        out
    }
}

/// Pointwise decay `dist(f(x), Υ) ≤ C₁ σ (|x-a| / λr)^μ` on `B(a, r)`.
///
/// `sigma` defaults to `r^μ ‖df‖_q` on `B̄(a, r)`.
pub fn holder_certificate(
    v: &QuadratureVarifold,
    ladder: &PartitionLadder,
    sigma: Option<f64>,
    table: &ConstantsTable,
) -> Result<HolderCertificate> {
    v.reject_empty("holder certificate")?;
    require_fields(v)?;
    let a = &ladder.center;
    let r = ladder.r;
    let lambda = ladder.lambda;
    let m = v.m;
    let q = table.params.q;
    let (mu, _) = mu_lambda(m, q)?;
    let qf = table.params.big_q as f64;
    let om = unit_ball_volume(m);
    let ball = Region::closed_ball(a, r)?;
    let measured = r.powf(mu) * v.lq_seminorm(&ball, Field::Df, q)?;
    let sigma = sigma.unwrap_or(measured);

    let mut report = Report::new();
    report.premise(CheckRecord::le(
        "lambda <= eps4/(1+eps4)",
        lambda,
        table.corollary_lambda_bound(),
        0.0,
    ));
    let profile = RadialProfile::new(v, a)?;
    let s0 = ladder.radius(ladder.depth).max(16.0 * v.cell_size()).min(r);
    let s0 = profile.snap(s0, &profile.distinct_distances());
    let theta = profile.mass_closed(s0) / s0.powi(m as i32) / om;
    report.premise(
        CheckRecord::eq("density at a = Q", theta, qf, 0.05)
            .with_detail(format!("ratio at radius {s0:.3e}")),
    );
    report.premise(CheckRecord::le(
        "r^-m |V|(B(a,r)) <= (Q+eps3) omega",
        v.mass(&ball) / r.powi(m as i32),
        (qf + table.eps3) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        "r^mu |H|_q <= eps4",
        r.powf(mu) * v.lq_seminorm(&ball, Field::H, q)?,
        table.eps4,
        1e-12,
    ));
    report.premise(CheckRecord::le("r^mu |df|_q <= sigma", measured, sigma, 1e-12));
    report.premise(CheckRecord::flag("a in spt |V|", v.support_contains(a)));

    for level in &ladder.levels {
        report.conclusion(CheckRecord::le(
            format!("level {}: |Pi'| <= Q", level.k),
            level.pi_prime() as f64,
            qf,
            0.0,
        ));
    }
    report.conclusion(CheckRecord::le(
        "|Upsilon| <= Q",
        ladder.upsilon.len() as f64,
        qf,
        0.0,
    ));
    // Value supports of the chain ending at each limit value stay nested.
    let mut nested = true;
    if let Some(last) = ladder.levels.last() {
        for c in last.components.iter().filter(|c| c.meets_half_ball) {
            let mut child = c;
            for level in ladder.levels.iter().rev().skip(1) {
                let Some(p) = child.parent.and_then(|p| level.components.get(p)) else {
                    nested = false;
                    break;
                };
                let set: std::collections::BTreeSet<usize> = p.atoms.iter().copied().collect();
                nested &= child.atoms.iter().all(|i| set.contains(i));
                if let Some(y) = &c.limit_value {
                    let vals: Vec<Vec<f64>> = p.atoms.iter().filter_map(|&i| v.atoms[i].f.clone()).collect();
                    let near = ValueSet::points(vals).distance_to(y);
                    nested &= near <= p.value_support_diameter + 1e-12;
                }
                child = p;
            }
        }
    }
    report.conclusion(CheckRecord::flag("value supports nested", nested));

    let c1 = table.c1;
    let ups = ValueSet::points(ladder.upsilon.clone());
    let mut checked = 0;
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst: Option<HolderViolation> = None;
    for (i, at) in v.atoms.iter().enumerate() {
        let d = distance(&at.x, a);
        if !(d < r) {
            continue;
        }
        let f = at.f.as_ref().expect("checked above");
        let dist = ups.distance_to(f);
        let bound = c1 * sigma * (d / (lambda * r)).powf(mu);
        checked += 1;
        let ratio = if bound > 0.0 {
            dist / bound
        } else if dist > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if dist > bound + 1e-12 {
            violations += 1;
        }
        if ratio > worst_ratio || worst.is_none() {
            worst_ratio = worst_ratio.max(ratio);
            worst = Some(HolderViolation {
                atom: i,
                distance: dist,
                bound,
            });
        }
    }
    let detail = worst
        .as_ref()
        .map(|w| format!("worst atom {} ({:.3e} vs {:.3e})", w.atom, w.distance, w.bound))
        .unwrap_or_default();
    report.conclusion(
        CheckRecord::eq("Hoelder bound violations", violations as f64, 0.0, 0.0).with_detail(detail),
    );
    Ok(HolderCertificate {
        center: a.clone(),
        r,
        lambda,
        mu,
        sigma,
        c1,
        k0: ladder.k0,
        upsilon: ladder.upsilon.clone(),
        atoms_checked: checked,
        violations,
        worst_ratio,
        worst,
        report,
    })
}
