//! Tangent maps, conical and cylinder mass checks, Q-valued Lipschitz graph
//! extraction, the null-curvature plane detector and the tangent-cone decay
//! checker.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constants::{mu_lambda, solve_cone_cylinder_constants, ConstantsTable};
use crate::error::{Error, Result};
use crate::geometry::{distance, norm, sub, unit_ball_volume, Plane, Region};
use crate::monotonicity::{radius_grid, GridOptions, RadialProfile};
use crate::partition::{cluster_indices, nested_partition, PartitionLadder};
use crate::report::{CheckRecord, Report};
use crate::varifold::{Atom, Field, QuadratureVarifold};

/// Per-atom tangent values `T_V(x_i)` with `B` as companion derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Option<Vec<f64>>>,
}

pub fn tangent_field(v: &QuadratureVarifold) -> SampledField {
    SampledField {
        values: v.atoms.iter().map(|a| a.s.flatten()).collect(),
        derivatives: v.atoms.iter().map(|a| a.b.clone()).collect(),
    }
}

/// `∫_{B̄(a,t)} |S - P| dV` for each `t` in `radii`.
fn tilt_masses(v: &QuadratureVarifold, a: &[f64], p: &Plane, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(v.len());
    for at in &v.atoms {
        pairs.push((distance(&at.x, a), at.w * at.s.distance(p)?, at.w));
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::with_capacity(radii.len());
    let (mut j, mut tilt, mut mass) = (0, 0.0, 0.0);
    for &t in radii {
        while j < pairs.len() && pairs[j].0 <= t {
            tilt += pairs[j].1;
            mass += pairs[j].2;
            j += 1;
        }
        out.push((tilt, mass));
    }
    Ok(out)
}

/// Premises (i)–(iii) shared by the conical, cylinder and Lipschitz lemmas:
/// two-sided density, `L^m` curvature and mean tilt, all on a radius grid.
fn sheet_premises(
    report: &mut Report,
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    p: &Plane,
    big_q: f64,
    lower: f64,
    upper: f64,
    eps: f64,
    pointwise_tilt: bool,
) -> Result<()> {
    let m = v.m;
    let om = unit_ball_volume(m);
    report.premise(CheckRecord::flag("a in spt |V|", v.support_contains(a)));
    let profile = RadialProfile::new(v, a)?;
    let grid = radius_grid(&profile, r, v.cell_size(), &GridOptions::default());
    let ratios: Vec<f64> = grid
        .iter()
        .map(|&t| profile.mass_closed(t) / t.powi(m as i32))
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    report.premise(CheckRecord::ge(
        "inf_t t^-m |V|(B(a,t)) >= (Q-delta1) omega",
        lo,
        (big_q - lower) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        "sup_t t^-m |V|(B(a,t)) <= (Q+delta2) omega",
        hi,
        (big_q + upper) * om,
        1e-9,
    ));
    let ball = Region::closed_ball(a, r)?;
    report.premise(CheckRecord::le(
        "|H|_m on B(a,r) <= eps",
        v.lq_seminorm(&ball, Field::H, m as f64)?,
        eps,
        1e-12,
    ));
    if pointwise_tilt {
        let mut worst: f64 = 0.0;
        for at in &v.atoms {
            if ball.contains(&at.x) {
                worst = worst.max(at.s.distance(p)?);
            }
        }
        report.premise(CheckRecord::le("sup |T_V - P| on B(a,r) <= eps", worst, eps, 1e-12));
    } else {
        let tilts = tilt_masses(v, a, p, &grid)?;
        let worst = tilts
            .iter()
            .map(|(t, mass)| if *mass > 0.0 { t / mass } else { 0.0 })
            .fold(0.0, f64::max);
        report.premise(CheckRecord::le(
            "sup_t mean |S - P| on B(a,t) <= eps",
            worst,
            eps,
            1e-12,
        ));
    }
    Ok(())
}

fn max_weight(v: &QuadratureVarifold) -> f64 {
    v.atoms.iter().map(|a| a.w).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicalReport {
    pub lam0: f64,
    pub offending_mass: f64,
    pub offending_atoms: usize,
    pub report: Report,
}

/// Mass of `B(a, λ₀ r) ∩ {|P^⊥(x-a)| > σ |P(x-a)|}`; zero up to one atom
/// weight when the lemma applies.
pub fn check_conical(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    p: &Plane,
    sigma: f64,
    delta1: f64,
    table: &ConstantsTable,
) -> Result<ConicalReport> {
    v.reject_empty("conical estimate")?;
    let cone = Region::cone_complement(a, p, sigma)?;
    let big_q = table.params.big_q as f64;
    let mut report = Report::new();
    sheet_premises(
        &mut report,
        v,
        a,
        r,
        p,
        big_q,
        delta1,
        table.params.delta2,
        table.eps5,
        false,
    )?;
    let ball = Region::open_ball(a, table.lam0 * r)?;
    let region = Region::Intersection {
        parts: vec![ball, cone],
    };
    let offending: Vec<&Atom> = v.atoms.iter().filter(|at| region.contains(&at.x)).collect();
    let offending_mass: f64 = offending.iter().map(|at| at.w).sum();
    report.conclusion(CheckRecord::le(
        "|V|(B(a,lam0 r) cap cone complement) = 0",
        offending_mass,
        0.0,
        max_weight(v),
    ));
    Ok(ConicalReport {
        lam0: table.lam0,
        offending_mass,
        offending_atoms: offending.len(),
        report,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderReport {
    pub lam1: f64,
    pub s: f64,
    pub cylinder_ratio: f64,
    pub shell_mass: f64,
    pub neighborhood_ratio: f64,
    pub report: Report,
}

/// Conclusions (1)–(3) of the cylinder estimate at `s = λ₁ r / 2`.
#[allow(clippy::too_many_arguments)]
pub fn check_cylinder(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    p: &Plane,
    delta1: f64,
    delta2: f64,
    delta3: f64,
    table: &ConstantsTable,
) -> Result<CylinderReport> {
    v.reject_empty("cylinder estimate")?;
    let m = v.m;
    let big_q = table.params.big_q as f64;
    let om = unit_ball_volume(m);
    let cc = solve_cone_cylinder_constants(m, table.params.big_q, delta2, delta3)?;
    let s = 0.5 * cc.lam1 * r;
    let mut report = Report::new();
    sheet_premises(&mut report, v, a, r, p, big_q, delta1, delta2, table.eps6, false)?;
    let sm = s.powi(m as i32);
    let cyl = Region::cylinder(a, p, s, s)?;
    let cylinder_ratio = v.mass(&cyl) / sm;
    report.conclusion(CheckRecord::ge(
        "(1) s^-m |V|(C(s,s)) >= (Q-delta1) omega",
        cylinder_ratio,
        (big_q - delta1) * om,
        1e-9,
    ));
    report.conclusion(CheckRecord::le(
        "(1) s^-m |V|(C(s,s)) <= (Q+(1+delta2)/2) omega",
        cylinder_ratio,
        (big_q + 0.5 * (1.0 + delta2)) * om,
        1e-9,
    ));
    let shell = Region::Difference {
        base: Box::new(Region::cylinder(a, p, s, (1.0 + delta3) * s)?),
        removed: Box::new(Region::cylinder(a, p, s, (1.0 - 2.0 * delta3) * s)?),
    };
    let shell_mass = v.mass(&shell);
    report.conclusion(CheckRecord::le("(2) shell mass = 0", shell_mass, 0.0, 0.0));
    let nbhd = Region::cylinder_neighborhood(a, p, s, s, 2.0 * s)?;
    let neighborhood_ratio = v.mass(&nbhd) / sm;
    report.conclusion(CheckRecord::le(
        "(3) s^-m |V|(B(C(s,s),2s)) <= 4^m (Q+delta2) omega",
        neighborhood_ratio,
        4f64.powi(m as i32) * (big_q + delta2) * om,
        1e-9,
    ));
    Ok(CylinderReport {
        lam1: cc.lam1,
        s,
        cylinder_ratio,
        shell_mass,
        neighborhood_ratio,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    /// Coordinates in the normal frame of the base plane.
    pub offset: Vec<f64>,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCell {
    pub index: Vec<usize>,
    /// Cell center in tangent-frame coordinates.
    pub center: Vec<f64>,
    /// Area of the cell inside the base disk.
    pub area: f64,
    pub fiber: Vec<FiberPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QValuedGraph {
    pub base: Plane,
    pub center: Vec<f64>,
    pub radius: f64,
    pub cellcount: usize,
    pub h: f64,
    /// Cells meeting the base disk.
    pub cells: Vec<GraphCell>,
    /// Indices of nonempty cells.
    pub z: Vec<usize>,
    pub lip_estimate: f64,
    pub q: u32,
    /// False when fibers larger than 3 forced greedy matching.
    pub matching_exact: bool,
}

impl QValuedGraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn frame(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.base.frame()
    }

    /// Ambient point of tangent coordinates `z` and normal offset `y`.
    pub fn embed(&self, z: &[f64], y: &[f64]) -> Vec<f64> {
        let (t, nrm) = self.frame();
        let mut x = self.center.clone();
        for (c, e) in z.iter().zip(&t) {
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi += c * ei;
            }
        }
        for (c, e) in y.iter().zip(&nrm) {
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi += c * ei;
            }
        }
        x
    }
}

fn expand(fiber: &[FiberPoint]) -> Vec<(usize, &[f64])> {
    let mut out = Vec::new();
    for (i, p) in fiber.iter().enumerate() {
        for _ in 0..p.multiplicity {
            out.push((i, p.offset.as_slice()));
        }
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Bottleneck matching `min_σ max_i |u_i - v_σ(i)|`; exact for `Q ≤ 3`.
fn bottleneck(u: &[&[f64]], v: &[&[f64]]) -> (f64, Vec<usize>, bool) {
    let k = u.len().min(v.len());
    if k <= 3 {
        let mut best = (f64::INFINITY, Vec::new());
        for p in permutations(k) {
            let cost = (0..k).map(|i| distance(u[i], v[p[i]])).fold(0.0, f64::max);
            if cost < best.0 {
                best = (cost, p);
            }
        }
        (best.0, best.1, true)
    } else {
        let mut used = vec![false; k];
        let mut perm = vec![0; k];
        let mut cost: f64 = 0.0;
        for i in 0..k {
            let (j, d) = (0..k)
                .filter(|&j| !used[j])
                .map(|j| (j, distance(u[i], v[j])))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("unused index");
            used[j] = true;
            perm[i] = j;
            cost = cost.max(d);
        }
        (cost, perm, false)
    }
}

fn cell_grid(m: usize, cellcount: usize, s: f64) -> Vec<(Vec<usize>, Vec<f64>, f64)> {
    let h = 2.0 * s / cellcount as f64;
    let sub: usize = if m <= 2 { 16 } else { 6 };
    let total = cellcount.pow(m as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut index = Vec::with_capacity(m);
        let mut rest = flat;
        for _ in 0..m {
            index.push(rest % cellcount);
            rest /= cellcount;
        }
        let center: Vec<f64> = index.iter().map(|&i| -s + (i as f64 + 0.5) * h).collect();
        let area = if m == 1 {
            h
        } else {
            // Sub-sampled fraction of the cell inside the disk.
            let mut inside = 0usize;
            let samples = sub.pow(m as u32);
            for k in 0..samples {
                let mut r = k;
                let mut d2 = 0.0;
                for c in &center {
                    let j = r % sub;
                    r /= sub;
                    let p = c - 0.5 * h + (j as f64 + 0.5) * h / sub as f64;
                    d2 += p * p;
                }
                if d2 < s * s {
                    inside += 1;
                }
            }
            h.powi(m as i32) * inside as f64 / samples as f64
        };
        if area > 0.0 {
            out.push((index, center, area));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExtraction {
    pub graph: QValuedGraph,
    /// Mass of atoms in the cylinder that are vertical over the base plane.
    pub unrepresented_mass: f64,
    pub cylinder_mass: f64,
    pub graph_mass: f64,
    pub report: Report,
}

struct Sample {
    cell: usize,
    offset: Vec<f64>,
    projected: f64,
}

/// Q-valued graph of `V ⌞ C(P, a, s, s)` over a `cellcount^m` grid on the
/// base disk.
///
/// Lipschitz-lemma premises are evaluated on `B̄(a, 2s/λ₂)`; the Lipschitz
/// bound and mass conservation are recorded as conclusions.
#[allow(clippy::too_many_arguments)]
pub fn extract_graph(
    v: &QuadratureVarifold,
    p: &Plane,
    a: &[f64],
    s: f64,
    lip: f64,
    cellcount: usize,
    table: &ConstantsTable,
) -> Result<GraphExtraction> {
    v.reject_empty("graph extraction")?;
    if cellcount == 0 {
        return Err(Error::InvalidParameter {
            name: "cellcount",
            reason: "must be positive".into(),
        });
    }
    let m = v.m;
    let n = v.n;
    let (tan, nrm) = p.frame();
    let h = 2.0 * s / cellcount as f64;
    let grid = cell_grid(m, cellcount, s);
    let lookup: HashMap<Vec<usize>, usize> = grid
        .iter()
        .enumerate()
        .map(|(i, (idx, _, _))| (idx.clone(), i))
        .collect();
    let cyl = Region::cylinder(a, p, s, s)?;
    let mut report = Report::new();
    let mut premises = Report::new();
    sheet_premises(&mut premises, v, a, 2.0 * s / table.lam2, p, 1.0, 0.0, 0.0, 0.0, true)?;
    // Density bounds need Q, known only after binning; keep curvature and tilt.
    for c in premises.premises.into_iter() {
        if c.name.starts_with("|H|") {
            report.premise(CheckRecord::le("|H|_m on B(a,r) <= eps7", c.value, table.eps7, 1e-12));
        } else if c.name.starts_with("sup |T_V") {
            report.premise(CheckRecord::le("sup |T_V - P| on B(a,r) <= eps7", c.value, table.eps7, 1e-12));
        } else if c.name.starts_with("a in spt") {
            report.premise(c);
        }
    }

    let mut samples: Vec<Sample> = Vec::new();
    let mut unrepresented = 0.0;
    let mut cylinder_mass = 0.0;
    for at in &v.atoms {
        if !cyl.contains(&at.x) {
            continue;
        }
        cylinder_mass += at.w;
        let d = sub(&at.x, a);
        let z: Vec<f64> = tan.iter().map(|e| crate::geometry::dot(e, &d)).collect();
        let y: Vec<f64> = nrm.iter().map(|e| crate::geometry::dot(e, &d)).collect();
        // Graph gradient of the atom's tangent plane over P.
        let (st, _) = at.s.frame();
        let e = DMatrix::from_fn(n, m, |i, j| st[j][i]);
        let tm = DMatrix::from_fn(m, n, |i, j| tan[i][j]) * &e;
        let det = tm.determinant().abs();
        if det < 1e-9 {
            unrepresented += at.w;
            continue;
        }
        let nm = DMatrix::from_fn(n - m, n, |i, j| nrm[i][j]) * &e;
        let grad = nm * tm.try_inverse().expect("nonsingular");
        let index: Vec<usize> = z
            .iter()
            .map(|c| (((c + s) / h).floor().max(0.0) as usize).min(cellcount - 1))
            .collect();
        let Some(&cell) = lookup.get(&index) else {
            unrepresented += at.w;
            continue;
        };
        let center = &grid[cell].1;
        let dz: Vec<f64> = center.iter().zip(&z).map(|(c, zi)| c - zi).collect();
        let offset: Vec<f64> = (0..n - m)
            .map(|k| y[k] + (0..m).map(|j| grad[(k, j)] * dz[j]).sum::<f64>())
            .collect();
        samples.push(Sample {
            cell,
            offset,
            projected: at.w * det,
        });
    }

    let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    for (i, smp) in samples.iter().enumerate() {
        per_cell[smp.cell].push(i);
    }
    let mut cells = Vec::with_capacity(grid.len());
    let mut z = Vec::new();
    let mut totals: Vec<u32> = Vec::new();
    for (ci, (index, center, area)) in grid.iter().enumerate() {
        let members = &per_cell[ci];
        let mut fiber = Vec::new();
        if !members.is_empty() {
            let offsets: Vec<Vec<f64>> = members.iter().map(|&i| samples[i].offset.clone()).collect();
            for group in cluster_indices(&offsets, 0.25 * h) {
                let mass: f64 = group.iter().map(|&g| samples[members[g]].projected).sum();
                let mut mean = vec![0.0; n - m];
                for &g in &group {
                    let smp = &samples[members[g]];
                    for (acc, o) in mean.iter_mut().zip(&smp.offset) {
                        *acc += smp.projected * o;
                    }
                }
                mean.iter_mut().for_each(|c| *c /= mass);
                let ratio = mass / area;
                let k = ratio.round();
                let partial = *area < 0.5 * h.powi(m as i32);
                if !partial && (k < 1.0 || (ratio - k).abs() > 0.1 * k.max(1.0)) {
                    return Err(Error::NonIntegerMultiplicity(format!(
                        "cell {index:?}: fiber mass ratio {ratio:.4}"
                    )));
                }
                if k >= 1.0 {
                    fiber.push(FiberPoint {
                        offset: mean,
                        multiplicity: k as u32,
                    });
                }
            }
            fiber.sort_by(|p, q| p.offset.partial_cmp(&q.offset).unwrap_or(std::cmp::Ordering::Equal));
        }
        if !fiber.is_empty() {
            z.push(cells.len());
            totals.push(fiber.iter().map(|f| f.multiplicity).sum());
        }
        cells.push(GraphCell {
            index: index.clone(),
            center: center.clone(),
            area: *area,
            fiber,
        });
    }
    if z.is_empty() {
        return Err(Error::EmptyGraph("no atoms project into the base disk".into()));
    }
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &t in &totals {
        *counts.entry(t).or_default() += 1;
    }
    let q = counts
        .iter()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
        .map(|(k, _)| *k)
        .unwrap_or(0);
    if let Some((i, t)) = z.iter().zip(&totals).find(|(_, t)| **t != q) {
        return Err(Error::NonIntegerMultiplicity(format!(
            "cell {:?} carries {t} sheets, expected Q = {q}",
            cells[*i].index
        )));
    }

    let mut graph = QValuedGraph {
        base: p.clone(),
        center: a.to_vec(),
        radius: s,
        cellcount,
        h,
        cells,
        z,
        lip_estimate: 0.0,
        q,
        matching_exact: true,
    };
    let (lip_estimate, exact) = lipschitz_estimate(&graph);
    graph.lip_estimate = lip_estimate;
    graph.matching_exact = exact;

    let om = unit_ball_volume(m);
    let profile = RadialProfile::new(v, a)?;
    let r = 2.0 * s / table.lam2;
    let grid_r = radius_grid(&profile, r, v.cell_size(), &GridOptions::default());
    let ratios: Vec<f64> = grid_r
        .iter()
        .map(|&t| profile.mass_closed(t) / t.powi(m as i32))
        .collect();
    let qf = q as f64;
    report.premise(CheckRecord::ge(
        "inf_t t^-m |V|(B(a,t)) >= (Q-1/2) omega",
        ratios.iter().copied().fold(f64::INFINITY, f64::min),
        (qf - 0.5) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        "sup_t t^-m |V|(B(a,t)) <= (Q+1/2) omega",
        ratios.iter().copied().fold(0.0, f64::max),
        (qf + 0.5) * om,
        1e-9,
    ));
    report.conclusion(CheckRecord::le("lip u <= L", lip_estimate, lip, 1e-12));
    let graph_mass = graph_varifold(&graph)?.total_mass();
    report.conclusion(CheckRecord::le(
        "|V|(C(s,s)) = |G_u| (relative)",
        (graph_mass - cylinder_mass).abs() / cylinder_mass.max(f64::MIN_POSITIVE),
        0.0,
        1e-2,
    ));
    report.conclusion(CheckRecord::le("vertical mass in C(s,s)", unrepresented, 0.0, 0.0));
    Ok(GraphExtraction {
        graph,
        unrepresented_mass: unrepresented,
        cylinder_mass,
        graph_mass,
        report,
    })
}

fn neighbors(graph: &QValuedGraph) -> HashMap<Vec<usize>, usize> {
    graph
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.fiber.is_empty())
        .map(|(i, c)| (c.index.clone(), i))
        .collect()
}

fn lipschitz_estimate(graph: &QValuedGraph) -> (f64, bool) {
    let lookup = neighbors(graph);
    let mut lip: f64 = 0.0;
    let mut exact = true;
    for &ci in &graph.z {
        let cell = &graph.cells[ci];
        for axis in 0..cell.index.len() {
            let mut idx = cell.index.clone();
            idx[axis] += 1;
            if let Some(&nj) = lookup.get(&idx) {
                let u: Vec<&[f64]> = expand(&cell.fiber).into_iter().map(|x| x.1).collect();
                let w: Vec<&[f64]> = expand(&graph.cells[nj].fiber).into_iter().map(|x| x.1).collect();
                let (d, _, ex) = bottleneck(&u, &w);
                exact &= ex;
                lip = lip.max(d / graph.h);
            }
        }
    }
    (lip, exact)
}

/// Varifold of a Q-valued graph: one atom per fiber point at the cell
/// center, tangent from central differences with matched neighbors.
///
/// Graph atoms carry zero curvature. Isolated cells keep the base plane as
/// tangent.
pub fn graph_varifold(graph: &QValuedGraph) -> Result<QuadratureVarifold> {
    let n = graph.base.ambient_dim();
    let m = graph.base.dim();
    let (tan, nrm) = graph.frame();
    let lookup = neighbors(graph);
    let mut atoms = Vec::new();
    for &ci in &graph.z {
        let cell = &graph.cells[ci];
        let own = expand(&cell.fiber);
        let own_pts: Vec<&[f64]> = own.iter().map(|x| x.1).collect();
        // Matched neighbor offsets along each axis, in both directions.
        let mut slopes: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; n - m]; m]; cell.fiber.len()];
        for axis in 0..m {
            let mut sum: Vec<Vec<Vec<f64>>> = vec![Vec::new(); cell.fiber.len()];
            for dir in [-1i64, 1] {
                let j = cell.index[axis] as i64 + dir;
                if j < 0 {
                    continue;
                }
                let mut idx = cell.index.clone();
                idx[axis] = j as usize;
                let Some(&nj) = lookup.get(&idx) else { continue };
                let other = expand(&graph.cells[nj].fiber);
                let other_pts: Vec<&[f64]> = other.iter().map(|x| x.1).collect();
                let (_, perm, _) = bottleneck(&own_pts, &other_pts);
                let mut done = vec![false; cell.fiber.len()];
                for (k, (fi, y)) in own.iter().enumerate() {
                    if done[*fi] || k >= perm.len() {
                        continue;
                    }
                    done[*fi] = true;
                    let yn = other_pts[perm[k]];
                    let q: Vec<f64> = yn
                        .iter()
                        .zip(y.iter())
                        .map(|(b, a)| (b - a) / (dir as f64 * graph.h))
                        .collect();
                    sum[*fi].push(q);
                }
            }
            for (fi, list) in sum.into_iter().enumerate() {
                if !list.is_empty() {
                    let k = list.len() as f64;
                    for c in 0..n - m {
                        slopes[fi][axis][c] = list.iter().map(|q| q[c]).sum::<f64>() / k;
                    }
                }
            }
        }
        for (fi, point) in cell.fiber.iter().enumerate() {
            let x = graph.embed(&cell.center, &point.offset);
            let basis: Vec<Vec<f64>> = (0..m)
                .map(|j| {
                    let mut e = tan[j].clone();
                    for (k, nk) in nrm.iter().enumerate() {
                        for (ei, ni) in e.iter_mut().zip(nk) {
                            *ei += slopes[fi][j][k] * ni;
                        }
                    }
                    e
                })
                .collect();
            let plane = Plane::from_basis(&basis)?;
            let d = DMatrix::from_fn(n - m, m, |k, j| slopes[fi][j][k]);
            let jac = (DMatrix::identity(m, m) + d.transpose() * &d).determinant().sqrt();
            let w = cell.area * point.multiplicity as f64 * jac;
            let mut atom = Atom::new(x, plane, w, graph.h * (m as f64).sqrt());
            atom.h = Some(vec![0.0; n]);
            atom.b = Some(vec![0.0; n * n * n]);
            atoms.push(atom);
        }
    }
    QuadratureVarifold::new(n, m, atoms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    pub plane: Plane,
    /// Foot of the perpendicular from the center.
    pub point: Vec<f64>,
    pub multiplicity: u32,
    pub density: f64,
    pub mass: f64,
    pub atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneDecomposition {
    pub center: Vec<f64>,
    pub r: f64,
    pub planes: Vec<AffinePlane>,
    pub residual_mass: f64,
    pub total_mass: f64,
    /// Clusters whose density is not within 5% of an integer.
    pub flagged: Vec<String>,
}

const NULL_TOL: f64 = 1e-10;
const DETECT_TOL: f64 = 1e-9;

/// Affine planes with integer multiplicities making up `V ⌞ B(a, r)`.
pub fn detect_planes(v: &QuadratureVarifold, a: &[f64], r: f64) -> Result<PlaneDecomposition> {
    let ball = Region::open_ball(a, r)?;
    let inside: Vec<usize> = (0..v.len()).filter(|&i| ball.contains(&v.atoms[i].x)).collect();
    for &i in &inside {
        let b = v.atoms[i]
            .b
            .as_ref()
            .ok_or(Error::MissingField { field: "B", atom: i })?;
        if norm(b) > NULL_TOL {
            return Err(Error::NotNullCurvature(format!("atom {i} has |B| = {:.3e}", norm(b))));
        }
    }
    let keys: Vec<Vec<f64>> = inside
        .iter()
        .map(|&i| {
            let at = &v.atoms[i];
            let mut k = at.s.flatten();
            k.extend(at.s.project_perp(&sub(&at.x, a)));
            k
        })
        .collect();
    let m = v.m;
    let om = unit_ball_volume(m);
    let mut planes = Vec::new();
    let mut flagged = Vec::new();
    let mut residual = 0.0;
    let total: f64 = inside.iter().map(|&i| v.atoms[i].w).sum();
    for group in cluster_indices(&keys, 0.5 * DETECT_TOL) {
        let idx: Vec<usize> = group.iter().map(|&g| inside[g]).collect();
        let mass: f64 = idx.iter().map(|&i| v.atoms[i].w).sum();
        let first = &v.atoms[idx[0]];
        let offset = first.s.project_perp(&sub(&first.x, a));
        let d = norm(&offset);
        let area = om * (r * r - d * d).max(0.0).powf(m as f64 / 2.0);
        let density = mass / area;
        let k = density.round();
        if k >= 1.0 && (density - k).abs() <= 0.05 * k {
            planes.push(AffinePlane {
                plane: first.s.clone(),
                point: a.iter().zip(&offset).map(|(c, o)| c + o).collect(),
                multiplicity: k as u32,
                density,
                mass,
                atoms: idx.len(),
            });
        } else {
            flagged.push(format!(
                "plane through {:?}: density {density:.4} is not an integer",
                a.iter().zip(&offset).map(|(c, o)| c + o).collect::<Vec<_>>()
            ));
            residual += mass;
        }
    }
    Ok(PlaneDecomposition {
        center: a.to_vec(),
        r,
        planes,
        residual_mass: residual,
        total_mass: total,
        flagged,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub c_prime: f64,
    pub radii: Vec<f64>,
    pub first_variation: Vec<f64>,
    pub decay_bound: Vec<f64>,
    pub blowup_distance: Vec<f64>,
    pub blowup_density: Vec<f64>,
    /// Nearest integer to the normalized density at the smallest scale.
    pub limit_density: u32,
    pub report: Report,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,first_variation,bound,blowup_distance,blowup_density\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.radii[i],
                self.first_variation[i],
                self.decay_bound[i],
                self.blowup_distance[i],
                self.blowup_density[i]
            ));
        }
        out
    }
}

/// First-variation decay and blow-up convergence towards `P` at `a`.
pub fn check_tangent_cone_decay(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    p: &Plane,
    c: f64,
    q: f64,
) -> Result<DecayReport> {
    v.reject_empty("tangent cone decay")?;
    let m = v.m;
    let (mu, lambda_const) = mu_lambda(m, q)?;
    let om = unit_ball_volume(m);
    let ball = Region::closed_ball(a, r)?;
    let mut report = Report::new();
    report.premise(CheckRecord::flag("a in spt |V|", v.support_contains(a)));
    let ratio_r = v.mass(&ball) / r.powi(m as i32);
    report.premise(CheckRecord::le("r^-m |V|(B(a,r)) <= C", ratio_r, c, 1e-12));
    let hq = v.lq_seminorm(&ball, Field::H, q)?;
    let delta = r.powf(mu) * hq;
    report.premise(CheckRecord::le("r^mu |H|_q <= C", delta, c, 1e-12));
    let mut tilt_ratio: f64 = 0.0;
    for at in &v.atoms {
        let d = distance(&at.x, a);
        if d <= r {
            let t = at.s.distance(p)?;
            if t > 0.0 {
                tilt_ratio = tilt_ratio.max(if d > 0.0 { t / d.powf(mu) } else { f64::INFINITY });
            }
        }
    }
    report.premise(CheckRecord::le(
        "sup |T_V - P| / |x-a|^mu <= C",
        tilt_ratio,
        c,
        1e-12,
    ));

    // Monotonic mass bound `t^-m |V|(B(a,t)) <= e^{Λ δ} r^-m |V|(B(a,r))`.
    let big_m = (lambda_const * delta).exp() * ratio_r;
    let c_prime = c * big_m.powf(1.0 - 1.0 / q);
    let profile = RadialProfile::new(v, a)?;
    let radii = radius_grid(&profile, r, v.cell_size(), &GridOptions::default());
    let mut by_dist: Vec<(f64, f64, f64)> = v
        .atoms
        .iter()
        .map(|at| {
            let h = at.h.as_ref().map(|h| norm(h)).unwrap_or(0.0);
            (distance(&at.x, a), at.w * h, at.w)
        })
        .collect();
    by_dist.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut first_variation = Vec::with_capacity(radii.len());
    let mut decay_bound = Vec::with_capacity(radii.len());
    let mut blowup_distance = Vec::with_capacity(radii.len());
    let mut blowup_density = Vec::with_capacity(radii.len());
    let (mut j, mut acc) = (0, 0.0);
    let mut violations = 0;
    let mut mass_excess: f64 = 0.0;
    for &t in &radii {
        while j < by_dist.len() && by_dist[j].0 <= t {
            acc += by_dist[j].1;
            j += 1;
        }
        let bound = t.powi(m as i32 - 1) * c_prime * (t / r).powf(mu);
        if acc > bound + 1e-12 {
            violations += 1;
        }
        first_variation.push(acc);
        decay_bound.push(bound);
        let ratio = profile.mass_closed(t) / t.powi(m as i32);
        mass_excess = mass_excess.max(ratio - big_m);
        blowup_density.push(ratio / om);
        let mut far: f64 = 0.0;
        for at in &v.atoms {
            let d = distance(&at.x, a);
            if d <= t {
                far = far.max(norm(&p.project_perp(&sub(&at.x, a))) / t);
            }
        }
        blowup_distance.push(far);
    }
    report.conclusion(CheckRecord::le(
        "sup_t t^-m |V|(B(a,t)) <= e^(Lambda delta) r^-m |V|(B(a,r))",
        mass_excess,
        0.0,
        1e-9,
    ));
    report.conclusion(CheckRecord::eq(
        "|dV|(B(a,t)) <= t^(m-1) C' (t/r)^mu violations",
        violations as f64,
        0.0,
        0.0,
    ));
    let first = *blowup_distance.first().unwrap_or(&0.0);
    let last = *blowup_distance.last().unwrap_or(&0.0);
    report.conclusion(CheckRecord::le(
        "blow-up distance shrinks with the scale",
        first,
        last,
        1e-12,
    ));
    let limit = *blowup_density.first().unwrap_or(&0.0);
    let rounded = limit.round();
    report.conclusion(CheckRecord::le(
        "blow-up density near an integer",
        (limit - rounded).abs(),
        0.0,
        0.05,
    ));
    Ok(DecayReport {
        c_prime,
        radii,
        first_variation,
        decay_bound,
        blowup_distance,
        blowup_density,
        limit_density: rounded.max(0.0) as u32,
        report,
    })
}

/// Closest `m`-plane to a symmetric matrix, by its top `m` eigenvectors.
pub fn nearest_plane(y: &[f64], n: usize, m: usize) -> Result<Plane> {
    if y.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: y.len(),
        });
    }
    let mat = DMatrix::from_row_slice(n, n, y);
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let basis: Vec<Vec<f64>> = order[..m]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Plane::from_basis(&basis)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzApproximation {
    pub s: f64,
    pub ladder: PartitionLadder,
    /// One graph per `Π′` component, over that component's own plane.
    pub graphs: Vec<GraphExtraction>,
    pub planes: Vec<Plane>,
    pub report: Report,
}

/// The final theorem as a pipeline: corollary partition at `λ₃′`, then a
/// Lipschitz graph per component at `s = λ₃ r / 2`.
pub fn lipschitz_approximation(
    v: &QuadratureVarifold,
    a: &[f64],
    r: f64,
    lip: f64,
    cellcount: usize,
    table: &ConstantsTable,
) -> Result<LipschitzApproximation> {
    v.reject_empty("lipschitz approximation")?;
    let v = if v.atoms.iter().all(|at| at.f.is_some() && at.df.is_some()) {
        v.clone()
    } else {
        v.with_tangent_field()
    };
    let m = v.m;
    let (mu, _) = mu_lambda(m, table.params.q)?;
    let qf = table.params.big_q as f64;
    let om = unit_ball_volume(m);
    let ball = Region::closed_ball(a, r)?;
    let mut report = Report::new();
    let profile = RadialProfile::new(&v, a)?;
    let s0 = profile.snap((16.0 * v.cell_size()).min(0.5 * r), &profile.distinct_distances());
    report.premise(CheckRecord::eq(
        "density at a = Q",
        profile.mass_closed(s0) / s0.powi(m as i32) / om,
        qf,
        0.05,
    ));
    report.premise(CheckRecord::le(
        "r^-m |V|(B(a,r)) <= (Q+eps8) omega",
        v.mass(&ball) / r.powi(m as i32),
        (qf + table.eps8) * om,
        1e-9,
    ));
    report.premise(CheckRecord::le(
        "r^mu |B|_q <= eps8",
        r.powf(mu) * v.lq_seminorm(&ball, Field::B, table.params.q)?,
        table.eps8,
        1e-12,
    ));
    let ladder = nested_partition(&v, a, r, table.lam3_prime, 1, table)?;
    let s = 0.5 * table.lam3 * r;
    let mut graphs = Vec::new();
    let mut planes: Vec<Plane> = Vec::new();
    let mut total_q = 0;
    if let Some(level) = ladder.levels.first() {
        for comp in level.components.iter().filter(|c| c.meets_half_ball) {
            let w = v.select("component", &comp.atoms);
            let Some(y) = comp
                .limit_value
                .clone()
                .or_else(|| ladder.upsilon.first().cloned())
                .or_else(|| barycenter(&w))
            else {
                continue;
            };
            let plane = nearest_plane(&y, v.n, m)?;
            let g = extract_graph(&w, &plane, a, s, lip, 8, table).or_else(|_| {
                extract_graph(&w, &plane, a, s, lip, cellcount, table)
            });
            let g = match g {
                Ok(g) => g,
                Err(e) => {
                    report.conclusion(CheckRecord::flag(format!("component {} graph: {e}", comp.id), false));
                    continue;
                }
            };
            total_q += g.graph.q;
            report.absorb(&format!("component {}: ", comp.id), g.report.clone());
            if !planes.iter().any(|p| p.distance(&plane).map(|d| d < 1e-9).unwrap_or(false)) {
                planes.push(plane);
            }
            graphs.push(g);
        }
    }
    report.conclusion(CheckRecord::le("|Upsilon| <= Q", planes.len() as f64, qf, 0.0));
    report.conclusion(CheckRecord::eq("sum Q_P = Q", total_q as f64, qf, 0.0));
    Ok(LipschitzApproximation {
        s,
        ladder,
        graphs,
        planes,
        report,
    })
}

fn barycenter(v: &QuadratureVarifold) -> Option<Vec<f64>> {
    let mass = v.total_mass();
    if !(mass > 0.0) {
        return None;
    }
    let mut acc = vec![0.0; v.n * v.n];
    for at in &v.atoms {
        for (s, y) in acc.iter_mut().zip(at.s.flatten()) {
            *s += at.w * y;
        }
    }
    Some(acc.into_iter().map(|s| s / mass).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantParams;
    use crate::varifold::scene::tests::{circle, line, lines};
    use crate::varifold::{build_scene, GraphFn, Primitive, SceneSpec, Shape};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn table(big_q: u32) -> ConstantsTable {
        ConstantsTable::build(ConstantParams::new(2, 1, 2.0, big_q, 1.0)).unwrap()
    }

    fn x_axis() -> Plane {
        Plane::line_2d(0.0)
    }

    fn segments(specs: &[([f64; 2], [f64; 2], u32)], res: usize) -> QuadratureVarifold {
        build_scene(&SceneSpec::new(
            2,
            1,
            specs
                .iter()
                .map(|(s, e, k)| {
                    Primitive::new(
                        Shape::Segment {
                            start: s.to_vec(),
                            end: e.to_vec(),
                        },
                        res,
                    )
                    .with_multiplicity(*k)
                })
                .collect(),
        ))
        .unwrap()
    }

    #[test]
    fn tangent_field_examples() {
        let l = tangent_field(&line(&[0.0, 0.0], 0.4, 1.0, 64));
        assert!(l.values.iter().all(|y| *y == l.values[0]));
        let c = tangent_field(&circle(1.0, 400));
        let d = distance(&c.values[0], &c.values[100]);
        assert!((d - 2f64.sqrt()).abs() < 1e-12, "{d}");
        let patch = build_scene(&SceneSpec::new(
            3,
            2,
            vec![Primitive::new(
                Shape::PlanePatch {
                    basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                    center: vec![0.0; 3],
                    extent: 1.0,
                },
                8,
            )],
        ))
        .unwrap();
        let f = tangent_field(&patch);
        assert!(f.values.iter().all(|y| distance(y, &f.values[0]) < 1e-15));
        let trace: f64 = (0..3).map(|i| f.values[0][i * 3 + i]).sum();
        assert!((trace - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conical_examples() {
        let t = table(1);
        let l = line(&[0.0, 0.0], 0.0, 1.0, 2048);
        let rep = check_conical(&l, &[0.0, 0.0], 0.5, &x_axis(), 0.3, 0.5, &t).unwrap();
        assert_eq!(rep.offending_mass, 0.0);
        assert!(rep.report.passed());

        // tan θ = 0.6 > σ = 0.3
        let tilted = line(&[0.0, 0.0], 0.6f64.atan(), 1.0, 2048);
        let rep = check_conical(&tilted, &[0.0, 0.0], 0.5, &x_axis(), 0.3, 0.5, &t).unwrap();
        assert!(rep.offending_mass > 0.0);
        assert!(!rep.report.conclusions_hold());
        assert!(rep.report.failed_premises().any(|c| c.name.contains("mean |S - P|")));

        // |y| = c x² ≤ σ|x| on |x| ≤ σ/c.
        let c = 0.5;
        let curve = build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::graph(GraphFn::Quadratic { c }, -0.1, 0.1, 4000)],
        ))
        .unwrap();
        let rep = check_conical(&curve, &[0.0, 0.0], 0.05, &x_axis(), 0.5, 0.5, &t).unwrap();
        assert_eq!(rep.offending_mass, 0.0);
        assert!(rep.report.passed(), "{:?}", rep.report.failed_premises().collect::<Vec<_>>());
    }

    #[test]
    fn cylinder_examples() {
        let t = table(1);
        let l = line(&[0.0, 0.0], 0.0, 1.0, 1 << 14);
        let rep = check_cylinder(&l, &[0.0, 0.0], 0.5, &x_axis(), 0.5, 0.5, 0.125, &t).unwrap();
        // Closed-form: the cylinder holds a chord of length 2s.
        assert!((rep.cylinder_ratio - 2.0).abs() < 2.0 * l.cell_size() / rep.s);
        assert_eq!(rep.shell_mass, 0.0);
        assert!(rep.neighborhood_ratio <= 4.0 * 1.5 * 2.0);
        assert!(rep.report.passed(), "{:?}", rep.report);

        let t2 = table(2);
        let s = 0.5 * rep.lam1 * 0.5;
        let two = segments(&[([-1.0, 0.0], [1.0, 0.0], 1), ([-1.0, 0.1 * s], [1.0, 0.1 * s], 1)], 1 << 14);
        let rep2 = check_cylinder(&two, &[0.0, 0.0], 0.5, &x_axis(), 0.5, 0.5, 0.125, &t2).unwrap();
        assert!((rep2.cylinder_ratio * rep2.s - 4.0 * rep2.s).abs() < 4.0 * two.cell_size());
        assert!(rep2.report.failed_premises().count() > 0);

        let steep = line(&[0.0, 0.0], 1.2, 1.0, 1 << 12);
        let rep3 = check_cylinder(&steep, &[0.0, 0.0], 0.5, &x_axis(), 0.5, 0.5, 0.125, &t).unwrap();
        assert!(rep3.shell_mass > 0.0);
        assert!(rep3.report.find("(2) shell mass = 0").map(|c| !c.holds).unwrap());
    }

    #[test]
    fn graph_of_parallel_lines() {
        let t = table(2);
        let d = 0.2;
        // Atom cells of width 2/2048 tile [-0.5, 0.5] exactly.
        let v = segments(&[([-1.0, 0.0], [1.0, 0.0], 1), ([-1.0, d], [1.0, d], 1)], 2048);
        let g = extract_graph(&v, &x_axis(), &[0.0, 0.0], 0.5, 1.0, 32, &t).unwrap();
        assert_eq!(g.graph.q, 2);
        assert_eq!(g.graph.lip_estimate, 0.0);
        assert_eq!(g.graph.z.len(), 32);
        for &c in &g.graph.z {
            let f = &g.graph.cells[c].fiber;
            assert_eq!(f.len(), 2);
            assert!((f[1].offset[0] - f[0].offset[0]).abs() - d < 1e-12);
        }
        assert!((g.graph_mass - g.cylinder_mass).abs() < 1e-6);
    }

    #[test]
    fn graph_of_tilted_and_double_lines() {
        let t = table(1);
        let v = line(&[0.0, 0.0], 0.5f64.atan(), 2.0, 4000);
        let g = extract_graph(&v, &x_axis(), &[0.0, 0.0], 0.5, 1.0, 20, &t).unwrap();
        assert_eq!(g.graph.q, 1);
        assert!((g.graph.lip_estimate - 0.5).abs() <= 2.0 / 20.0, "{}", g.graph.lip_estimate);
        assert!((g.graph_mass - g.cylinder_mass).abs() / g.cylinder_mass < 1e-2);

        let t2 = table(2);
        let double = segments(&[([-1.0, 0.0], [1.0, 0.0], 2)], 2048);
        let g = extract_graph(&double, &x_axis(), &[0.0, 0.0], 0.5, 1.0, 16, &t2).unwrap();
        assert_eq!(g.graph.q, 2);
        assert!(g.graph.z.iter().all(|&c| g.graph.cells[c].fiber.len() == 1
            && g.graph.cells[c].fiber[0].multiplicity == 2));
    }

    #[test]
    fn graph_extraction_errors() {
        let t = table(1);
        let v = line(&[5.0, 5.0], 0.0, 0.1, 64);
        assert!(matches!(
            extract_graph(&v, &x_axis(), &[0.0, 0.0], 0.5, 1.0, 8, &t),
            Err(Error::EmptyGraph(_))
        ));
        // A half-covered cell has a mass ratio near 1/2.
        let half = segments(&[([-0.5, 0.0], [0.03125, 0.0], 1)], 4096);
        assert!(matches!(
            extract_graph(&half, &x_axis(), &[0.0, 0.0], 0.5, 1.0, 16, &t),
            Err(Error::NonIntegerMultiplicity(_))
        ));
    }

    fn affine_graph(q: usize, slopes: &[f64], offsets: &[f64], cells: usize) -> QValuedGraph {
        let s = 0.5;
        let h = 2.0 * s / cells as f64;
        let mut out = Vec::new();
        for i in 0..cells {
            let zc = -s + (i as f64 + 0.5) * h;
            let mut fiber: Vec<FiberPoint> = (0..q)
                .map(|k| FiberPoint {
                    offset: vec![offsets[k] + slopes[k] * zc],
                    multiplicity: 1,
                })
                .collect();
            fiber.sort_by(|a, b| a.offset.partial_cmp(&b.offset).unwrap());
            out.push(GraphCell {
                index: vec![i],
                center: vec![zc],
                area: h,
                fiber,
            });
        }
        QValuedGraph {
            base: x_axis(),
            center: vec![0.0, 0.0],
            radius: s,
            cellcount: cells,
            h,
            z: (0..cells).collect(),
            cells: out,
            lip_estimate: 0.0,
            q: q as u32,
            matching_exact: true,
        }
    }

    #[test]
    fn graph_varifold_masses() {
        let g = affine_graph(1, &[0.0], &[0.0], 10);
        let v = graph_varifold(&g).unwrap();
        assert!((v.total_mass() - 1.0).abs() < 1e-12);
        let g = affine_graph(1, &[0.7], &[0.1], 40);
        let v = graph_varifold(&g).unwrap();
        assert!((v.total_mass() - (1.0f64 + 0.49).sqrt()).abs() < 1e-2 * 1.3);
        let g = affine_graph(2, &[0.0, 0.0], &[-0.2, 0.2], 10);
        assert!((graph_varifold(&g).unwrap().total_mass() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detect_three_lines() {
        let v = segments(
            &[
                ([-6.0, 0.0], [6.0, 0.0], 1),
                ([-6.0, 1.0], [6.0, 1.0], 2),
                ([0.0, -6.0], [0.0, 6.0], 3),
            ],
            8192,
        );
        let dec = detect_planes(&v, &[0.0, 0.0], 5.0).unwrap();
        let mut ks: Vec<u32> = dec.planes.iter().map(|p| p.multiplicity).collect();
        ks.sort();
        assert_eq!(ks, vec![1, 2, 3]);
        assert_eq!(dec.residual_mass, 0.0);
        let sum: f64 = dec.planes.iter().map(|p| p.mass).sum::<f64>() + dec.residual_mass;
        assert!((sum - dec.total_mass).abs() <= 1e-12 * dec.total_mass);

        let single = line(&[0.0, 0.0], 0.3, 2.0, 512);
        let dec = detect_planes(&single, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(dec.planes.len(), 1);
        assert_eq!(dec.planes[0].multiplicity, 1);
        assert!(matches!(
            detect_planes(&circle(1.0, 64), &[1.0, 0.0], 0.5),
            Err(Error::NotNullCurvature(_))
        ));
    }

    #[test]
    fn annulus_segment_is_only_locally_planar() {
        let v = segments(&[([1.0, 0.0], [3.0, 0.0], 1)], 4000);
        for cx in [1.5, 2.0, 2.5] {
            let dec = detect_planes(&v, &[cx, 0.0], 0.4).unwrap();
            assert_eq!(dec.planes.len(), 1);
            assert_eq!(dec.planes[0].multiplicity, 1);
        }
        let global = detect_planes(&v, &[0.0, 0.0], 3.0).unwrap();
        assert!(global.planes.is_empty());
        assert_eq!(global.flagged.len(), 1);
    }

    fn power_curve(c: f64, half: f64, res: usize) -> QuadratureVarifold {
        build_scene(&SceneSpec::new(
            2,
            1,
            vec![Primitive::graph(GraphFn::AbsPower { c, p: 1.5 }, -half, half, res)],
        ))
        .unwrap()
    }

    #[test]
    fn decay_examples() {
        let l = line(&[0.0, 0.0], 0.0, 1.0, 2048);
        let rep = check_tangent_cone_decay(&l, &[0.0, 0.0], 0.5, &x_axis(), 3.0, 2.0).unwrap();
        assert!(rep.first_variation.iter().all(|&x| x == 0.0));
        assert!(rep.blowup_distance.iter().all(|&x| x == 0.0));
        assert_eq!(rep.limit_density, 1);
        assert!(rep.report.passed());

        let v = power_curve(0.3, 1.0, 20000);
        let rep = check_tangent_cone_decay(&v, &[0.0, 0.0], 0.5, &x_axis(), 3.0, 2.0).unwrap();
        assert!(rep.report.passed(), "{:?}", rep.report);
        for (t, d) in rep.radii.iter().zip(&rep.blowup_distance) {
            assert!(*d <= 0.3 * t.sqrt() + 1e-12);
        }
        assert_eq!(rep.limit_density, 1);

        let cross = lines(&[0.0, FRAC_PI_2], 1.0, 2048);
        let rep = check_tangent_cone_decay(&cross, &[0.0, 0.0], 0.5, &x_axis(), 3.0, 2.0).unwrap();
        assert!(!rep.report.premises_hold());
    }

    #[test]
    fn nearest_plane_recovers_projection() {
        let p = Plane::line_2d(0.7);
        let got = nearest_plane(&p.flatten(), 2, 1).unwrap();
        assert!(got.distance(&p).unwrap() < 1e-12);
        let avg: Vec<f64> = Plane::line_2d(0.1)
            .flatten()
            .iter()
            .zip(Plane::line_2d(-0.1).flatten())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        assert!(nearest_plane(&avg, 2, 1).unwrap().distance(&x_axis()).unwrap() < 1e-12);
    }

    #[test]
    fn theorem_pipeline_on_a_line() {
        let t = table(1);
        let v = line(&[0.0, 0.0], 0.2, 1.0, 1 << 14);
        let out = lipschitz_approximation(&v, &[0.0, 0.0], 0.5, 1.0, 8, &t).unwrap();
        assert_eq!(out.planes.len(), 1);
        assert!(out.planes[0].distance(&Plane::line_2d(0.2)).unwrap() < 1e-12);
        assert_eq!(out.graphs[0].graph.q, 1);
        assert!(out.report.conclusions_hold(), "{:?}", out.report);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_affine_graphs(
            q in 1usize..4,
            slopes in prop::collection::vec(-0.6f64..0.6, 3),
            offsets in prop::collection::vec(-0.1f64..0.1, 3),
        ) {
            let t = table(q as u32);
            let cells = 16;
            let g = affine_graph(q, &slopes, &offsets, cells);
            let v = graph_varifold(&g).unwrap();
            let back = extract_graph(&v, &x_axis(), &[0.0, 0.0], 0.5, 10.0, cells, &t).unwrap();
            prop_assert_eq!(back.graph.q, q as u32);
            for (a, b) in g.cells.iter().zip(&back.graph.cells) {
                let u: Vec<&[f64]> = expand(&a.fiber).into_iter().map(|x| x.1).collect();
                let w: Vec<&[f64]> = expand(&b.fiber).into_iter().map(|x| x.1).collect();
                prop_assert!(bottleneck(&u, &w).0 <= g.h);
            }
        }

        #[test]
        fn lip_estimate_on_parallel_sheets(
            slope in -0.6f64..0.6,
            gap in 0.05f64..0.1,
        ) {
            let t = table(2);
            let cells = 20;
            let g = affine_graph(2, &[slope, slope], &[0.0, gap], cells);
            let v = graph_varifold(&g).unwrap();
            let back = extract_graph(&v, &x_axis(), &[0.0, 0.0], 0.5, 10.0, cells, &t).unwrap();
            prop_assert!((back.graph.lip_estimate - slope.abs()).abs() <= g.h);
        }
    }
}
