//! Deterministic SVG figures for planar scenes and partition ladders.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Result};
use varifold_lab_core::{PartitionLadder, QuadratureVarifold};

const PANEL: f64 = 240.0;
const BINS: f64 = 120.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn planar(v: &QuadratureVarifold) -> Result<()> {
    if v.n != 2 {
        bail!("rendering limited to planar scenes (n = {})", v.n);
    }
    Ok(())
}

fn direction(v: &QuadratureVarifold, i: usize) -> [f64; 2] {
    let (t, _) = v.atoms[i].s.frame();
    [t[0][0], t[0][1]]
}

/// One stroke per occupied bin and class, keeping the lowest atom index.
fn thin(v: &QuadratureVarifold, center: [f64; 2], half: f64, class: impl Fn(usize) -> i64) -> Vec<(usize, i64)> {
    let bin = 2.0 * half / BINS;
    let mut seen: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    for (i, a) in v.atoms.iter().enumerate() {
        let (dx, dy) = (a.x[0] - center[0], a.x[1] - center[1]);
        if dx.abs() > half || dy.abs() > half {
            continue;
        }
        let key = ((dx / bin).floor() as i64, (dy / bin).floor() as i64, class(i));
        seen.entry(key).or_insert(i);
    }
    let mut out: Vec<(usize, i64)> = seen.into_iter().map(|((_, _, c), i)| (i, c)).collect();
    out.sort();
    out
}

struct Panel {
    x0: f64,
    center: [f64; 2],
    half: f64,
}

impl Panel {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let s = PANEL / (2.0 * self.half);
        (
            self.x0 + (p[0] - self.center[0] + self.half) * s,
            (self.center[1] + self.half - p[1]) * s,
        )
    }

    fn stroke(&self, out: &mut String, v: &QuadratureVarifold, i: usize, color: &str, dotted: bool) {
        let d = direction(v, i);
        let len = 0.75 * 2.0 * self.half / BINS;
        let x = &v.atoms[i].x;
        let (ax, ay) = self.map([x[0] - len * d[0], x[1] - len * d[1]]);
        let (bx, by) = self.map([x[0] + len * d[0], x[1] + len * d[1]]);
        let dash = if dotted { " stroke-dasharray=\"1 2\"" } else { "" };
        let _ = writeln!(
            out,
            "<line x1=\"{ax:.3}\" y1=\"{ay:.3}\" x2=\"{bx:.3}\" y2=\"{by:.3}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>"
        );
    }

    fn circle(&self, out: &mut String, radius: f64) {
        let (cx, cy) = self.map(self.center);
        let rr = radius * PANEL / (2.0 * self.half);
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{rr:.3}\" fill=\"none\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>"
        );
    }
}

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Every atom as a short tangent stroke, fitted to the bounding box.
pub fn render_scene_svg(v: &QuadratureVarifold) -> Result<String> {
    planar(v)?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for a in &v.atoms {
        for k in 0..2 {
            lo[k] = lo[k].min(a.x[k]);
            hi[k] = hi[k].max(a.x[k]);
        }
    }
    if v.atoms.is_empty() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = 0.55 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let panel = Panel { x0: 0.0, center, half };
    let mut out = header(PANEL, PANEL);
    for (i, _) in thin(v, center, half, |_| 0) {
        panel.stroke(&mut out, v, i, "#000", false);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One panel per level: components in color inside `B(a, r_k)`, dotted grey
/// outside, dashed circles at `r_k` and `r_k / 2`.
pub fn render_ladder_svg(v: &QuadratureVarifold, ladder: &PartitionLadder) -> Result<String> {
    planar(v)?;
    let a = [ladder.center[0], ladder.center[1]];
    let levels = ladder.levels.len().max(1);
    let mut out = header(PANEL * levels as f64, PANEL + 20.0);
    for (p, level) in ladder.levels.iter().enumerate() {
        let mut owner = vec![-1i64; v.len()];
        for c in &level.components {
            for &i in &c.atoms {
                owner[i] = c.id as i64;
            }
        }
        let panel = Panel {
            x0: p as f64 * PANEL,
            center: a,
            half: 1.6 * level.radius,
        };
        for (i, c) in thin(v, a, panel.half, |i| owner[i]) {
            if c < 0 {
                panel.stroke(&mut out, v, i, "#999", true);
            } else {
                panel.stroke(&mut out, v, i, PALETTE[c as usize % PALETTE.len()], false);
            }
        }
        panel.circle(&mut out, level.radius);
        panel.circle(&mut out, 0.5 * level.radius);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\">k = {}, |Pi'| = {}</text>",
            p as f64 * PANEL + 6.0,
            PANEL + 14.0,
            level.k,
            level.pi_prime()
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use varifold_lab_core::{build_scene, nested_partition, ConstantParams, ConstantsTable, Primitive, SceneSpec};

    fn scene(angles: &[f64]) -> QuadratureVarifold {
        let prims = angles
            .iter()
            .map(|&t| Primitive::line_2d([0.0, 0.0], t, 1.0, 2048))
            .collect();
        build_scene(&SceneSpec::new(2, 1, prims)).unwrap().with_tangent_field()
    }

    fn ladder(v: &QuadratureVarifold, big_q: u32) -> PartitionLadder {
        let t = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, big_q, 1.0)).unwrap();
        nested_partition(v, &[0.0, 0.0], 1.0, 0.3, 2, &t).unwrap()
    }

    #[test]
    fn single_line_ladder() {
        let v = scene(&[0.0]);
        let svg = render_ladder_svg(&v, &ladder(&v, 1)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains(PALETTE[0]));
        assert!(!svg.contains(PALETTE[1]));
    }

    #[test]
    fn two_components_two_colors() {
        let v = scene(&[0.0, std::f64::consts::FRAC_PI_2]);
        let l = ladder(&v, 2);
        let svg = render_ladder_svg(&v, &l).unwrap();
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
        assert_eq!(svg, render_ladder_svg(&v, &l).unwrap());
    }

    #[test]
    fn rejects_space_scenes() {
        let v = build_scene(&SceneSpec::new(
            3,
            1,
            vec![Primitive::new(
                varifold_lab_core::Shape::Segment {
                    start: vec![0.0; 3],
                    end: vec![1.0, 0.0, 0.0],
                },
                8,
            )],
        ))
        .unwrap();
        let err = render_scene_svg(&v).unwrap_err().to_string();
        assert!(err.contains("rendering limited to planar scenes"));
    }
}
