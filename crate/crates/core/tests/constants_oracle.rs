//! Independent recomputation of ε₈ from its defining inequalities.

use varifold_lab_core::constants::STRICT;
use varifold_lab_core::{ConstantParams, ConstantsTable};

/// Largest root of an increasing function on `(0, hi]` by Newton steps
/// from a coarse scan, with a numerical derivative.
fn largest_feasible(g: impl Fn(f64) -> f64, hi: f64) -> f64 {
    if g(hi) <= 0.0 {
        return hi;
    }
    let mut x = hi;
    let mut k = 0;
    while g(x) > 0.0 {
        x *= 0.5;
        k += 1;
        assert!(k < 200, "no feasible point");
    }
    for _ in 0..100 {
        let h = 1e-7 * x.max(1e-12);
        let d = (g(x + h) - g(x - h)) / (2.0 * h);
        let next = x - g(x) / d;
        if (next - x).abs() < 1e-16 {
            break;
        }
        x = next;
    }
    x
}

fn oracle(t: &ConstantsTable) -> f64 {
    let p = &t.params;
    let (m, qf) = (p.m as f64, p.big_q as f64);
    let lam = t.lambda_const;
    let e3 = t.eps3;
    let mut bound = [
        e3 / 2.0,
        t.eps4 / m,
        0.25,
        t.eps7 * t.lam3_prime.powf(t.mu) / t.c1,
        m * (t.eps7 / ((qf + 0.5) * t.omega).powf(t.mu)).powf(1.0 / m),
        // Third exponential condition in closed form.
        (qf / (qf - 0.375)).ln() / lam,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    bound = bound.min(largest_feasible(|e| lam * e - ((qf + e3) / (qf + e)).ln(), 1.0));
    bound = bound.min(largest_feasible(
        |e| lam * e - ((qf + 1.5 * e) / (qf + e) * 8.0 * qf / (8.0 * qf - 1.0)).ln(),
        1.0,
    ));
    STRICT * bound
}

#[test]
fn eps8_matches_oracle() {
    for (n, m, q, big_q, gamma) in [
        (2, 1, 2.0, 1, 1.0),
        (2, 1, 2.0, 2, 1.0),
        (3, 2, 4.0, 1, 1.0),
        (3, 2, 3.0, 3, 0.5),
        (5, 3, 6.0, 2, 2.0),
    ] {
        let t = ConstantsTable::build(ConstantParams::new(n, m, q, big_q, gamma)).unwrap();
        let o = oracle(&t);
        assert!((t.eps8 - o).abs() <= 1e-9 * o, "({n},{m},{q},{big_q}): {} vs {o}", t.eps8);
        assert!(t.eps8 > 0.0 && t.eps8 < t.eps3 / 2.0);
    }
}

#[test]
fn eps8_regression_curve_case() {
    let t = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 1, 1.0)).unwrap();
    let o = oracle(&t);
    assert!((t.eps8 - o).abs() <= 1e-12);
    // λ₃′ = min(λ₂, ε₄/(1+ε₄)) and λ₃ = λ₂ λ₃′
    assert_eq!(t.lam3_prime, t.lam2.min(t.eps4 / (1.0 + t.eps4)));
    assert_eq!(t.lam3, t.lam2 * t.lam3_prime);
}
