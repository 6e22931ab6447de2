//! Explicit constant chains. Strict inequalities are met with `0.99` of the
//! supremum, equalities exactly; every solved value is substituted back into
//! its defining inequality when a [`ConstantsTable`] is built.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::unit_ball_volume;
use crate::report::CheckRecord;

/// Factor realizing a strict inequality below its supremum.
pub const STRICT: f64 = 0.99;
/// Tolerance for substitution self-checks.
pub const SELF_CHECK_TOL: f64 = 1e-12;
pub const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Solved,
    Configured,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive, got {v}"),
        })
    }
}

/// `μ = 1 - m/q` and `Λ = 2 ω_m^{-1/q} / μ`.
pub fn mu_lambda(m: usize, q: f64) -> Result<(f64, f64)> {
    if m == 0 || !(q > m as f64) {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("need q > m >= 1, got q = {q}, m = {m}"),
        });
    }
    let mu = 1.0 - m as f64 / q;
    let lambda = 2.0 * unit_ball_volume(m).powf(-1.0 / q) / mu;
    Ok((mu, lambda))
}

/// `(ε₀, ε₁)` for the center-support lemma.
pub fn solve_support_constants(m: usize, q: f64, big_q: u32) -> Result<(f64, f64)> {
    if big_q == 0 {
        return Err(Error::InvalidParameter {
            name: "Q",
            reason: "must be a positive integer".into(),
        });
    }
    let (_, lambda) = mu_lambda(m, q)?;
    let a = 2f64.powi(-(m as i32 + 1));
    let qf = big_q as f64;
    let eps0 = a / (1.0 + a / qf);
    let eps1 = (1.0 + a / qf).min(2.0 / 3f64.sqrt()).ln() / lambda;
    Ok((eps0, eps1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConstants {
    pub big_m: usize,
    pub eps2: f64,
    pub c0: f64,
}

pub fn solve_partition_constants(
    dim_y: usize,
    n: usize,
    m: usize,
    q: f64,
    big_q: u32,
    gamma: f64,
) -> Result<PartitionConstants> {
    positive("gamma", gamma)?;
    let (mu, _) = mu_lambda(m, q)?;
    let qf = big_q as f64;
    // 1 - 1/M > (Q+1/4)/(Q+1/2)  <=>  M > 4Q + 2
    let big_m = (4 * big_q as usize + 3).max(dim_y + 1).max(n + 1);
    let eps2 = STRICT
        * 0.5f64
            .min(1.0 / gamma)
            .min(((qf + 1.0) / (qf + 0.5)).powf(1.0 / m as f64) - 1.0);
    let c0 = if m == 1 {
        2.0 * qf * gamma
    } else {
        2.0 * qf * gamma.powf(m as f64 / mu)
    };
    Ok(PartitionConstants { big_m, eps2, c0 })
}

/// `(ε₃, ε₄, C₁)` for the partition corollary.
pub fn solve_corollary_constants(
    m: usize,
    q: f64,
    big_q: u32,
    eps0: Option<f64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    c0: Option<f64>,
) -> Result<(f64, f64, f64)> {
    let eps0 = eps0.ok_or(Error::MissingPrerequisite("eps0"))?;
    let eps1 = eps1.ok_or(Error::MissingPrerequisite("eps1"))?;
    let eps2 = eps2.ok_or(Error::MissingPrerequisite("eps2"))?;
    let c0 = c0.ok_or(Error::MissingPrerequisite("C0"))?;
    let (mu, lambda) = mu_lambda(m, q)?;
    let qf = big_q as f64;
    let omega = unit_ball_volume(m);
    let eps3 = STRICT * (1.0 / 8.0f64).min(eps0);
    let eps4 = STRICT
        * eps1
            .min(((qf + 0.25) / (qf + 0.125)).ln() / lambda)
            .min(eps2 * ((qf + 0.125) * omega).powf(-mu / m as f64))
            .min(0.5);
    let c1 = if m > 1 {
        c0
    } else {
        ((qf + 0.25) * omega).powf(mu) * c0
    };
    Ok((eps3, eps4, c1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCylinderConstants {
    pub lam0: f64,
    pub tau0: f64,
    pub sigma0: f64,
    pub lam1: f64,
}

/// Bisection for an increasing function with `f(lo) <= 0 <= f(hi)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::RootNotBracketed(format!(
            "f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `x` in `(0, hi]` such that `g <= 0` on `[0, x]`, assuming
/// `g(0) < 0`. Located by a uniform scan and refined by bisection.
pub fn sup_feasible(g: impl Fn(f64) -> f64, hi: f64) -> Result<f64> {
    if g(0.0) >= 0.0 {
        return Err(Error::RootNotBracketed("condition fails at 0".into()));
    }
    const STEPS: usize = 4096;
    let mut prev = 0.0;
    for k in 1..=STEPS {
        let x = hi * k as f64 / STEPS as f64;
        if g(x) > 0.0 {
            return bisect(&g, prev, x, BISECTION_TOL * hi.max(1.0));
        }
        prev = x;
    }
    Ok(hi)
}

pub fn solve_cone_cylinder_constants(
    m: usize,
    big_q: u32,
    delta2: f64,
    delta3: f64,
) -> Result<ConeCylinderConstants> {
    if !(delta2 > 0.0 && delta2 < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta2",
            reason: format!("must lie in (0,1), got {delta2}"),
        });
    }
    if !(delta3 > 0.0 && delta3 < 0.25) {
        return Err(Error::InvalidParameter {
            name: "delta3",
            reason: format!("must lie in (0,1/4), got {delta3}"),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be positive".into(),
        });
    }
    let mf = m as f64;
    let qf = big_q as f64;
    let target = 0.5 * (1.0 + delta2);
    let lam0 = (1.0 - target.powf(2.0 / mf)).sqrt();
    let phi = |t: f64| (1.0 - (1.0 + t).powi(-2)).powf(mf / 2.0) - target;
    // monotone on [0, 10]
    let probes: Vec<f64> = (0..=100).map(|k| phi(0.1 * k as f64)).collect();
    if probes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::SelfCheck("tau0 equation is not monotone on [0,10]".into()));
    }
    let tau0 = bisect(phi, 0.0, 10.0, BISECTION_TOL)?;
    let ratio = (qf + target) / (qf + delta2);
    let sigma0 = STRICT * (1.0 - 2.0 * delta3).min((ratio.powf(2.0 / mf) - 1.0).sqrt());
    let lam1 = lam0
        .min(2.0 / (2.0 + 2f64.sqrt()))
        .min(2.0 / (1.0 + sigma0 * sigma0).sqrt());
    Ok(ConeCylinderConstants {
        lam0,
        tau0,
        sigma0,
        lam1,
    })
}

/// `λ₂` of the Lipschitz lemma at `δ = 1/2`: `λ₁` with `δ₂ = 1/4`, `δ₃ = 1/8`,
/// capped below `1/2`.
pub fn solve_lambda2(m: usize, big_q: u32) -> Result<f64> {
    let cc = solve_cone_cylinder_constants(m, big_q, 0.25, 0.125)?;
    Ok(cc.lam1.min(STRICT * 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainConstants {
    pub lam3_prime: f64,
    pub lam3: f64,
    pub eps8: f64,
}

/// The three exponential conditions on `ε₈`, as `g(ε) <= 0`.
pub fn eps8_exponential_conditions(lambda: f64, big_q: u32, eps3: f64) -> [Box<dyn Fn(f64) -> f64>; 3] {
    let qf = big_q as f64;
    [
        Box::new(move |e: f64| lambda * e - ((qf + eps3) / (qf + e)).ln()),
        Box::new(move |e: f64| {
            lambda * e - ((qf + 1.5 * e) / (qf + e) * 8.0 * qf / (8.0 * qf - 1.0)).ln()
        }),
        Box::new(move |e: f64| lambda * e - (qf / (qf - 0.375)).ln()),
    ]
}

#[allow(clippy::too_many_arguments)]
pub fn solve_main_constants(
    m: usize,
    q: f64,
    big_q: u32,
    eps3: Option<f64>,
    eps4: Option<f64>,
    c1: Option<f64>,
    eps7: Option<f64>,
    lam2: Option<f64>,
) -> Result<MainConstants> {
    let eps3 = eps3.ok_or(Error::MissingPrerequisite("eps3"))?;
    let eps4 = eps4.ok_or(Error::MissingPrerequisite("eps4"))?;
    let c1 = c1.ok_or(Error::MissingPrerequisite("C1"))?;
    let eps7 = eps7.ok_or(Error::MissingPrerequisite("eps7"))?;
    let lam2 = lam2.ok_or(Error::MissingPrerequisite("lam2"))?;
    positive("eps7", eps7)?;
    let (mu, lambda) = mu_lambda(m, q)?;
    let mf = m as f64;
    let qf = big_q as f64;
    let omega = unit_ball_volume(m);
    let lam3_prime = lam2.min(eps4 / (1.0 + eps4));
    let mut bound = (eps3 / 2.0)
        .min(eps4 / mf)
        .min(0.25)
        .min(eps7 * lam3_prime.powf(mu) / c1)
        .min(mf * (eps7 / ((qf + 0.5) * omega).powf(mu)).powf(1.0 / mf));
    for g in eps8_exponential_conditions(lambda, big_q, eps3) {
        bound = bound.min(sup_feasible(g, 1.0)?);
    }
    Ok(MainConstants {
        lam3_prime,
        lam3: lam2 * lam3_prime,
        eps8: STRICT * bound,
    })
}

/// Problem parameters and configured constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    pub n: usize,
    pub m: usize,
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: u32,
    pub dim_y: usize,
    pub gamma: f64,
    pub eps5: f64,
    pub eps6: f64,
    pub eps7: f64,
    /// `δ₂, δ₃` for the standalone cone/cylinder constants.
    pub delta2: f64,
    pub delta3: f64,
}

pub const DEFAULT_EPS_CONFIGURED: f64 = 0.1;

impl ConstantParams {
    /// `Y` defaults to symmetric `n×n` matrices.
    pub fn new(n: usize, m: usize, q: f64, big_q: u32, gamma: f64) -> Self {
        ConstantParams {
            n,
            m,
            q,
            big_q,
            dim_y: n * (n + 1) / 2,
            gamma,
            eps5: DEFAULT_EPS_CONFIGURED,
            eps6: DEFAULT_EPS_CONFIGURED,
            eps7: DEFAULT_EPS_CONFIGURED,
            delta2: 0.5,
            delta3: 0.125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub params: ConstantParams,
    pub mu: f64,
    pub lambda_const: f64,
    pub omega: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub eps5: f64,
    pub eps6: f64,
    pub eps7: f64,
    pub eps8: f64,
    pub big_m: usize,
    pub c0: f64,
    pub c1: f64,
    pub gamma: f64,
    pub lam0: f64,
    pub tau0: f64,
    pub sigma0: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub lam3_prime: f64,
    pub lam3: f64,
    pub provenance: BTreeMap<String, Provenance>,
    pub self_checks: Vec<CheckRecord>,
}

impl ConstantsTable {
    pub fn build(params: ConstantParams) -> Result<ConstantsTable> {
        positive("eps5", params.eps5)?;
        positive("eps6", params.eps6)?;
        positive("eps7", params.eps7)?;
        let (m, q, big_q) = (params.m, params.q, params.big_q);
        let (mu, lambda_const) = mu_lambda(m, q)?;
        let (eps0, eps1) = solve_support_constants(m, q, big_q)?;
        let pc = solve_partition_constants(params.dim_y, params.n, m, q, big_q, params.gamma)?;
        let (eps3, eps4, c1) = solve_corollary_constants(
            m,
            q,
            big_q,
            Some(eps0),
            Some(eps1),
            Some(pc.eps2),
            Some(pc.c0),
        )?;
        let cc = solve_cone_cylinder_constants(m, big_q, params.delta2, params.delta3)?;
        let lam2 = solve_lambda2(m, big_q)?;
        let main = solve_main_constants(
            m,
            q,
            big_q,
            Some(eps3),
            Some(eps4),
            Some(c1),
            Some(params.eps7),
            Some(lam2),
        )?;
        let mut provenance = BTreeMap::new();
        for k in [
            "mu", "lambda_const", "omega", "eps0", "eps1", "eps2", "eps3", "eps4", "eps8", "M",
            "C0", "C1", "lam0", "tau0", "sigma0", "lam1", "lam2", "lam3_prime", "lam3",
        ] {
            provenance.insert(k.to_string(), Provenance::Solved);
        }
        for k in ["Gamma", "eps5", "eps6", "eps7"] {
            provenance.insert(k.to_string(), Provenance::Configured);
        }
        let mut table = ConstantsTable {
            params,
            mu,
            lambda_const,
            omega: unit_ball_volume(m),
            eps0,
            eps1,
            eps2: pc.eps2,
            eps3,
            eps4,
            eps5: params.eps5,
            eps6: params.eps6,
            eps7: params.eps7,
            eps8: main.eps8,
            big_m: pc.big_m,
            c0: pc.c0,
            c1,
            gamma: params.gamma,
            lam0: cc.lam0,
            tau0: cc.tau0,
            sigma0: cc.sigma0,
            lam1: cc.lam1,
            lam2,
            lam3_prime: main.lam3_prime,
            lam3: main.lam3,
            provenance,
            self_checks: Vec::new(),
        };
        table.self_checks = table.substitution_checks();
        if let Some(bad) = table.self_checks.iter().find(|c| !c.holds) {
            return Err(Error::SelfCheck(format!(
                "{}: {} vs {}",
                bad.name, bad.value, bad.bound
            )));
        }
        Ok(table)
    }

    /// Each solved constant substituted into its defining inequality.
    pub fn substitution_checks(&self) -> Vec<CheckRecord> {
        let tol = SELF_CHECK_TOL;
        let mf = self.params.m as f64;
        let qf = self.params.big_q as f64;
        let lam = self.lambda_const;
        let mu = self.mu;
        let om = self.omega;
        let a = 2f64.powi(-(self.params.m as i32 + 1));
        let delta2 = self.params.delta2;
        let delta3 = self.params.delta3;
        let target = 0.5 * (1.0 + delta2);
        let mut out = vec![
            CheckRecord::eq("mu", self.mu, 1.0 - mf / self.params.q, tol),
            CheckRecord::eq("eps0 equality", self.eps0 * (1.0 + a / qf), a, tol),
            CheckRecord::eq(
                "eps1 equality",
                (lam * self.eps1).exp(),
                (1.0 + a / qf).min(2.0 / 3f64.sqrt()),
                tol,
            ),
            CheckRecord::lt("M strict", (qf + 0.25) / (qf + 0.5), 1.0 - 1.0 / self.big_m as f64),
            CheckRecord::gt("M > dim Y", self.big_m as f64, self.params.dim_y as f64),
            CheckRecord::gt("M > n", self.big_m as f64, self.params.n as f64),
            CheckRecord::lt("eps2 < 1/2", self.eps2, 0.5),
            CheckRecord::lt("eps2 < 1/Gamma", self.eps2, 1.0 / self.gamma),
            CheckRecord::lt(
                "(1+eps2)^m < (Q+1)/(Q+1/2)",
                (1.0 + self.eps2).powf(mf),
                (qf + 1.0) / (qf + 0.5),
            ),
            CheckRecord::lt("eps3 < 1/8", self.eps3, 0.125),
            CheckRecord::lt("eps3 < eps0", self.eps3, self.eps0),
            CheckRecord::le(
                "e^(Lambda eps4)(Q+1/8) <= Q+1/4",
                (lam * self.eps4).exp() * (qf + 0.125),
                qf + 0.25,
                tol,
            ),
            CheckRecord::le(
                "e^(Lambda eps4)(Q+eps3) <= Q+1/4",
                (lam * self.eps4).exp() * (qf + self.eps3),
                qf + 0.25,
                tol,
            ),
            CheckRecord::lt("eps4 < eps1", self.eps4, self.eps1),
            CheckRecord::lt(
                "eps4((Q+1/8)omega)^(mu/m) < eps2",
                self.eps4 * ((qf + 0.125) * om).powf(mu / mf),
                self.eps2,
            ),
            CheckRecord::ge(
                "(1-lam0^2)^(m/2) >= (1+delta2)/2",
                (1.0 - self.lam0 * self.lam0).powf(mf / 2.0),
                target,
                tol,
            ),
            CheckRecord::eq(
                "tau0 equation",
                ((1.0 + self.tau0).powi(2) - 1.0).powf(mf / 2.0) / (1.0 + self.tau0).powf(mf),
                target,
                1e-11,
            ),
            CheckRecord::lt("sigma0 < 1-2 delta3", self.sigma0, 1.0 - 2.0 * delta3),
            CheckRecord::lt(
                "(1+sigma0^2)^(m/2) < (Q+(1+delta2)/2)/(Q+delta2)",
                (1.0 + self.sigma0 * self.sigma0).powf(mf / 2.0),
                (qf + target) / (qf + delta2),
            ),
            CheckRecord::le("lam1 <= lam0", self.lam1, self.lam0, 0.0),
            CheckRecord::le("lam1 <= 2/(2+sqrt 2)", self.lam1, 2.0 / (2.0 + 2f64.sqrt()), 0.0),
            CheckRecord::lt("lam2 < 1/2", self.lam2, 0.5),
            CheckRecord::le("lam3' <= lam2", self.lam3_prime, self.lam2, 0.0),
            CheckRecord::le(
                "lam3' <= eps4/(1+eps4)",
                self.lam3_prime,
                self.eps4 / (1.0 + self.eps4),
                0.0,
            ),
            CheckRecord::eq("lam3 = lam2 lam3'", self.lam3, self.lam2 * self.lam3_prime, 0.0),
            CheckRecord::le("eps8 <= eps3/2", self.eps8, self.eps3 / 2.0, 0.0),
            CheckRecord::le("eps8 <= eps4/m", self.eps8, self.eps4 / mf, 0.0),
            CheckRecord::le("eps8 <= 1/4", self.eps8, 0.25, 0.0),
            CheckRecord::le(
                "C1 eps8 / lam3'^mu <= eps7",
                self.c1 * self.eps8 / self.lam3_prime.powf(mu),
                self.eps7,
                tol,
            ),
            CheckRecord::le(
                "(eps8/m)^m (Q+1/2)^mu omega^mu <= eps7",
                (self.eps8 / mf).powf(mf) * (qf + 0.5).powf(mu) * om.powf(mu),
                self.eps7,
                tol,
            ),
        ];
        for (i, g) in eps8_exponential_conditions(lam, self.params.big_q, self.eps3)
            .iter()
            .enumerate()
        {
            out.push(CheckRecord::le(
                format!("eps8 exponential condition {}", i + 1),
                g(self.eps8),
                0.0,
                tol,
            ));
        }
        out
    }

    /// `λ ≤ ε₂/(1+ε₂)` for the partition lemma.
    pub fn partition_lambda_bound(&self) -> f64 {
        self.eps2 / (1.0 + self.eps2)
    }

    /// `λ ≤ ε₄/(1+ε₄)` for the partition corollary.
    pub fn corollary_lambda_bound(&self) -> f64 {
        self.eps4 / (1.0 + self.eps4)
    }

    /// `τ_m`: `Γ ‖df‖₁` for `m = 1`, `Γ^{m/μ} ((1-λ) r)^μ ‖df‖_q` otherwise.
    pub fn tau_m(&self, lambda: f64, r: f64, df_l1: f64, df_lq: f64) -> f64 {
        if self.params.m == 1 {
            self.gamma * df_l1
        } else {
            self.gamma.powf(self.params.m as f64 / self.mu) * ((1.0 - lambda) * r).powf(self.mu) * df_lq
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn mu_lambda_examples() {
        let (mu, l) = mu_lambda(1, 2.0).unwrap();
        close(mu, 0.5, 1e-15);
        close(l, 2.0 * 2f64.sqrt(), 1e-12);
        let (mu, l) = mu_lambda(2, 4.0).unwrap();
        close(mu, 0.5, 1e-15);
        close(l, 4.0 * std::f64::consts::PI.powf(-0.25), 1e-12);
        close(l, 3.004502, 1e-6);
        let (mu, _) = mu_lambda(2, 1e12).unwrap();
        close(mu, 1.0, 1e-10);
        assert!(mu_lambda(2, 2.0).is_err());
    }

    #[test]
    fn support_constants() {
        let (e0, e1) = solve_support_constants(1, 2.0, 1).unwrap();
        close(e0, 0.2, 1e-15);
        close(e1, (2.0 / 3f64.sqrt()).ln() / (2.0 * 2f64.sqrt()), 1e-15);
        close(e1, 0.050856, 1e-6);
        // ε₀ depends on (m, Q) only
        let (e0b, _) = solve_support_constants(1, 7.0, 1).unwrap();
        assert_eq!(e0, e0b);
    }

    #[test]
    fn partition_constants() {
        let p = solve_partition_constants(3, 2, 1, 2.0, 1, 1.0).unwrap();
        close(p.c0, 2.0, 0.0);
        assert_eq!(p.big_m, 7);
        let p = solve_partition_constants(3, 2, 2, 4.0, 1, 2.0).unwrap();
        close(p.c0, 32.0, 1e-12);
        let p = solve_partition_constants(10, 4, 1, 2.0, 1, 1.0).unwrap();
        assert_eq!(p.big_m, 11);
        assert!(solve_partition_constants(3, 2, 1, 2.0, 1, 0.0).is_err());
    }

    #[test]
    fn corollary_constants() {
        let (e0, e1) = solve_support_constants(1, 2.0, 1).unwrap();
        let p = solve_partition_constants(3, 2, 1, 2.0, 1, 1.0).unwrap();
        let (e3, e4, c1) =
            solve_corollary_constants(1, 2.0, 1, Some(e0), Some(e1), Some(p.eps2), Some(p.c0)).unwrap();
        close(e3, 0.12375, 1e-15);
        close(c1, 2.0 * 2.5f64.sqrt(), 1e-12);
        close(c1, 3.16228, 1e-5);
        let (_, l) = mu_lambda(1, 2.0).unwrap();
        assert!((l * e4).exp() * (1.0 + e3) <= 1.25);
        assert_eq!(
            solve_corollary_constants(1, 2.0, 1, None, Some(e1), Some(p.eps2), Some(p.c0)),
            Err(Error::MissingPrerequisite("eps0"))
        );
    }

    #[test]
    fn cone_cylinder_constants() {
        let c = solve_cone_cylinder_constants(1, 1, 0.5, 0.125).unwrap();
        close(c.lam0, 7f64.sqrt() / 4.0, 1e-12);
        // closed form: (1+τ)^{-2} = 1 - ((1+δ₂)/2)^2
        close(c.tau0, 1.0 / (1.0 - 0.5625f64).sqrt() - 1.0, 1e-11);
        close(c.tau0, 0.511858, 1e-6);
        close(c.lam1, 2.0 / (2.0 + 2f64.sqrt()), 1e-15);
        assert!(solve_cone_cylinder_constants(1, 1, 1.5, 0.125).is_err());
        assert!(solve_cone_cylinder_constants(1, 1, 0.5, 0.25).is_err());
    }

    #[test]
    fn table_passes_self_checks() {
        let t = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 1, 1.0)).unwrap();
        assert!(t.self_checks.iter().all(|c| c.holds));
        assert_eq!(t.provenance["Gamma"], Provenance::Configured);
        assert_eq!(t.provenance["eps8"], Provenance::Solved);
        // regression value from the independent solver in tests/constants_oracle.rs
        assert!(t.eps8 > 0.0 && t.eps8 < t.eps3 / 2.0);
    }

    #[test]
    fn bisect_requires_bracket() {
        assert!(bisect(|x| x - 5.0, 0.0, 1.0, 1e-12).is_err());
        close(bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap(), 2f64.sqrt(), 1e-13);
    }

    proptest! {
        #[test]
        fn self_checks_hold_across_parameters(
            m in 1usize..4,
            extra in 0.1f64..6.0,
            big_q in 1u32..5,
            gamma in 0.2f64..5.0,
            eps7 in 0.001f64..1.0,
        ) {
            let mut p = ConstantParams::new(m + 1, m, m as f64 + extra, big_q, gamma);
            p.eps7 = eps7;
            let t = ConstantsTable::build(p).unwrap();
            for c in &t.self_checks {
                prop_assert!(c.holds, "{:?}", c);
            }
        }

        #[test]
        fn eps8_monotone_in_eps7(a in 0.001f64..1.0, b in 0.001f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut p = ConstantParams::new(2, 1, 2.0, 1, 1.0);
            p.eps7 = lo;
            let t_lo = ConstantsTable::build(p).unwrap();
            p.eps7 = hi;
            let t_hi = ConstantsTable::build(p).unwrap();
            prop_assert!(t_hi.eps8 >= t_lo.eps8);
        }

        #[test]
        fn solvers_are_deterministic(big_q in 1u32..6, gamma in 0.5f64..3.0) {
            let p = ConstantParams::new(3, 1, 3.0, big_q, gamma);
            prop_assert_eq!(ConstantsTable::build(p).unwrap(), ConstantsTable::build(p).unwrap());
        }
    }
}
