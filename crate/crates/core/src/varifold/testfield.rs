//! Smooth vector fields with closed-form derivatives, used as test fields
//! for the first variation.

use nalgebra::{DMatrix, DVector};

/// A smooth vector field `g: R^n -> R^n` with its Jacobian
/// `Dg[(i, j)] = ∂_j g_i`.
pub trait TestField {
    fn value(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// `g(x) = v`.
#[derive(Debug, Clone)]
pub struct Constant(pub Vec<f64>);

impl TestField for Constant {
    fn value(&self, _x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
        let n = self.0.len();
        DMatrix::zeros(n, n)
    }
}

/// `g(x) = x - origin`.
#[derive(Debug, Clone)]
pub struct Position {
    pub origin: Vec<f64>,
}

impl TestField for Position {
    fn value(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.origin).map(|(a, b)| a - b))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len())
    }
}

/// `g_i(x) = c_i + Σ_j a_ij x_j + Σ_jk b_ijk x_j x_k`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    /// `b[i]` is the symmetric matrix of the quadratic part of `g_i`.
    pub b: Vec<DMatrix<f64>>,
}

impl Quadratic {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: Vec<DMatrix<f64>>) -> Self {
        let b = b.into_iter().map(|m| (&m + m.transpose()) * 0.5).collect();
        Quadratic { c, a, b }
    }
}

impl TestField for Quadratic {
    fn value(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        let mut g = &self.c + &self.a * &xv;
        for (i, bi) in self.b.iter().enumerate() {
            g[i] += xv.dot(&(bi * &xv));
        }
        g
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let xv = DVector::from_column_slice(x);
        let mut d = self.a.clone();
        for (i, bi) in self.b.iter().enumerate() {
            let grad = bi * &xv * 2.0;
            for j in 0..x.len() {
                d[(i, j)] += grad[j];
            }
        }
        d
    }
}

fn psi(t: f64) -> (f64, f64) {
    // e^{-1/t} and its derivative
    if t <= 0.0 {
        (0.0, 0.0)
    } else {
        let v = (-1.0 / t).exp();
        (v, v / (t * t))
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`. Returns value and derivative.
pub fn smooth_step(t: f64) -> (f64, f64) {
    let (a, da) = psi(t);
    let (b, db) = psi(1.0 - t);
    let s = a + b;
    if s == 0.0 {
        return (if t >= 1.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let v = a / s;
    // d/dt [a/(a+b)] with b' = -db
    let dv = (da * s - a * (da - db)) / (s * s);
    (v, dv)
}

/// `g(x) · φ(|x - center|)` where `φ = 1` on `[0, inner]`, `φ = 0` on
/// `[outer, ∞)`, smooth in between.
pub struct Cutoff<F> {
    pub field: F,
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl<F: TestField> Cutoff<F> {
    pub fn new(field: F, center: &[f64], inner: f64, outer: f64) -> Self {
        assert!(0.0 <= inner && inner < outer, "cutoff radii must satisfy 0 <= inner < outer");
        Cutoff {
            field,
            center: center.to_vec(),
            inner,
            outer,
        }
    }

    fn profile(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.center).map(|(a, b)| a - b));
        let rho = d.norm();
        let (s, ds) = smooth_step((rho - self.inner) / (self.outer - self.inner));
        let phi = 1.0 - s;
        let grad = if rho > 0.0 && ds != 0.0 {
            d * (-ds / ((self.outer - self.inner) * rho))
        } else {
            DVector::zeros(x.len())
        };
        (phi, grad)
    }
}

impl<F: TestField> TestField for Cutoff<F> {
    fn value(&self, x: &[f64]) -> DVector<f64> {
        let (phi, _) = self.profile(x);
        self.field.value(x) * phi
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (phi, grad) = self.profile(x);
        let g = self.field.value(x);
        self.field.jacobian(x) * phi + g * grad.transpose()
    }
}

impl<T: TestField + ?Sized> TestField for &T {
    fn value(&self, x: &[f64]) -> DVector<f64> {
        (**self).value(x)
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).jacobian(x)
    }
}

impl<T: TestField + ?Sized> TestField for Box<T> {
    fn value(&self, x: &[f64]) -> DVector<f64> {
        (**self).value(x)
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).jacobian(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_jacobian(g: &dyn TestField, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let h = 1e-6;
        let mut d = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let col = (g.value(&xp) - g.value(&xm)) / (2.0 * h);
            d.set_column(j, &col);
        }
        d
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let q = Quadratic::new(
            DVector::from_vec(vec![0.1, -0.2]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3]),
            vec![
                DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, -0.4]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.2]),
            ],
        );
        let c = Cutoff::new(Position { origin: vec![0.0, 0.0] }, &[0.1, 0.0], 0.5, 1.5);
        for x in [[0.3, 0.4], [0.9, -0.2], [-1.1, 0.6]] {
            for g in [&q as &dyn TestField, &c] {
                let diff = (g.jacobian(&x) - numeric_jacobian(g, &x)).norm();
                assert!(diff < 1e-6, "{diff}");
            }
        }
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0).0, 0.0);
        assert_eq!(smooth_step(2.0).0, 1.0);
        assert!((smooth_step(0.5).0 - 0.5).abs() < 1e-15);
    }
}
