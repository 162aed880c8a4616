//! Chebyshev interpolation on an interval with exact derivatives of the
//! interpolant.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolate `f` at `n` Chebyshev–Gauss nodes on `[a, b]`.
    pub fn fit(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Self {
        assert!(n >= 1 && b > a);
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let x = (PI * (k as f64 + 0.5) / n as f64).cos();
                f(0.5 * (b - a) * x + 0.5 * (b + a))
            })
            .collect();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                let c = 2.0 * s / n as f64;
                if j == 0 {
                    c / 2.0
                } else {
                    c
                }
            })
            .collect();
        Self { a, b, coeffs }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (2.0 * x - self.a - self.b) / (self.b - self.a);
        clenshaw(&self.coeffs, u)
    }

    /// Derivative of the interpolant.
    pub fn derivative(&self) -> Chebyshev {
        let n = self.coeffs.len();
        if n <= 1 {
            return Chebyshev { a: self.a, b: self.b, coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] /= 2.0;
        d.truncate(n - 1);
        let s = 2.0 / (self.b - self.a);
        d.iter_mut().for_each(|c| *c *= s);
        Chebyshev { a: self.a, b: self.b, coeffs: d }
    }

    /// Copy with every coefficient below `rel_tol * max |c_k|` set to zero.
    pub fn chopped(&self, rel_tol: f64) -> Chebyshev {
        let top = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let coeffs = self.coeffs.iter().map(|c| if c.abs() < rel_tol * top { 0.0 } else { *c }).collect();
        Chebyshev { a: self.a, b: self.b, coeffs }
    }

    /// Magnitude of the trailing coefficients, a cheap accuracy indicator.
    pub fn tail_magnitude(&self) -> f64 {
        self.coeffs.iter().rev().take(3).fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

fn clenshaw(c: &[f64], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + c[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function_and_derivatives() {
        let ch = Chebyshev::fit(|x: f64| x.sin(), 0.0, 1.5, 24);
        let d1 = ch.derivative();
        let d2 = d1.derivative();
        for x in [0.0, 0.3, 0.77, 1.5] {
            assert!((ch.eval(x) - x.sin()).abs() < 1e-14);
            assert!((d1.eval(x) - x.cos()).abs() < 1e-12);
            assert!((d2.eval(x) + x.sin()).abs() < 1e-9, "{}", d2.eval(x) + x.sin());
        }
    }

    #[test]
    fn polynomial_exact() {
        let ch = Chebyshev::fit(|x| 3.0 * x * x - x + 2.0, -1.0, 4.0, 5);
        assert!((ch.derivative().eval(2.0) - 11.0).abs() < 1e-12);
    }
}
