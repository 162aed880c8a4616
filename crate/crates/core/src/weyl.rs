//! Eigenvalue counting, Weyl ratios and Karamata-type checks.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heattrace::HeatTraceCurve;
use crate::numerics::special::{gamma, upper_incomplete_gamma};
use crate::numerics::Neumaier;
use crate::operators::OperatorSpectrum;

pub use crate::numerics::special::unit_ball_volume;

/// Largest lattice count accepted by [`lattice_count`].
pub const LATTICE_LIMIT: usize = 1_000_000;

/// `#{lambda_k <= Lambda} - n_-` over the trusted eigenvalues.
pub fn counting_function(spectrum: &OperatorSpectrum, lambda: f64) -> Result<usize> {
    let trusted = spectrum.trusted();
    let top = trusted.last().copied().unwrap_or(f64::NEG_INFINITY);
    if lambda > top {
        return Err(Error::InvalidParameter(format!("Lambda = {lambda} beyond trusted range (max {top})")));
    }
    let below = trusted.partition_point(|v| *v <= lambda);
    Ok(below - spectrum.negative_count().min(below))
}

/// Number of `q in Z^n` with `sum (2 pi q_i / L_i)^2 <= Lambda`.
pub fn lattice_count(lengths: &[f64], lambda: f64) -> Result<usize> {
    let n = lengths.len();
    if n == 0 || n > 3 || lengths.iter().any(|l| !(*l > 0.0)) || !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lattice needs 1..3 positive edges and Lambda >= 0".into()));
    }
    let s: Vec<f64> = lengths.iter().map(|l| 2.0 * PI / l).collect();
    let estimate = unit_ball_volume(n) * lengths.iter().product::<f64>() * lambda.powf(n as f64 / 2.0) / (2.0 * PI).powi(n as i32);
    if estimate > 1.2 * LATTICE_LIMIT as f64 {
        return Err(Error::InvalidParameter(format!("lattice count near {estimate:.0} exceeds {LATTICE_LIMIT}")));
    }
    // points on a line with p + (s q)^2 <= lambda, summed in the same order as
    // the model eigenvalues so ties land on the same side
    let line = |sc: f64, p: f64| -> usize {
        let inside = |m: i64| p + (m as f64 * sc).powi(2) <= lambda;
        let mut m = ((lambda - p).max(0.0).sqrt() / sc).floor() as i64;
        while inside(m + 1) {
            m += 1;
        }
        while m >= 0 && !inside(m) {
            m -= 1;
        }
        if m < 0 {
            0
        } else {
            (2 * m + 1) as usize
        }
    };
    let bound = |sc: f64| (lambda.sqrt() / sc).floor() as i64 + 1;
    let sq = |i: usize, a: i64| (a as f64 * s[i]).powi(2);
    Ok(match n {
        1 => line(s[0], 0.0),
        2 => (-bound(s[0])..=bound(s[0])).map(|a| line(s[1], sq(0, a))).sum(),
        _ => (-bound(s[0])..=bound(s[0]))
            .into_par_iter()
            .map(|a| (-bound(s[1])..=bound(s[1])).map(|b| line(s[2], sq(0, a) + sq(1, b))).sum::<usize>())
            .sum(),
    })
}

/// `N (2 pi)^n / (Lambda^{n/2} omega_n Vol)`.
pub fn weyl_ratio_from_count(count: usize, dim: usize, volume: f64, lambda: f64) -> f64 {
    count as f64 * (2.0 * PI).powi(dim as i32) / (lambda.powf(dim as f64 / 2.0) * unit_ball_volume(dim) * volume)
}

pub fn weyl_ratio(spectrum: &OperatorSpectrum, dim: usize, volume: f64, lambda: f64) -> Result<f64> {
    Ok(weyl_ratio_from_count(counting_function(spectrum, lambda)?, dim, volume, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylPoint {
    pub lambda: f64,
    pub count: usize,
    pub ratio: f64,
}

pub fn weyl_table(spectrum: &OperatorSpectrum, dim: usize, volume: f64, lambdas: &[f64]) -> Result<Vec<WeylPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let count = counting_function(spectrum, lambda)?;
            Ok(WeylPoint { lambda, count, ratio: weyl_ratio_from_count(count, dim, volume, lambda) })
        })
        .collect()
}

pub fn weyl_csv(points: &[WeylPoint]) -> String {
    let mut s = String::from("lambda,count,ratio\n");
    for p in points {
        let _ = writeln!(s, "{:.16e},{},{:.16e}", p.lambda, p.count, p.ratio);
    }
    s
}

/// `lambda_k / (C k^{2/n})` with `C = (2 pi)^2 / (omega_n Vol)^{2/n}`, `k` 1-based over trusted indices.
pub fn eigenvalue_growth(spectrum: &OperatorSpectrum, dim: usize, volume: f64) -> Vec<(usize, f64)> {
    let c = growth_constant(dim, volume);
    let p = 2.0 / dim as f64;
    spectrum.trusted().iter().enumerate().map(|(i, l)| (i + 1, l / (c * ((i + 1) as f64).powf(p)))).collect()
}

pub fn growth_constant(dim: usize, volume: f64) -> f64 {
    (2.0 * PI).powi(2) / (unit_ball_volume(dim) * volume).powf(2.0 / dim as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Zero,
    One,
    /// `1/x`
    Reciprocal,
}

impl Branch {
    fn eval(self, x: f64) -> f64 {
        match self {
            Branch::Zero => 0.0,
            Branch::One => 1.0,
            Branch::Reciprocal => 1.0 / x,
        }
    }
}

/// One piece of a test function on `[lo, hi]`; `closed` marks which ends belong to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub closed: [bool; 2],
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaramataTestFunction {
    pub name: String,
    pub pieces: Vec<Piece>,
    pub bounded: bool,
    pub nonnegative: bool,
}

impl KaramataTestFunction {
    pub fn one() -> Self {
        Self {
            name: "one".into(),
            pieces: vec![Piece { lo: 0.0, hi: f64::INFINITY, closed: [true, false], branch: Branch::One }],
            bounded: true,
            nonnegative: true,
        }
    }

    /// Zero on `[0, 1/e]` and `[1, inf)`, `1/x` in between; pairs with `e^{-t mu}`
    /// to count eigenvalues in `(0, 1/t)`.
    pub fn counting() -> Self {
        let e = (-1.0f64).exp();
        Self {
            name: "counting".into(),
            pieces: vec![
                Piece { lo: 0.0, hi: e, closed: [true, true], branch: Branch::Zero },
                Piece { lo: e, hi: 1.0, closed: [false, false], branch: Branch::Reciprocal },
                Piece { lo: 1.0, hi: f64::INFINITY, closed: [true, false], branch: Branch::Zero },
            ],
            bounded: true,
            nonnegative: true,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        for p in &self.pieces {
            let above = if p.closed[0] { x >= p.lo } else { x > p.lo };
            let below = if p.closed[1] { x <= p.hi } else { x < p.hi };
            if above && below {
                return p.branch.eval(x);
            }
        }
        0.0
    }

    /// Hypotheses on `[0, 1]`: each piece's branch is finite and nonnegative there.
    pub fn validate(&self) -> Result<()> {
        if !self.bounded || !self.nonnegative {
            return Err(Error::InvalidParameter(format!("test function {} is not bounded and nonnegative", self.name)));
        }
        for p in &self.pieces {
            if p.branch == Branch::Reciprocal && p.lo <= 0.0 && p.hi > 0.0 {
                return Err(Error::InvalidParameter("1/x branch reaches 0".into()));
            }
            if !(p.lo <= p.hi) {
                return Err(Error::InvalidParameter("empty piece".into()));
            }
        }
        Ok(())
    }

    /// `int_0^inf g(e^{-s}) s^{alpha-1} e^{-s} ds`, piece by piece in closed form.
    pub fn transform(&self, alpha: f64) -> f64 {
        let mut acc = Neumaier::new();
        for p in &self.pieces {
            let lo = p.lo.min(1.0);
            let hi = p.hi.min(1.0);
            if hi <= lo {
                continue;
            }
            // x in (lo, hi) <=> s in (-ln hi, -ln lo)
            let a = -hi.ln();
            let b = if lo == 0.0 { f64::INFINITY } else { -lo.ln() };
            acc.add(match p.branch {
                Branch::Zero => 0.0,
                Branch::One => {
                    let tail = if b.is_finite() { upper_incomplete_gamma(alpha, b) } else { 0.0 };
                    upper_incomplete_gamma(alpha, a) - tail
                }
                Branch::Reciprocal => (b.powf(alpha) - a.powf(alpha)) / alpha,
            });
        }
        acc.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KaramataRow {
    pub t: f64,
    pub f_t: f64,
    pub g: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaramataReport {
    pub function: String,
    pub alpha: f64,
    pub c: f64,
    /// `G(g) = (c / Gamma(alpha)) int_0^inf g(e^{-s}) s^{alpha-1} e^{-s} ds`.
    pub g_value: f64,
    pub rows: Vec<KaramataRow>,
}

impl KaramataReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,f_t,g,gap\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.f_t, r.g, r.gap);
        }
        s
    }
}

/// `t^alpha sum_k g(e^{-t mu_k}) e^{-t mu_k}` over trusted eigenvalues.
pub fn karamata_functional(spectrum: &OperatorSpectrum, alpha: f64, g: &KaramataTestFunction, t: f64) -> f64 {
    let mut acc = Neumaier::new();
    for mu in spectrum.trusted() {
        let x = (-t * mu).exp();
        acc.add(g.eval(x) * x);
    }
    t.powf(alpha) * acc.total()
}

/// `t^alpha Theta(t)` at the smallest trusted `t` of a curve.
pub fn limit_constant(curve: &HeatTraceCurve, alpha: f64) -> Result<(f64, f64)> {
    let r = curve.trusted_range();
    if r.is_empty() {
        return Err(Error::WindowTooShort { points: 0, required: 1 });
    }
    let t = curve.t[r.start];
    Ok((t, t.powf(alpha) * curve.theta[r.start]))
}

pub fn karamata_check(
    spectrum: &OperatorSpectrum,
    alpha: f64,
    g: &KaramataTestFunction,
    t_sequence: &[f64],
    c: f64,
) -> Result<KaramataReport> {
    g.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if t_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("t sequence must decrease".into()));
    }
    let g_value = c / gamma(alpha) * g.transform(alpha);
    let rows = t_sequence
        .par_iter()
        .map(|&t| {
            let f_t = karamata_functional(spectrum, alpha, g, t);
            let gap = (f_t - g_value).abs();
            KaramataRow { t, f_t, g: g_value, gap, relative_gap: gap / g_value.abs() }
        })
        .collect();
    Ok(KaramataReport { function: g.name.clone(), alpha, c, g_value, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heattrace::{default_grid, heat_trace};
    use crate::models::{build_circle, build_flat_torus, build_sphere};
    use crate::numerics::quadrature::adaptive_gk;
    use crate::operators::OperatorTag;

    #[test]
    fn counting_examples() {
        let c = build_circle(2.0 * PI, 20).unwrap();
        let s = OperatorSpectrum::exact(&c, 20).unwrap();
        assert_eq!(counting_function(&s, 4.5).unwrap(), 5);
        let t = build_flat_torus(&[1.0, 1.0], 40).unwrap();
        let s = OperatorSpectrum::exact(&t, 40).unwrap();
        assert_eq!(counting_function(&s, 4.0 * PI * PI * (1.0 + 1e-12)).unwrap(), 5);
        let sp = build_sphere(1.0, 25).unwrap();
        let s = OperatorSpectrum::exact(&sp, 25).unwrap();
        assert_eq!(counting_function(&s, 6.0).unwrap(), 9);
        assert!(counting_function(&s, 100.0).is_err());
    }

    #[test]
    fn counting_skips_negative() {
        let s = OperatorSpectrum { tag: OperatorTag::Schrodinger, truncation: 4, trusted_count: 4, eigenvalues: vec![-2.0, -1.0, 0.5, 3.0] };
        assert_eq!(counting_function(&s, 1.0).unwrap(), 1);
        assert_eq!(counting_function(&s, -1.5).unwrap(), 0);
        // right-continuous jumps equal multiplicities
        let d = OperatorSpectrum { tag: OperatorTag::Exact, truncation: 5, trusted_count: 5, eigenvalues: vec![0.0, 1.0, 1.0, 1.0, 2.0] };
        assert_eq!(counting_function(&d, 1.0).unwrap() - counting_function(&d, 1.0 - 1e-9).unwrap(), 3);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        for n in 1..6 {
            let alt = 2.0 * PI.powf(n as f64 / 2.0) / (n as f64 * gamma(n as f64 / 2.0));
            assert!((unit_ball_volume(n) - alt).abs() < 1e-13);
        }
    }

    #[test]
    fn lattice_matches_model_enumeration() {
        for edges in [vec![2.0 * PI], vec![1.0, 1.3], vec![1.0, 1.0, 1.0]] {
            let m = build_flat_torus(&edges, 3000).unwrap();
            let s = OperatorSpectrum::exact(&m, m.band_limit()).unwrap();
            let top = s.eigenvalues[s.eigenvalues.len() / 2];
            for lam in [0.0, top * 0.37, top * 0.81, top] {
                assert_eq!(lattice_count(&edges, lam).unwrap(), counting_function(&s, lam).unwrap(), "{edges:?} {lam}");
            }
        }
        assert!(lattice_count(&[1.0, 1.0, 1.0], 1e7).is_err());
    }

    #[test]
    fn weyl_ratios() {
        let lam = 1e4;
        let n = lattice_count(&[2.0 * PI], lam).unwrap();
        assert_eq!(n, 201);
        assert!((weyl_ratio_from_count(n, 1, 2.0 * PI, lam) - 1.0).abs() < 0.02);
        // about 1.2e5 points
        let lam = (1.2e5 * 6.0 * PI * PI).powf(2.0 / 3.0);
        let n = lattice_count(&[1.0, 1.0, 1.0], lam).unwrap();
        assert!(n >= 100_000);
        assert!((weyl_ratio_from_count(n, 3, 1.0, lam) - 1.0).abs() < 0.05);
    }

    #[test]
    fn growth_examples() {
        let c = build_circle(2.0 * PI, 4001).unwrap();
        let s = OperatorSpectrum::exact(&c, 4001).unwrap();
        let g = eigenvalue_growth(&s, 1, 2.0 * PI);
        assert!((growth_constant(1, 2.0 * PI) - 0.25).abs() < 1e-15);
        assert!((g[4000].1 - 1.0).abs() < 1e-3);
        let shifted = eigenvalue_growth(&s.shifted(5.0), 1, 2.0 * PI);
        assert!((shifted[4000].1 - 1.0).abs() < 2e-3);

        let t = build_flat_torus(&[1.0, 1.0], 10_000).unwrap();
        let s = OperatorSpectrum::exact(&t, 10_000).unwrap();
        let g = eigenvalue_growth(&s, 2, 1.0);
        assert!((g[9999].1 - 1.0).abs() < 0.1);
    }

    #[test]
    fn test_function_transforms() {
        let e = (-1.0f64).exp();
        let g = KaramataTestFunction::counting();
        assert_eq!(g.eval(e), 0.0);
        assert_eq!(g.eval(1.0), 0.0);
        assert!((g.eval(0.5) - 2.0).abs() < 1e-15);
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            // s = u^2 removes the endpoint singularity
            let q = adaptive_gk(|u| 2.0 * u * g.eval((-u * u).exp()) * (u * u).powf(alpha - 1.0) * (-u * u).exp(), 0.0, 1.0, 1e-13, 1e-13)
                .unwrap();
            assert!((g.transform(alpha) - q).abs() < 1e-10, "{alpha} {q} {}", g.transform(alpha));
            assert!((g.transform(alpha) - 1.0 / alpha).abs() < 1e-14);
            assert!((KaramataTestFunction::one().transform(alpha) - gamma(alpha)).abs() < 1e-12);
        }
        let mut bad = KaramataTestFunction::counting();
        bad.nonnegative = false;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn karamata_on_square_torus() {
        let m = build_flat_torus(&[1.0, 1.0], 200_000).unwrap();
        let s = OperatorSpectrum::exact(&m, m.band_limit()).unwrap();
        let curve = heat_trace(&s, 2, &default_grid()).unwrap();
        let (t_min, c) = limit_constant(&curve, 1.0).unwrap();
        assert!((c / (1.0 / (4.0 * PI)) - 1.0).abs() < 1e-6);
        let ts: Vec<f64> = curve.t.iter().rev().copied().filter(|t| *t >= t_min).collect();
        let rep = karamata_check(&s, 1.0, &KaramataTestFunction::counting(), &ts, c).unwrap();
        assert!((rep.g_value - c).abs() < 1e-15);
        assert!(rep.rows.last().unwrap().relative_gap < 0.05);
        let one = karamata_check(&s, 1.0, &KaramataTestFunction::one(), &ts, c).unwrap();
        let last = one.rows.last().unwrap();
        let i = curve.trusted_range().start;
        assert!(last.gap <= t_min * curve.tail_bound[i]);
        assert!(rep.to_csv().starts_with("t,f_t,g,gap\n"));
    }
}
