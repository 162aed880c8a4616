//! Heat traces, diagonal heat kernels and the first two Duhamel terms.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::models::{ModelKind, SpectralModel};
use crate::numerics::eigen::SymMatrix;
use crate::numerics::special::upper_incomplete_gamma;
use crate::numerics::Neumaier;
use crate::operators::{coupling_matrix, OperatorEigen, OperatorSpectrum};

/// Default relative tail tolerance defining the trusted window.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Below this `|Delta lambda| t` the divided difference uses its series.
pub const DIVIDED_DIFFERENCE_SWITCH: f64 = 1e-8;

/// Largest truncation accepted by the `W_2` double sum.
pub const W2_MAX_N: usize = 512;

/// `per_decade` log-spaced points from `t_min` to `t_max` inclusive.
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && per_decade > 0);
    let (a, b) = (t_min.log10(), t_max.log10());
    let steps = ((b - a) * per_decade as f64).round() as usize;
    (0..=steps).map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64)).collect()
}

/// The default grid: 40 points per decade over `[1e-4, 1]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-4, 1.0, 40)
}

/// Lower envelope `mu_k >= base + c k^{2/n}` (1-based `k`) fitted to the
/// upper half of a sorted eigenvalue list, with a 10% safety margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylEnvelope {
    pub dim: usize,
    pub base: f64,
    pub c: f64,
    /// Number of eigenvalues already summed.
    pub count: usize,
}

impl WeylEnvelope {
    pub fn fit(eigenvalues: &[f64], dim: usize) -> Self {
        let count = eigenvalues.len();
        let base = eigenvalues.first().copied().unwrap_or(0.0);
        let p = 2.0 / dim as f64;
        let c = if count < 4 {
            0.0
        } else {
            let lo = count / 2;
            let m = (lo..count)
                .map(|i| (eigenvalues[i] - base) / ((i + 1) as f64).powf(p))
                .fold(f64::INFINITY, f64::min);
            0.9 * m.max(0.0)
        };
        Self { dim, base, c, count }
    }

    /// Upper bound on `sum_{k > count} e^{-mu_k t}`.
    pub fn tail(&self, t: f64) -> f64 {
        if self.c <= 0.0 {
            return f64::INFINITY;
        }
        let h = self.dim as f64 / 2.0;
        let ct = self.c * t;
        let x = ct * (self.count as f64).powf(1.0 / h);
        (-self.base * t).exp() * h * ct.powf(-h) * upper_incomplete_gamma(h, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceCurve {
    pub source_tag: String,
    pub dim: usize,
    pub tolerance: f64,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub tail_bound: Vec<f64>,
    /// `tail_bound / theta < tolerance`.
    pub trusted: Vec<bool>,
}

impl HeatTraceCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index range of the longest run of trusted points.
    pub fn trusted_range(&self) -> std::ops::Range<usize> {
        let mut best = 0..0;
        let mut start = None;
        for i in 0..=self.t.len() {
            let ok = i < self.t.len() && self.trusted[i];
            match (ok, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if i - s > best.len() {
                        best = s..i;
                    }
                    start = None;
                }
                _ => {}
            }
        }
        best
    }

    /// Smallest trusted time, if any.
    pub fn trusted_t_min(&self) -> Option<f64> {
        let r = self.trusted_range();
        (!r.is_empty()).then(|| self.t[r.start])
    }

    /// `t,theta,tail_bound` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,theta,tail_bound\n");
        for i in 0..self.t.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.t[i], self.theta[i], self.tail_bound[i]);
        }
        s
    }
}

/// `sum_k e^{-mu_k t}` in index order with compensated summation.
pub fn trace_sum(eigenvalues: &[f64], t: f64) -> f64 {
    let mut acc = Neumaier::new();
    for mu in eigenvalues {
        acc.add((-mu * t).exp());
    }
    acc.total()
}

/// `Theta(t)` over the trusted eigenvalues with a tail bound for the rest.
pub fn heat_trace(spectrum: &OperatorSpectrum, dim: usize, t_grid: &[f64]) -> Result<HeatTraceCurve> {
    heat_trace_with_tolerance(spectrum, dim, t_grid, TAIL_TOLERANCE)
}

pub fn heat_trace_with_tolerance(
    spectrum: &OperatorSpectrum,
    dim: usize,
    t_grid: &[f64],
    tolerance: f64,
) -> Result<HeatTraceCurve> {
    if spectrum.eigenvalues.is_empty() || spectrum.trusted_count == 0 {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let trusted = spectrum.trusted();
    let env = WeylEnvelope::fit(trusted, dim);
    let rows: Vec<(f64, f64)> = t_grid.par_iter().map(|&t| (trace_sum(trusted, t), env.tail(t))).collect();
    let theta: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let tail_bound: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let trusted = theta.iter().zip(&tail_bound).map(|(th, tb)| tb / th < tolerance).collect();
    Ok(HeatTraceCurve {
        source_tag: serde_json::to_value(spectrum.tag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        dim,
        tolerance,
        t: t_grid.to_vec(),
        theta,
        tail_bound,
        trusted,
    })
}

/// Pointwise bound factor: `sum_{k > K} e^{-lambda_k t} phi_k(x)^2` is at most
/// this times the trace tail (complete shells on the sphere, `|phi| <= sqrt(2/Vol)` on flat models).
fn pointwise_factor(model: &SpectralModel) -> f64 {
    match model.kind() {
        ModelKind::Sphere { .. } => 1.0 / model.volume(),
        _ => 2.0 / model.volume(),
    }
}

/// `H_0(t, x, x) = sum_k e^{-lambda_k t} phi_k(x)^2` over the model band, with
/// its tail bound.
pub fn heat_kernel_diagonal(model: &SpectralModel, t: f64, x: &[f64]) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let n = model.band_limit();
    let mut phi = vec![0.0; n];
    model.eval_all(x, &mut phi);
    let mut acc = Neumaier::new();
    for (lam, p) in model.eigenvalues().iter().zip(&phi) {
        acc.add((-lam * t).exp() * p * p);
    }
    let env = WeylEnvelope::fit(model.eigenvalues(), model.dim());
    Ok((acc.total(), pointwise_factor(model) * env.tail(t)))
}

/// `sum_k e^{-mu_k t} psi_k(x) psi_k(y)` over the trusted eigenpairs of a
/// perturbed operator. `psi_k` are the stored coefficient rows expanded in the model basis.
pub fn operator_kernel(model: &SpectralModel, eig: &OperatorEigen, t: f64, x: &[f64], y: &[f64]) -> f64 {
    let n = eig.spectrum.truncation;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    model.eval_all(x, &mut px);
    model.eval_all(y, &mut py);
    let mut acc = Neumaier::new();
    for k in 0..eig.spectrum.trusted_count {
        let v = eig.vector(k);
        let (mut a, mut b) = (Neumaier::new(), Neumaier::new());
        for j in 0..n {
            a.add(v[j] * px[j]);
            b.add(v[j] * py[j]);
        }
        acc.add((-eig.spectrum.eigenvalues[k] * t).exp() * a.total() * b.total());
    }
    acc.total()
}

/// `int_0^1 e^{-(v a + (1 - v) b)} dv = (e^{-b} - e^{-a}) / (a - b)`.
pub fn divided_difference(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let d = hi - lo;
    if d < DIVIDED_DIFFERENCE_SWITCH {
        (-lo).exp() * (1.0 - d / 2.0 + d * d / 6.0)
    } else {
        -(-lo).exp() * (-d).exp_m1() / d
    }
}

/// Coupling data shared by the Duhamel terms at a fixed truncation.
#[derive(Debug, Clone)]
pub struct DuhamelTerms {
    lambda: Vec<f64>,
    coupling: SymMatrix,
    sup_norm: f64,
    envelope: WeylEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelCurve {
    pub t: Vec<f64>,
    pub theta_v: Vec<f64>,
    pub theta_0: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// `(Theta_V - Theta_0) - W1 - W2`.
    pub r3: Vec<f64>,
}

impl DuhamelCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,theta_v,theta_0,w1,w2,r3\n");
        for i in 0..self.t.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[i], self.theta_v[i], self.theta_0[i], self.w1[i], self.w2[i], self.r3[i]
            );
        }
        s
    }
}

impl DuhamelTerms {
    pub fn new(model: &SpectralModel, v: &ScalarField, n: usize) -> Result<Self> {
        let coupling = coupling_matrix(model, v, n)?;
        let lambda = model.eigenvalues()[..n].to_vec();
        Ok(Self { envelope: WeylEnvelope::fit(&lambda, model.dim()), lambda, coupling, sup_norm: v.sup_norm() })
    }

    pub fn truncation(&self) -> usize {
        self.lambda.len()
    }

    pub fn coupling(&self) -> &SymMatrix {
        &self.coupling
    }

    /// `-t sum_k e^{-lambda_k t} M_kk`.
    pub fn w1(&self, t: f64) -> f64 {
        let mut acc = Neumaier::new();
        for (k, lam) in self.lambda.iter().enumerate() {
            acc.add((-lam * t).exp() * self.coupling.get(k, k));
        }
        -t * acc.total()
    }

    /// Bound on the omitted part of `W1`: `t ||V||_inf` times the trace tail.
    pub fn w1_tail(&self, t: f64) -> f64 {
        t * self.sup_norm * self.envelope.tail(t)
    }

    /// `(t^2 / 2) sum_{j,k} M_jk^2 (e^{-t lambda_k} - e^{-t lambda_j}) / (t (lambda_j - lambda_k))`.
    pub fn w2(&self, t: f64) -> Result<f64> {
        let n = self.lambda.len();
        if n > W2_MAX_N {
            return Err(Error::InvalidParameter(format!("W2 truncation {n} exceeds {W2_MAX_N}")));
        }
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = Neumaier::new();
                let a = t * self.lambda[j];
                for k in 0..n {
                    let m = self.coupling.get(j, k);
                    if m != 0.0 {
                        acc.add(m * m * divided_difference(a, t * self.lambda[k]));
                    }
                }
                acc.total()
            })
            .collect();
        let mut acc = Neumaier::new();
        rows.iter().for_each(|r| acc.add(*r));
        Ok(0.5 * t * t * acc.total())
    }

    /// `R_3` on a grid, from the perturbed spectrum at the same truncation.
    /// Traces run over all `N` eigenvalues so the identity is exact at finite rank.
    pub fn residual(&self, spectrum_v: &OperatorSpectrum, spectrum_0: &OperatorSpectrum, t_grid: &[f64]) -> Result<DuhamelCurve> {
        let n = self.truncation();
        if spectrum_v.truncation != spectrum_0.truncation || spectrum_v.truncation != n {
            return Err(Error::MismatchedTruncation { left: spectrum_v.truncation, right: spectrum_0.truncation });
        }
        let rows: Vec<Result<[f64; 5]>> = t_grid
            .par_iter()
            .map(|&t| {
                let tv = trace_sum(&spectrum_v.eigenvalues, t);
                let t0 = trace_sum(&spectrum_0.eigenvalues, t);
                let w1 = self.w1(t);
                let w2 = self.w2(t)?;
                Ok([tv, t0, w1, w2, (tv - t0) - w1 - w2])
            })
            .collect();
        let mut out = DuhamelCurve {
            t: t_grid.to_vec(),
            theta_v: vec![],
            theta_0: vec![],
            w1: vec![],
            w2: vec![],
            r3: vec![],
        };
        for r in rows {
            let r = r?;
            out.theta_v.push(r[0]);
            out.theta_0.push(r[1]);
            out.w1.push(r[2]);
            out.w2.push(r[3]);
            out.r3.push(r[4]);
        }
        Ok(out)
    }
}

pub fn duhamel_w1(model: &SpectralModel, v: &ScalarField, t: f64, n: usize) -> Result<f64> {
    Ok(DuhamelTerms::new(model, v, n)?.w1(t))
}

pub fn duhamel_w2(model: &SpectralModel, v: &ScalarField, t: f64, n: usize) -> Result<f64> {
    if n > W2_MAX_N {
        return Err(Error::InvalidParameter(format!("W2 truncation {n} exceeds {W2_MAX_N}")));
    }
    DuhamelTerms::new(model, v, n)?.w2(t)
}

pub fn duhamel_residual(
    model: &SpectralModel,
    v: &ScalarField,
    spectrum_v: &OperatorSpectrum,
    spectrum_0: &OperatorSpectrum,
    t_grid: &[f64],
) -> Result<DuhamelCurve> {
    if spectrum_v.truncation != spectrum_0.truncation {
        return Err(Error::MismatchedTruncation { left: spectrum_v.truncation, right: spectrum_0.truncation });
    }
    DuhamelTerms::new(model, v, spectrum_v.truncation)?.residual(spectrum_v, spectrum_0, t_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, BuiltinField, TrigKind, TrigTerm};
    use crate::models::{build_circle, build_flat_torus, build_sphere};
    use crate::operators::{schrodinger_spectrum, OperatorTag};
    use crate::numerics::quadrature::gauss_legendre_integrate;
    use std::f64::consts::PI;

    fn cos_field(m: &SpectralModel, a: f64, c: f64) -> ScalarField {
        let f = builtin(m, &BuiltinField::Trig { terms: vec![TrigTerm { kind: TrigKind::Cos, wavevector: vec![1], amplitude: a }] })
            .unwrap();
        f.shifted(m, c)
    }

    #[test]
    fn grid_layout() {
        let g = default_grid();
        assert_eq!(g.len(), 161);
        assert!((g[0] - 1e-4).abs() < 1e-19 && (g[160] - 1.0).abs() < 1e-15);
        assert!((g[40] - 1e-3).abs() < 1e-17);
    }

    #[test]
    fn single_zero_mode() {
        let s = OperatorSpectrum { tag: OperatorTag::Exact, truncation: 1, trusted_count: 1, eigenvalues: vec![0.0] };
        let c = heat_trace(&s, 1, &[0.1, 1.0, 10.0]).unwrap();
        assert!(c.theta.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn sphere_trace_oracle() {
        let m = build_sphere(1.0, 201 * 201).unwrap();
        let s = OperatorSpectrum::exact(&m, m.band_limit()).unwrap();
        let c = heat_trace(&s, 2, &[0.1]).unwrap();
        // independent shell sum
        let shells: f64 = (0..=200).map(|l: u32| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * 0.1).exp()).sum();
        assert!((c.theta[0] - shells).abs() < 1e-12);
        assert!((c.theta[0] - 10.340).abs() < 5e-4);
        assert!((c.theta[0] - (10.0 + 1.0 / 3.0 + 0.1 / 15.0)).abs() < 1e-3);
        assert!(c.trusted[0]);
    }

    #[test]
    fn circle_poisson_on_grid() {
        let m = build_circle(2.0 * PI, 2001).unwrap();
        let s = OperatorSpectrum::exact(&m, m.band_limit()).unwrap();
        let grid: Vec<f64> = log_grid(1e-3, 0.05, 20);
        let c = heat_trace(&s, 1, &grid).unwrap();
        for (t, th) in c.t.iter().zip(&c.theta) {
            assert!(((4.0 * PI * t).sqrt() * th - 2.0 * PI).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn tail_bound_covers_omitted_terms() {
        let big = build_flat_torus(&[1.0, 1.3], 20000).unwrap();
        let small = OperatorSpectrum::exact(&big, 2000).unwrap();
        let c = heat_trace(&small, 2, &log_grid(1e-4, 1.0, 10)).unwrap();
        for (i, t) in c.t.iter().enumerate() {
            let omitted = trace_sum(&big.eigenvalues()[2000..], *t);
            let far = WeylEnvelope::fit(big.eigenvalues(), 2).tail(*t);
            assert!(omitted <= c.tail_bound[i], "t = {t}: {omitted} > {}", c.tail_bound[i]);
            let _ = far;
        }
        // monotone, and the window opens at moderate t
        assert!(c.tail_bound.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.trusted_t_min().unwrap() > 1e-3);
    }

    #[test]
    fn kernel_diagonal_homogeneous_and_traces() {
        let t = build_flat_torus(&[1.0, 2.0], 400).unwrap();
        let (a, _) = heat_kernel_diagonal(&t, 0.05, &[0.1, 0.3]).unwrap();
        let (b, _) = heat_kernel_diagonal(&t, 0.05, &[0.77, 1.9]).unwrap();
        assert!((a - b).abs() < 1e-10);

        let c = build_circle(2.0 * PI, 4001).unwrap();
        let t0 = 1e-4;
        let (h, tail) = heat_kernel_diagonal(&c, t0, &[1.0]).unwrap();
        assert!(tail < 1e-12 * h);
        assert!((h * (4.0 * PI * t0).sqrt() - 1.0).abs() < 1e-10);

        let s = build_sphere(1.0, 400).unwrap();
        let tt = 0.2;
        let integral = s.integrate(|x| heat_kernel_diagonal(&s, tt, x).unwrap().0);
        assert!((integral - trace_sum(s.eigenvalues(), tt)).abs() < 1e-11);
    }

    #[test]
    fn w1_examples() {
        let m = build_circle(2.0 * PI, 257).unwrap();
        let one = builtin(&m, &BuiltinField::Constant { value: 1.0 }).unwrap();
        for t in [0.01, 0.3] {
            let w = duhamel_w1(&m, &one, t, 256).unwrap();
            assert!((w + t * trace_sum(&m.eigenvalues()[..256], t)).abs() < 1e-12);
        }
        let cosv = cos_field(&m, 1.0, 0.0);
        assert!(duhamel_w1(&m, &cosv, 0.1, 256).unwrap().abs() < 1e-15);
        let v = cos_field(&m, 1.0, 1.0);
        let t = 1e-3;
        let w = duhamel_w1(&m, &v, t, 256).unwrap();
        let lead = -t * (4.0 * PI * t).powf(-0.5) * 2.0 * PI;
        assert!((w / lead - 1.0).abs() < 1e-6);
    }

    #[test]
    fn w1_two_routes() {
        let m = build_circle(2.0 * PI, 257).unwrap();
        let v = builtin(&m, &BuiltinField::RandomTrig { max_wavenumber: 4, amplitude: 1.0, seed: 5 }).unwrap();
        let t = 0.05;
        let spectral = duhamel_w1(&m, &v, t, 257).unwrap();
        let q = -t * m.integrate(|x| heat_kernel_diagonal(&m, t, x).unwrap().0 * v.value(&m, x));
        assert!((spectral - q).abs() < 1e-8);
    }

    #[test]
    fn divided_difference_branches() {
        for b in [0.0, 0.7, 30.0] {
            for d in [0.0, 1e-10, 9.9e-9, 1.01e-8, 1e-3, 2.0] {
                let exact = ((-b) as f64).exp() * if d == 0.0 { 1.0 } else { -(-(d as f64)).exp_m1() / d };
                let v = divided_difference(b + d, b);
                assert!(((v - exact) / exact).abs() < 1e-12, "b {b} d {d}");
                let w = divided_difference(b, b + d);
                assert!(((w - v) / v).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn w2_two_mode_toy() {
        // M_12 = a between lambda = 0 and 1, via a hand-built term set
        let a = 0.3;
        let terms = DuhamelTerms {
            lambda: vec![0.0, 1.0],
            coupling: SymMatrix::from_row_major(2, vec![0.0, a, a, 0.0]),
            sup_norm: a,
            envelope: WeylEnvelope { dim: 1, base: 0.0, c: 0.0, count: 2 },
        };
        for t in [0.01, 0.5, 3.0] {
            let closed = terms.w2(t).unwrap();
            let expect = t * t * a * a * (1.0 - (-t as f64).exp()) / t;
            assert!((closed - expect).abs() < 1e-14);
            // 50-point quadrature over v
            let oracle = 0.5 * t * t * 2.0 * a * a * gauss_legendre_integrate(|v| (-(v * t)).exp(), 0.0, 1.0, 50);
            assert!((closed - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn w2_matches_v_quadrature() {
        let m = build_circle(2.0 * PI, 65).unwrap();
        for spec in [
            BuiltinField::Sawtooth { amplitude: 1.0 },
            BuiltinField::Triangle { amplitude: 1.0 },
            BuiltinField::RandomTrig { max_wavenumber: 3, amplitude: 0.5, seed: 2 },
        ] {
            let v = builtin(&m, &spec).unwrap();
            let terms = DuhamelTerms::new(&m, &v, 64).unwrap();
            let t = 0.02;
            let closed = terms.w2(t).unwrap();
            let oracle = 0.5
                * t
                * t
                * gauss_legendre_integrate(
                    |s| {
                        let mut acc = 0.0;
                        for j in 0..64 {
                            for k in 0..64 {
                                let mm = terms.coupling.get(j, k);
                                acc += mm * mm * (-t * (s * terms.lambda[j] + (1.0 - s) * terms.lambda[k])).exp();
                            }
                        }
                        acc
                    },
                    0.0,
                    1.0,
                    60,
                );
            assert!((closed - oracle).abs() < 1e-9, "{spec:?}");
        }
        let z = builtin(&m, &BuiltinField::Zero).unwrap();
        assert_eq!(duhamel_w2(&m, &z, 0.1, 64).unwrap(), 0.0);
        assert!(duhamel_w2(&m, &z, 0.1, 600).is_err());
    }

    #[test]
    fn residual_for_constant_potential() {
        let m = build_circle(2.0 * PI, 129).unwrap();
        let c = 0.7;
        let v = builtin(&m, &BuiltinField::Constant { value: c }).unwrap();
        let sv = schrodinger_spectrum(&m, &v, 128).unwrap();
        let s0 = OperatorSpectrum::exact(&m, 128).unwrap();
        let grid = log_grid(1e-2, 1.0, 5);
        let r = duhamel_residual(&m, &v, &sv, &s0, &grid).unwrap();
        for i in 0..grid.len() {
            let t: f64 = grid[i];
            let expect = r.theta_0[i] * ((-c * t).exp() - 1.0 + c * t - c * c * t * t / 2.0);
            assert!((r.r3[i] - expect).abs() < 1e-12 * r.theta_0[i], "{t}");
            assert!((r.theta_v[i] - (-c * t).exp() * r.theta_0[i]).abs() < 1e-12 * r.theta_0[i]);
        }
        let z = builtin(&m, &BuiltinField::Zero).unwrap();
        let r = duhamel_residual(&m, &z, &s0, &s0, &grid).unwrap();
        assert!(r.r3.iter().all(|v| *v == 0.0));
        let short = OperatorSpectrum::exact(&m, 64).unwrap();
        assert!(matches!(duhamel_residual(&m, &v, &sv, &short, &grid), Err(Error::MismatchedTruncation { .. })));
    }

    #[test]
    fn csv_format() {
        let s = OperatorSpectrum { tag: OperatorTag::Exact, truncation: 1, trusted_count: 1, eigenvalues: vec![0.0] };
        let c = heat_trace(&s, 1, &[0.5]).unwrap();
        assert_eq!(c.to_csv(), "t,theta,tail_bound\n5.0000000000000000e-1,1.0000000000000000e0,inf\n");
    }
}
