//! Short-time expansion fits, predicted coefficients and the H^1 test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{dirichlet_energy, h1_seminorm_sq, l2_norm_sq, witten_potential, H1Seminorm, ScalarField};
use crate::heattrace::{heat_trace, HeatTraceCurve};
use crate::models::{ModelKind, SpectralModel};
use crate::numerics::lsq::weighted_lsq;
use crate::operators::OperatorSpectrum;

/// Upper end of the coefficient fit window.
pub const FIT_T_MAX: f64 = 1e-2;
/// Upper end of the remainder window.
pub const REMAINDER_T_MAX: f64 = 1e-1;
/// Exponent separating jump-type from `H^1` remainders.
pub const H1_THRESHOLD: f64 = 2.75;
/// Half-width of the indeterminate band around [`H1_THRESHOLD`].
pub const H1_BAND: f64 = 0.1;
pub const CONDITION_WARNING: f64 = 1e8;

/// `(4 pi t)^{n/2}`.
pub fn scale(t: f64, n: f64) -> f64 {
    (4.0 * PI * t).powf(n / 2.0)
}

fn window_indices(curve: &HeatTraceCurve, t_max: f64) -> Vec<usize> {
    curve.trusted_range().filter(|&i| curve.t[i] <= t_max * (1.0 + 1e-12)).collect()
}

/// `n_hat = -2 d log Theta / d log t` over the smallest trusted decade (at least 10 points).
pub fn estimate_dimension(curve: &HeatTraceCurve) -> Result<f64> {
    let r = curve.trusted_range();
    if r.len() < 10 {
        return Err(Error::WindowTooShort { points: r.len(), required: 10 });
    }
    let t0 = curve.t[r.start];
    let idx: Vec<usize> = r.clone().filter(|&i| curve.t[i] <= 10.0 * t0 * (1.0 + 1e-12)).collect();
    let idx = if idx.len() < 10 { r.take(10).collect() } else { idx };
    let mut design = Vec::with_capacity(2 * idx.len());
    let mut y = Vec::with_capacity(idx.len());
    for &i in &idx {
        design.extend_from_slice(&[1.0, curve.t[i].ln()]);
        y.push(curve.theta[i].ln());
    }
    let fit = weighted_lsq(&design, 2, &y, &vec![1.0; y.len()])?;
    Ok(-2.0 * fit.coefficients[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub n_hat: f64,
    /// Dimension used in the `(4 pi t)^{n/2}` scaling.
    pub n: f64,
    pub coefficients: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub window: [f64; 2],
    pub points: usize,
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

/// Weighted fit of `(4 pi t)^{n/2} Theta(t)` by a degree-`m` polynomial in `t`
/// over the trusted part of `[.., t_max]`. Squared weights scale like `t^{-m}`.
pub fn fit_coefficients(curve: &HeatTraceCurve, n: f64, m: usize, t_max: f64) -> Result<ExpansionFit> {
    if m > 3 {
        return Err(Error::InvalidParameter(format!("fit degree {m} exceeds 3")));
    }
    let idx = window_indices(curve, t_max);
    let required = m + 3;
    if idx.len() < required {
        return Err(Error::WindowTooShort { points: idx.len(), required });
    }
    let t_lo = curve.t[idx[0]];
    let solve = |deg: usize| -> Result<(crate::numerics::lsq::LsqFit, Vec<f64>)> {
        let cols = deg + 1;
        let mut design = Vec::with_capacity(cols * idx.len());
        let mut y = Vec::with_capacity(idx.len());
        let mut w = Vec::with_capacity(idx.len());
        for &i in &idx {
            let t = curve.t[i];
            let mut p = 1.0;
            for _ in 0..cols {
                design.push(p);
                p *= t;
            }
            y.push(scale(t, n) * curve.theta[i]);
            w.push((t / t_lo).powf(-(m as f64) / 2.0));
        }
        Ok((weighted_lsq(&design, cols, &y, &w)?, y))
    };
    let (fit, y) = solve(m)?;
    // truncation: shift of each coefficient when one more power is fitted
    let higher = if idx.len() >= m + 4 { solve(m + 1).ok().map(|f| f.0.coefficients) } else { None };
    // rounding floor: each y_i carries about 1e-15 relative error
    let floor = 1e-15 * y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let uncertainties = (0..=m)
        .map(|k| {
            let trunc = higher.as_ref().map_or(0.0, |h| (h[k] - fit.coefficients[k]).abs());
            fit.std_errors[k].max(trunc).max(floor * (2.0 + m as f64) / t_max.powi(k as i32))
        })
        .collect();
    Ok(ExpansionFit {
        n_hat: estimate_dimension(curve).unwrap_or(f64::NAN),
        n,
        coefficients: fit.coefficients,
        uncertainties,
        window: [t_lo, curve.t[*idx.last().unwrap()]],
        points: idx.len(),
        condition_number: fit.condition,
        ill_conditioned: fit.condition > CONDITION_WARNING,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A02Source {
    FlatZero,
    SphereDerived,
    Parametrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a02: f64,
    pub a02_source: A02Source,
}

impl PredictedCoefficients {
    pub fn as_array(&self) -> [f64; 3] {
        [self.a0, self.a1, self.a2]
    }

    /// `a0 + a1 t + a2 t^2`.
    pub fn eval(&self, t: f64) -> f64 {
        self.a0 + t * (self.a1 + t * self.a2)
    }
}

/// Potential entering an operator, either directly or through a weight.
#[derive(Debug, Clone, Copy)]
pub enum Perturbation<'a> {
    Schrodinger(&'a ScalarField),
    Drifting(&'a ScalarField),
}

/// Curvature-only `t^2` coefficient of the unperturbed trace.
pub fn a02(model: &SpectralModel) -> (f64, A02Source) {
    match model.kind() {
        ModelKind::Sphere { radius } => (4.0 * PI / (15.0 * radius * radius), A02Source::SphereDerived),
        _ => (0.0, A02Source::FlatZero),
    }
}

pub fn predicted_coefficients(model: &SpectralModel, p: Perturbation<'_>) -> Result<PredictedCoefficients> {
    let vol = model.volume();
    let k = model.scalar_curvature();
    let (a02, a02_source) = a02(model);
    let (a1, v) = match p {
        Perturbation::Schrodinger(v) => (k * vol / 6.0 - v.integral(model), v.clone()),
        Perturbation::Drifting(f) => (k * vol / 6.0 - 0.25 * dirichlet_energy(model, f), witten_potential(model, f)?),
    };
    let a2 = a02 + 0.5 * l2_norm_sq(model, &v).total - k * v.integral(model) / 6.0;
    Ok(PredictedCoefficients { a0: vol, a1, a2, a02, a02_source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderFit {
    /// `None` when the residual sits at the noise floor.
    pub exponent: Option<f64>,
    pub window: [f64; 2],
    pub points: usize,
    pub below_noise_floor: usize,
    pub note: Option<String>,
}

/// Slope of `log |R(t)|` against `log t`, `R = (4 pi t)^{n/2} Theta - (a0 + a1 t + a2 t^2)`,
/// over the trusted window up to `t_max`. Points within ten times the noise
/// floor (tail bound plus rounding) are dropped.
pub fn remainder_exponent(curve: &HeatTraceCurve, predicted: &PredictedCoefficients, t_max: f64) -> Result<RemainderFit> {
    let n = curve.dim as f64;
    let idx = window_indices(curve, t_max);
    if idx.is_empty() {
        return Err(Error::WindowTooShort { points: 0, required: 3 });
    }
    let window = [curve.t[idx[0]], curve.t[*idx.last().unwrap()]];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for &i in &idx {
        let t = curve.t[i];
        let s = scale(t, n);
        let y = s * curve.theta[i];
        let r = y - predicted.eval(t);
        let noise = 10.0 * (s * curve.tail_bound[i] + 64.0 * f64::EPSILON * y.abs().max(predicted.a0.abs()));
        if r.abs() > noise {
            xs.push(t.ln());
            ys.push(r.abs().ln());
        } else {
            dropped += 1;
        }
    }
    if xs.len() < 3 {
        return Ok(RemainderFit {
            exponent: None,
            window,
            points: xs.len(),
            below_noise_floor: dropped,
            note: Some("exponent undetermined (smooth-consistent): residual at noise floor".into()),
        });
    }
    let design: Vec<f64> = xs.iter().flat_map(|x| [1.0, *x]).collect();
    let fit = weighted_lsq(&design, 2, &ys, &vec![1.0; ys.len()])?;
    Ok(RemainderFit {
        exponent: Some(fit.coefficients[1]),
        window,
        points: xs.len(),
        below_noise_floor: dropped,
        note: (dropped > 0).then(|| format!("{dropped} points at noise floor")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H1Class {
    H1Consistent,
    NotH1Consistent,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Classification {
    pub classification: H1Class,
    /// Decision from the remainder exponent alone.
    pub from_remainder: H1Class,
    pub remainder: RemainderFit,
    pub predicted: PredictedCoefficients,
    pub fourier_divergent: bool,
    pub fourier_growth_exponent: f64,
    pub mean_removed: f64,
    pub annotation: Option<String>,
}

fn decide(exponent: f64) -> H1Class {
    if exponent >= H1_THRESHOLD + H1_BAND {
        H1Class::H1Consistent
    } else if exponent <= H1_THRESHOLD - H1_BAND {
        H1Class::NotH1Consistent
    } else {
        H1Class::Indeterminate
    }
}

/// Classify `V` from the Schrodinger spectrum `spectrum` of `Delta + V`.
/// The mean of `V` is removed first via `Theta_{V - c} = e^{ct} Theta_V`, so the
/// decision is unchanged by constant shifts.
pub fn classify_h1(model: &SpectralModel, v: &ScalarField, spectrum: &OperatorSpectrum, t_grid: &[f64]) -> Result<H1Classification> {
    let c = v.mean(model);
    let v0 = v.shifted(model, -c);
    let s0 = spectrum.shifted(-c);
    let curve = heat_trace(&s0, model.dim(), t_grid)?;
    let predicted = predicted_coefficients(model, Perturbation::Schrodinger(&v0))?;
    let remainder = remainder_exponent(&curve, &predicted, REMAINDER_T_MAX)?;
    let diag: H1Seminorm = h1_seminorm_sq(model, &v0);
    let (from_remainder, mut annotation) = match remainder.exponent {
        Some(e) => (decide(e), None),
        None => (H1Class::H1Consistent, Some("noise-floor".to_string())),
    };
    let from_fourier = if diag.divergent { H1Class::NotH1Consistent } else { H1Class::H1Consistent };
    let classification = match from_remainder {
        H1Class::Indeterminate => H1Class::Indeterminate,
        r if r == from_fourier => r,
        _ => {
            annotation = Some("remainder and Fourier diagnostics disagree".into());
            H1Class::Indeterminate
        }
    };
    Ok(H1Classification {
        classification,
        from_remainder,
        remainder,
        predicted,
        fourier_divergent: diag.divergent,
        fourier_growth_exponent: diag.growth_exponent,
        mean_removed: c,
        annotation,
    })
}

/// JSON summary of one asymptotics run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub n_hat: f64,
    pub coefficients: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub predicted: Option<PredictedCoefficients>,
    pub remainder_exponent: Option<f64>,
    pub classification: Option<H1Class>,
    pub window: [f64; 2],
    pub condition_number: f64,
}

impl AsymptoticsReport {
    pub fn new(
        fit: &ExpansionFit,
        predicted: Option<PredictedCoefficients>,
        remainder: Option<&RemainderFit>,
        classification: Option<H1Class>,
    ) -> Self {
        Self {
            n_hat: fit.n_hat,
            coefficients: fit.coefficients.clone(),
            uncertainties: fit.uncertainties.clone(),
            predicted,
            remainder_exponent: remainder.and_then(|r| r.exponent),
            classification,
            window: fit.window,
            condition_number: fit.condition_number,
        }
    }

    /// Plain text table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!("n_hat      {:.6}\nwindow     [{:.3e}, {:.3e}]\n", self.n_hat, self.window[0], self.window[1]);
        s.push_str("coef       fitted                   +/-          predicted\n");
        for (i, (c, u)) in self.coefficients.iter().zip(&self.uncertainties).enumerate() {
            let p = self.predicted.as_ref().and_then(|p| p.as_array().get(i).copied());
            let p = p.map(|v| format!("{v:.12e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!("a{i}         {c:<+24.15e} {u:<12.3e} {p}\n"));
        }
        if let Some(e) = self.remainder_exponent {
            s.push_str(&format!("remainder  {e:.4}\n"));
        }
        if let Some(c) = self.classification {
            s.push_str(&format!("class      {}\n", serde_json::to_value(c).unwrap().as_str().unwrap()));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, BuiltinField, TrigKind, TrigTerm};
    use crate::heattrace::default_grid;
    use crate::models::{build_circle, build_flat_torus, build_sphere};
    use crate::operators::{schrodinger_spectrum, OperatorTag};

    fn exact_curve(model: &SpectralModel) -> HeatTraceCurve {
        let s = OperatorSpectrum::exact(model, model.band_limit()).unwrap();
        heat_trace(&s, model.dim(), &default_grid()).unwrap()
    }

    #[test]
    fn dimension_estimates() {
        let c = exact_curve(&build_circle(2.0 * PI, 20001).unwrap());
        assert!((estimate_dimension(&c).unwrap() - 1.0).abs() < 0.01);
        let s = exact_curve(&build_sphere(1.0, 40000).unwrap());
        assert!((estimate_dimension(&s).unwrap() - 2.0).abs() < 0.05);
        let t = exact_curve(&build_flat_torus(&[1.0, 1.0, 1.0], 200_000).unwrap());
        assert!((estimate_dimension(&t).unwrap() - 3.0).abs() < 0.05);
    }

    #[test]
    fn short_window_rejected() {
        let s = OperatorSpectrum { tag: OperatorTag::Exact, truncation: 1, trusted_count: 1, eigenvalues: vec![0.0] };
        let c = heat_trace(&s, 1, &default_grid()).unwrap();
        assert!(matches!(estimate_dimension(&c), Err(Error::WindowTooShort { .. })));
        assert!(fit_coefficients(&c, 1.0, 2, FIT_T_MAX).is_err());
    }

    #[test]
    fn circle_fit() {
        let c = exact_curve(&build_circle(2.0 * PI, 20001).unwrap());
        let f = fit_coefficients(&c, 1.0, 2, FIT_T_MAX).unwrap();
        assert!((f.coefficients[0] - 2.0 * PI).abs() < 1e-8);
        assert!(f.coefficients[1].abs() < 1e-8 && f.coefficients[2].abs() < 1e-8);
        assert!(f.window[0] >= c.trusted_t_min().unwrap());
    }

    #[test]
    fn sphere_fit_against_summation_oracle() {
        let m = build_sphere(1.0, 40000).unwrap();
        let c = exact_curve(&m);
        let f = fit_coefficients(&c, 2.0, 3, FIT_T_MAX).unwrap();
        // Richardson on the shell sum: the t^2 coefficient of 4 pi t Theta(t)
        let shell = |t: f64| -> f64 {
            4.0 * PI * t * (0..400u32).map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t).exp()).sum::<f64>()
        };
        let g = |h: f64| (shell(h) - 4.0 * PI - 4.0 * PI * h / 3.0) / (h * h);
        let (h, r) = (0.02, 2.0);
        let a2 = (r * g(h / r) - g(h)) / (r - 1.0);
        assert!((a2 / (4.0 * PI / 15.0) - 1.0).abs() < 1e-4);
        let target = [4.0 * PI, 4.0 * PI / 3.0, a2];
        for i in 0..3 {
            assert!((f.coefficients[i] / target[i] - 1.0).abs() < 1e-3, "a{i} = {}", f.coefficients[i]);
        }
        let p = predicted_coefficients(&m, Perturbation::Schrodinger(&builtin(&m, &BuiltinField::Zero).unwrap())).unwrap();
        for i in 0..3 {
            assert!((f.coefficients[i] - p.as_array()[i]).abs() < 3.0 * f.uncertainties[i].max(1e-9), "a{i} {:?} {:?} {:?}", f.coefficients, f.uncertainties, f.window);
        }
        assert_eq!(p.a02_source, A02Source::SphereDerived);
    }

    #[test]
    fn predicted_examples() {
        let t = build_flat_torus(&[1.0, 1.0], 200).unwrap();
        let v = builtin(&t, &BuiltinField::Constant { value: 0.3 }).unwrap();
        let p = predicted_coefficients(&t, Perturbation::Schrodinger(&v)).unwrap();
        assert!((p.a1 + 0.3).abs() < 1e-14);
        assert!((p.a2 - 0.045).abs() < 1e-14);

        let c = build_circle(2.0 * PI, 200).unwrap();
        // f = a sin x with int |f'|^2 = a^2 pi = 4
        let a = (4.0 / PI).sqrt();
        let f = builtin(&c, &BuiltinField::Trig { terms: vec![TrigTerm { kind: TrigKind::Sin, wavevector: vec![1], amplitude: a }] })
            .unwrap();
        let pd = predicted_coefficients(&c, Perturbation::Drifting(&f)).unwrap();
        assert!((pd.a1 + 1.0).abs() < 1e-12);
        let w = witten_potential(&c, &f).unwrap();
        let ps = predicted_coefficients(&c, Perturbation::Schrodinger(&w)).unwrap();
        assert!((pd.a1 - ps.a1).abs() < 1e-10 && (pd.a2 - ps.a2).abs() < 1e-10);
    }

    #[test]
    fn constant_potential_remainder() {
        let m = build_circle(2.0 * PI, 20001).unwrap();
        let v = builtin(&m, &BuiltinField::Constant { value: 2.0 }).unwrap();
        let s = OperatorSpectrum::exact(&m, m.band_limit()).unwrap().shifted(2.0);
        let curve = heat_trace(&s, 1, &default_grid()).unwrap();
        let p = predicted_coefficients(&m, Perturbation::Schrodinger(&v)).unwrap();
        let r = remainder_exponent(&curve, &p, REMAINDER_T_MAX).unwrap();
        assert!((r.exponent.unwrap() - 3.0).abs() < 0.1, "{r:?}");

        let z = builtin(&m, &BuiltinField::Zero).unwrap();
        let p0 = predicted_coefficients(&m, Perturbation::Schrodinger(&z)).unwrap();
        let c0 = heat_trace(&OperatorSpectrum::exact(&m, m.band_limit()).unwrap(), 1, &default_grid()).unwrap();
        let r0 = remainder_exponent(&c0, &p0, REMAINDER_T_MAX).unwrap();
        assert!(r0.exponent.is_none() && r0.note.is_some());
    }

    #[test]
    fn classify_trig_and_zero() {
        let m = build_circle(2.0 * PI, 1024).unwrap();
        let grid = default_grid();
        let v = builtin(&m, &BuiltinField::RandomTrig { max_wavenumber: 3, amplitude: 1.0, seed: 9 }).unwrap();
        let s = schrodinger_spectrum(&m, &v, 1024).unwrap();
        let c = classify_h1(&m, &v, &s, &grid).unwrap();
        assert_eq!(c.classification, H1Class::H1Consistent, "{c:?}");

        let shifted = v.shifted(&m, 3.5);
        let c2 = classify_h1(&m, &shifted, &s.shifted(3.5), &grid).unwrap();
        assert_eq!(c2.classification, c.classification);
        assert!((c2.remainder.exponent.unwrap() - c.remainder.exponent.unwrap()).abs() < 1e-6);

        let z = builtin(&m, &BuiltinField::Zero).unwrap();
        let sz = OperatorSpectrum { tag: OperatorTag::Schrodinger, ..OperatorSpectrum::exact(&m, 1024).unwrap() };
        let sz = OperatorSpectrum { trusted_count: 256, ..sz };
        let cz = classify_h1(&m, &z, &sz, &grid).unwrap();
        assert_eq!(cz.classification, H1Class::H1Consistent);
        assert_eq!(cz.annotation.as_deref(), Some("noise-floor"));
    }

    #[test]
    fn report_table() {
        let c = exact_curve(&build_circle(2.0 * PI, 20001).unwrap());
        let f = fit_coefficients(&c, 1.0, 2, FIT_T_MAX).unwrap();
        let r = AsymptoticsReport::new(&f, None, None, Some(H1Class::H1Consistent));
        let t = r.table();
        assert!(t.contains("a2") && t.contains("h1_consistent"));
        let j = serde_json::to_value(&r).unwrap();
        for k in ["n_hat", "coefficients", "uncertainties", "remainder_exponent", "classification", "window"] {
            assert!(j.get(k).is_some(), "{k}");
        }
    }
}
