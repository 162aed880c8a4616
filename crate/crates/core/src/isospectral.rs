//! Geometric invariants read off a spectrum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{estimate_dimension, fit_coefficients, FIT_T_MAX};
use crate::error::{Error, Result};
use crate::heattrace::{default_grid, heat_trace};
use crate::numerics::lsq::weighted_lsq;
use crate::operators::OperatorSpectrum;

/// True iff the common trusted prefixes agree entrywise within
/// `rel_tol * max(|a|, |b|, 1)`.
pub fn compare_spectra(s1: &OperatorSpectrum, s2: &OperatorSpectrum, rel_tol: f64) -> bool {
    let (a, b) = (s1.trusted(), s2.trusted());
    let n = a.len().min(b.len());
    n > 0 && a[..n].iter().zip(&b[..n]).all(|(x, y)| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0))
}

/// Exponent `n` in `mu_k ~ C k^{2/n}`, rounded, from the upper half of the
/// trusted eigenvalues. Only used to shape the trace tail envelope.
pub fn envelope_dimension(spectrum: &OperatorSpectrum) -> Result<usize> {
    let mu = spectrum.trusted();
    let lo = mu.len() / 2;
    let pts: Vec<(f64, f64)> = (lo..mu.len())
        .filter(|&i| mu[i] > 0.0)
        .map(|i| (((i + 1) as f64).ln(), mu[i].ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::WindowTooShort { points: pts.len(), required: 4 });
    }
    let design: Vec<f64> = pts.iter().flat_map(|p| [1.0, p.0]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let slope = weighted_lsq(&design, 2, &y, &vec![1.0; y.len()])?.coefficients[1];
    Ok(((2.0 / slope).round() as usize).clamp(1, 3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralInference {
    pub n_hat: f64,
    pub vol_hat: f64,
    pub a1_hat: f64,
    pub euler_hat: Option<f64>,
    pub verdict: Option<bool>,
    pub window: [f64; 2],
}

/// `chi = 6 (a1 + D/4) / (4 pi)` with `D = int |grad f|^2`.
pub fn euler_from_a1(a1: f64, dirichlet_norm: f64) -> f64 {
    6.0 * (a1 + 0.25 * dirichlet_norm) / (4.0 * PI)
}

/// Dimension from the trace slope, then volume and `a1` from a quadratic fit
/// in the integer dimension.
pub fn infer_geometry(spectrum: &OperatorSpectrum) -> Result<SpectralInference> {
    infer_geometry_with(spectrum, &default_grid(), FIT_T_MAX)
}

pub fn infer_geometry_with(spectrum: &OperatorSpectrum, t_grid: &[f64], t_max: f64) -> Result<SpectralInference> {
    let env_dim = envelope_dimension(spectrum)?;
    let curve = heat_trace(spectrum, env_dim, t_grid)?;
    let n_hat = estimate_dimension(&curve)?;
    let n = n_hat.round().max(1.0);
    let fit = fit_coefficients(&curve, n, 2, t_max)?;
    Ok(SpectralInference {
        n_hat,
        vol_hat: fit.coefficients[0],
        a1_hat: fit.coefficients[1],
        euler_hat: None,
        verdict: None,
        window: fit.window,
    })
}

/// Euler characteristic of a surface from `a1` and the weight's Dirichlet norm.
pub fn infer_euler(inference: &SpectralInference, dirichlet_norm: f64) -> Result<f64> {
    if inference.n_hat.round() as i64 != 2 {
        return Err(Error::DimensionMismatch(format!("Euler characteristic needs a surface, n_hat = {}", inference.n_hat)));
    }
    Ok(euler_from_a1(inference.a1_hat, dirichlet_norm))
}

/// Inference for `s1` with the Euler estimate filled in for surfaces and an
/// isospectrality verdict against `s2`.
pub fn isospectral_report(
    s1: &OperatorSpectrum,
    s2: &OperatorSpectrum,
    dirichlet_norm: f64,
    rel_tol: f64,
) -> Result<(SpectralInference, SpectralInference)> {
    let verdict = compare_spectra(s1, s2, rel_tol);
    let mut out = Vec::with_capacity(2);
    for s in [s1, s2] {
        let mut inf = infer_geometry(s)?;
        inf.euler_hat = infer_euler(&inf, dirichlet_norm).ok();
        inf.verdict = Some(verdict);
        out.push(inf);
    }
    let b = out.pop().unwrap();
    Ok((out.pop().unwrap(), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{predicted_coefficients, Perturbation};
    use crate::fields::{builtin, dirichlet_energy, witten_potential, BuiltinField, TrigKind, TrigTerm};
    use crate::models::{build_circle, build_flat_torus, build_sphere};
    use crate::operators::{assemble_drifting_conjugated, assemble_schrodinger, eigen_decompose, OperatorTag};

    fn exact(m: &crate::models::SpectralModel) -> OperatorSpectrum {
        OperatorSpectrum::exact(m, m.band_limit()).unwrap()
    }

    #[test]
    fn comparisons() {
        let a = exact(&build_circle(2.0 * PI, 200).unwrap());
        let b = exact(&build_circle(2.0 * PI + 0.1, 200).unwrap());
        assert!(compare_spectra(&a, &a, 0.0));
        assert!(!compare_spectra(&a, &b, 0.03));
        assert_eq!(compare_spectra(&a, &b, 0.01), compare_spectra(&b, &a, 0.01));

        let m = build_circle(2.0 * PI, 64).unwrap();
        let f = builtin(&m, &BuiltinField::Trig { terms: vec![TrigTerm { kind: TrigKind::Sin, wavevector: vec![1], amplitude: 0.5 }] })
            .unwrap();
        let d = eigen_decompose(&assemble_drifting_conjugated(&m, &f, 32).unwrap(), OperatorTag::DriftingConjugated).unwrap();
        let w = witten_potential(&m, &f).unwrap();
        let s = eigen_decompose(&assemble_schrodinger(&m, &w, 32).unwrap(), OperatorTag::Schrodinger).unwrap();
        assert!(compare_spectra(&d, &s, 1e-15));
    }

    #[test]
    fn geometry_from_exact_spectra() {
        let s = infer_geometry(&exact(&build_sphere(1.0, 40000).unwrap())).unwrap();
        assert!((s.n_hat - 2.0).abs() < 0.05);
        assert!((s.vol_hat / (4.0 * PI) - 1.0).abs() < 0.01);
        let chi = infer_euler(&s, 0.0).unwrap();
        assert!((chi - 2.0).abs() < 0.1, "{chi}");

        let t = infer_geometry(&exact(&build_flat_torus(&[1.0, 2.0], 100_000).unwrap())).unwrap();
        assert!((t.vol_hat - 2.0).abs() < 0.02);
        assert!(infer_euler(&t, 0.0).unwrap().abs() < 0.1);

        let c = infer_geometry(&exact(&build_circle(2.0 * PI, 20001).unwrap())).unwrap();
        assert!((c.n_hat - 1.0).abs() < 0.01 && (c.vol_hat / (2.0 * PI) - 1.0).abs() < 0.01);
        assert!(matches!(infer_euler(&c, 0.0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn euler_correction_compensates() {
        let m = build_sphere(1.0, 100).unwrap();
        let zero = builtin(&m, &BuiltinField::Zero).unwrap();
        let base = predicted_coefficients(&m, Perturbation::Drifting(&zero)).unwrap();
        for (k, amp) in [(1, 0.3), (5, 0.7), (8, 1.1)] {
            let f = builtin(&m, &BuiltinField::Mode { index: k, amplitude: amp }).unwrap();
            let p = predicted_coefficients(&m, Perturbation::Drifting(&f)).unwrap();
            let d = dirichlet_energy(&m, &f);
            assert!((euler_from_a1(p.a1, d) - euler_from_a1(base.a1, 0.0)).abs() < 1e-8);
        }
        assert!((euler_from_a1(base.a1, 0.0) - 2.0).abs() < 1e-12);
    }
}
