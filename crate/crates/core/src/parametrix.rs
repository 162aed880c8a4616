//! Radial parametrix coefficients `u_i` on the model manifolds and the heat
//! invariants built from their diagonal values.
//!
//! Radial functions are stored as Chebyshev interpolants in `rho = r^2`, which
//! keeps them even in `r` and makes the radial Laplacian regular at `r = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{weight_derivatives, witten_potential, ScalarField};
use crate::heattrace::{operator_kernel, WeylEnvelope};
use crate::models::{RadialProfile, SpectralModel};
use crate::numerics::chebyshev::Chebyshev;
use crate::numerics::quadrature::adaptive_gk;
use crate::numerics::Neumaier;
use crate::operators::{assemble_drifting_galerkin, assemble_schrodinger, eigen_decompose_pencil_vectors, eigen_decompose_vectors, OperatorTag};

/// Chebyshev nodes used for each radial function.
pub const RADIAL_NODES: usize = 24;
/// Coefficients below this fraction of the largest are treated as rounding noise.
pub const CHOP_TOL: f64 = 1e-13;
/// Richardson base step as a fraction of the injectivity radius.
pub const RICHARDSON_STEP: f64 = 1e-2;
const QUAD_REL_TOL: f64 = 1e-13;

/// Radial extent of the interpolants: half the injectivity radius.
fn radial_extent(profile: &RadialProfile) -> f64 {
    0.5 * profile.injectivity_radius()
}

#[derive(Debug, Clone)]
pub struct ParametrixCoefficient {
    pub order: usize,
    /// `u_i(0)`.
    pub diagonal: f64,
    r_max: f64,
    u: Chebyshev,
    du: Chebyshev,
    d2u: Chebyshev,
}

impl ParametrixCoefficient {
    fn from_fn(order: usize, r_max: f64, diagonal: f64, f: impl Fn(f64) -> f64) -> Self {
        let u = Chebyshev::fit(|rho| f(rho.max(0.0).sqrt()), 0.0, r_max * r_max, RADIAL_NODES).chopped(CHOP_TOL);
        let du = u.derivative();
        let d2u = du.derivative();
        Self { order, diagonal, r_max, u, du, d2u }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.u.eval(r * r)
    }

    /// Positive radial Laplacian `-(1/J)(J u')'` with `J = r^{n-1} D`.
    /// With `u(r) = U(r^2)`: `-(2n U' + 4 r^2 U'' + 2 r (D'/D) U')`.
    pub fn laplacian(&self, profile: &RadialProfile, r: f64) -> f64 {
        let rho = r * r;
        let (u1, u2) = (self.du.eval(rho), self.d2u.eval(rho));
        let n = profile.dim() as f64;
        -(2.0 * n * u1 + 4.0 * rho * u2 + 2.0 * r * profile.d_prime(r) / profile.d(r) * u1)
    }

    /// Chebyshev coefficients in `rho = r^2` on `[0, r_max^2]`.
    pub fn coefficients(&self) -> &[f64] {
        self.u.coefficients()
    }
}

/// `u_0 = D^{-1/2}`.
pub fn u0(profile: &RadialProfile) -> ParametrixCoefficient {
    ParametrixCoefficient::from_fn(0, radial_extent(profile), 1.0, |r| profile.d(r).powf(-0.5))
}

/// `u_i(r) = -r^{-i} D^{-1/2}(r) int_0^r D^{1/2}(s) [Delta u_{i-1} + W u_{i-1}](s) s^{i-1} ds`
/// at a single radius, `W` being the potential along the geodesic.
pub fn u_at(
    profile: &RadialProfile,
    i: usize,
    prev: &ParametrixCoefficient,
    w: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    r: f64,
) -> Result<f64> {
    if i == 0 || prev.order + 1 != i {
        return Err(Error::InvalidParameter(format!("u_{i} needs u_{} as input", i.max(1) - 1)));
    }
    if !(r > 0.0 && r < profile.injectivity_radius()) {
        return Err(Error::InvalidParameter(format!("radius {r} outside (0, injectivity radius)")));
    }
    let integrand = |s: f64| {
        let bracket = prev.laplacian(profile, s) + w.map_or(0.0, |w| w(s) * prev.eval(s));
        profile.d(s).sqrt() * bracket * s.powi(i as i32 - 1)
    };
    let integral = adaptive_gk(integrand, 0.0, r, 0.0, QUAD_REL_TOL)
        .map_err(|e| Error::QuadratureFailure(format!("u_{i} at r = {r}: {e}")))?;
    Ok(-r.powi(-(i as i32)) * profile.d(r).powf(-0.5) * integral)
}

/// Limit `r -> 0` from samples at `h, h/2, h/4`, eliminating `O(r)` then `O(r^2)`.
pub fn richardson_diagonal(u: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let (a, b, c) = (u(h)?, u(h / 2.0)?, u(h / 4.0)?);
    let (r1, r2) = (2.0 * b - a, 2.0 * c - b);
    Ok((4.0 * r2 - r1) / 3.0)
}

/// Next coefficient for a radial (or vanishing) potential.
pub fn u_next(
    profile: &RadialProfile,
    i: usize,
    prev: &ParametrixCoefficient,
    w: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<ParametrixCoefficient> {
    let r_max = prev.r_max;
    let h = RICHARDSON_STEP * profile.injectivity_radius();
    let diagonal = richardson_diagonal(|r| u_at(profile, i, prev, w, r), h)?;
    // values at the interpolation nodes, computed in parallel then fitted
    let n = RADIAL_NODES;
    let nodes: Vec<f64> = (0..n)
        .map(|k| {
            let x = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
            let (a, b) = (0.0, r_max * r_max);
            // same expression as the interpolation nodes, so lookups are exact
            let rho: f64 = 0.5 * (b - a) * x + 0.5 * (b + a);
            rho.max(0.0).sqrt()
        })
        .collect();
    let values: Vec<Result<f64>> = nodes.par_iter().map(|&r| u_at(profile, i, prev, w, r)).collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let lookup = |r: f64| {
        let k = nodes.iter().position(|v| *v == r).expect("node lookup");
        values[k]
    };
    Ok(ParametrixCoefficient::from_fn(i, r_max, diagonal, lookup))
}

/// `u_0 .. u_m` with no potential.
pub fn coefficients(profile: &RadialProfile, m: usize) -> Result<Vec<ParametrixCoefficient>> {
    let mut out = vec![u0(profile)];
    for i in 1..=m {
        let next = u_next(profile, i, &out[i - 1], None)?;
        out.push(next);
    }
    Ok(out)
}

/// `u_1(x, x)` on a flat model for a weight `f`, following straight geodesics
/// from `x` in both directions along the first axis.
pub fn diagonal_u1_flat(model: &SpectralModel, witten: &ScalarField, x: &[f64]) -> Result<f64> {
    if !model.is_flat() {
        return Err(Error::Unsupported("non-radial weights on curved models".into()));
    }
    let profile = model.profile();
    let base = u0(&profile);
    let dim = model.dim();
    let mut dir = vec![0.0; dim];
    dir[0] = 1.0;
    let back: Vec<f64> = dir.iter().map(|v| -v).collect();
    let h = RICHARDSON_STEP * profile.injectivity_radius();
    let mut total = 0.0;
    for d in [&dir, &back] {
        let w = |s: f64| witten.value(model, &model.geodesic_point(x, d, s));
        total += 0.5 * richardson_diagonal(|r| u_at(&profile, 1, &base, Some(&w), r), h)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatInvariants {
    pub a0: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    /// Unweighted invariants `a_{0,i}`.
    pub a0i: Vec<f64>,
    /// `u_i(0)` for the unweighted recursion.
    pub u_diagonal: Vec<f64>,
    /// `int Delta f`, zero up to rounding.
    pub laplacian_integral: Option<f64>,
    pub method: String,
}

/// Heat invariants up to order `m <= 2`. With a weight, `a1` comes from the
/// parametrix on flat models and from `int (K/6 - W)` on the sphere; `a2` is
/// only produced without a weight.
pub fn heat_invariants(model: &SpectralModel, f: Option<&ScalarField>, m: usize) -> Result<HeatInvariants> {
    if m > 2 {
        return Err(Error::Unsupported(format!("heat invariants beyond order 2 (requested {m})")));
    }
    let profile = model.profile();
    let vol = model.volume();
    let us = coefficients(&profile, m)?;
    let u_diagonal: Vec<f64> = us.iter().map(|u| u.diagonal).collect();
    let a0i: Vec<f64> = u_diagonal.iter().map(|u| u * vol).collect();
    let weighted = f.filter(|f| f.coefficients().iter().any(|c| *c != 0.0));
    let Some(f) = weighted else {
        return Ok(HeatInvariants {
            a0: vol,
            a1: a0i.get(1).copied(),
            a2: a0i.get(2).copied(),
            a0i,
            u_diagonal,
            laplacian_integral: None,
            method: "parametrix".into(),
        });
    };
    let d = weight_derivatives(model, f)?;
    let q = model.quadrature();
    let mut lap = Neumaier::new();
    for (wt, l) in q.weights.iter().zip(&d.laplacian) {
        lap.add(wt * l);
    }
    let a1 = if m == 0 {
        None
    } else if model.is_flat() {
        let witten = witten_potential(model, f)?;
        let vals: Vec<Result<f64>> = (0..q.len()).into_par_iter().map(|i| diagonal_u1_flat(model, &witten, q.node(i))).collect();
        let mut acc = Neumaier::new();
        for (wt, v) in q.weights.iter().zip(vals) {
            acc.add(wt * v?);
        }
        Some(acc.total())
    } else {
        let k6 = model.scalar_curvature() / 6.0;
        let mut acc = Neumaier::new();
        for i in 0..q.len() {
            acc.add(q.weights[i] * (k6 - 0.5 * d.laplacian[i] - 0.25 * d.grad_sq[i]));
        }
        Some(acc.total())
    };
    Ok(HeatInvariants {
        a0: vol,
        a1,
        a2: None,
        a0i,
        u_diagonal,
        laplacian_integral: Some(lap.total()),
        method: "parametrix".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    /// Weighted kernel from the drifting pencil.
    pub drifting: f64,
    /// `e^{(f(x) + f(y))/2} H_V(t, x, y)` from the Schrodinger eigenpairs.
    pub conjugated: f64,
    pub tail_bound: f64,
}

/// Both sides of `H_f(t, x, y) = e^{(f(x) + f(y))/2} H_V(t, x, y)` at truncation `n`.
pub fn weighted_kernel_relation(model: &SpectralModel, f: &ScalarField, t: f64, x: &[f64], y: &[f64], n: usize) -> Result<KernelPair> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let v = witten_potential(model, f)?;
    let plain = eigen_decompose_vectors(&assemble_schrodinger(model, &v, n)?, OperatorTag::Schrodinger)?;
    let weighted = eigen_decompose_pencil_vectors(&assemble_drifting_galerkin(model, f, n)?)?;
    let hv = operator_kernel(model, &plain, t, x, y);
    let hf = operator_kernel(model, &weighted, t, x, y);
    let conjugated = (0.5 * (f.value(model, x) + f.value(model, y))).exp() * hv;
    // omitted eigenpairs, bounded through the trusted envelope and the weight
    let env = WeylEnvelope::fit(plain.spectrum.trusted(), model.dim());
    let grow = (f.sup_norm()).exp();
    let tail_bound = 2.0 / model.volume() * grow * env.tail(t);
    if tail_bound > 1e-10 * hf.abs().max(conjugated.abs()) {
        return Err(Error::TailTolerance { tolerance: tail_bound });
    }
    Ok(KernelPair { drifting: hf, conjugated, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, BuiltinField, TrigKind, TrigTerm};
    use crate::models::{build_circle, build_flat_torus, build_sphere};
    use std::f64::consts::PI;

    fn trig(m: &SpectralModel, terms: &[(TrigKind, Vec<i32>, f64)]) -> ScalarField {
        let terms = terms.iter().map(|(k, q, a)| TrigTerm { kind: *k, wavevector: q.clone(), amplitude: *a }).collect();
        builtin(m, &BuiltinField::Trig { terms }).unwrap()
    }

    #[test]
    fn u0_examples() {
        let flat = RadialProfile::Flat { dim: 2, injectivity: 0.5 };
        let u = u0(&flat);
        assert!((u.eval(0.1) - 1.0).abs() < 1e-14 && u.diagonal == 1.0);
        let s = RadialProfile::Sphere { radius: 1.0 };
        let u = u0(&s);
        for r in [1e-3, 0.4, 1.2] {
            assert!((u.eval(r) - (r.sin() / r).powf(-0.5)).abs() < 1e-12);
        }
        assert!((u.eval(0.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn radial_laplacian_of_known_functions() {
        // u = cos r on the unit sphere: Delta u = -(u'' + cot r u') = 2 cos r
        let s = RadialProfile::Sphere { radius: 1.0 };
        let c = ParametrixCoefficient::from_fn(0, 1.5, 1.0, |r| r.cos());
        for r in [1e-4, 0.3, 1.0] {
            assert!((c.laplacian(&s, r) - 2.0 * r.cos()).abs() < 1e-9, "{r}");
        }
        // u = r^2 in flat R^3: Delta u = -6
        let f = RadialProfile::Flat { dim: 3, injectivity: 0.5 };
        let c = ParametrixCoefficient::from_fn(0, 0.25, 0.0, |r| r * r);
        assert!((c.laplacian(&f, 0.1) + 6.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_diagonals() {
        let us = coefficients(&RadialProfile::Sphere { radius: 1.0 }, 2).unwrap();
        assert!((us[1].diagonal - 1.0 / 3.0).abs() < 1e-8, "{}", us[1].diagonal);
        assert!((us[2].diagonal - 1.0 / 15.0).abs() < 1e-8, "{}", us[2].diagonal);
        let r2 = coefficients(&RadialProfile::Sphere { radius: 2.0 }, 1).unwrap();
        assert!((r2[1].diagonal - 0.5 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn flat_recursion_vanishes() {
        let us = coefficients(&RadialProfile::Flat { dim: 2, injectivity: 0.5 }, 2).unwrap();
        assert_eq!(us[1].diagonal, 0.0);
        assert_eq!(us[2].diagonal, 0.0);
    }

    #[test]
    fn invariants_without_weight() {
        let s = build_sphere(1.0, 100).unwrap();
        let h = heat_invariants(&s, None, 2).unwrap();
        assert!((h.a0 - 4.0 * PI).abs() < 1e-12);
        assert!((h.a1.unwrap() - 4.0 * PI / 3.0).abs() < 1e-7);
        assert!((h.a2.unwrap() - 4.0 * PI / 15.0).abs() < 1e-7);
        let t = build_flat_torus(&[1.0, 1.0], 50).unwrap();
        let h = heat_invariants(&t, None, 2).unwrap();
        assert_eq!((h.a0, h.a1, h.a2), (1.0, Some(0.0), Some(0.0)));
        assert!(heat_invariants(&t, None, 3).is_err());
        let j = serde_json::to_value(&h).unwrap();
        assert_eq!(j["method"], "parametrix");
    }

    #[test]
    fn u1_on_flat_model_with_weight() {
        let m = build_circle(2.0 * PI, 64).unwrap();
        let f = trig(&m, &[(TrigKind::Sin, vec![1], 0.5), (TrigKind::Cos, vec![2], 0.2)]);
        let w = witten_potential(&m, &f).unwrap();
        for x in [0.0, 1.0, 4.0] {
            let u = diagonal_u1_flat(&m, &w, &[x]).unwrap();
            assert!((u + w.value(&m, &[x])).abs() < 1e-6, "{x}: {u}");
        }
    }

    #[test]
    fn invariants_with_weight() {
        let m = build_circle(2.0 * PI, 64).unwrap();
        let a = (4.0 / PI).sqrt();
        let f = trig(&m, &[(TrigKind::Sin, vec![1], a)]);
        let h = heat_invariants(&m, Some(&f), 1).unwrap();
        assert!((h.a1.unwrap() + 1.0).abs() < 1e-6, "{:?}", h.a1);
        assert!(h.laplacian_integral.unwrap().abs() < 1e-10);

        let t = build_flat_torus(&[1.0, 1.0], 100).unwrap();
        let f = trig(&t, &[(TrigKind::Cos, vec![1, 1], 0.1)]);
        let h = heat_invariants(&t, Some(&f), 1).unwrap();
        let e = crate::fields::dirichlet_energy(&t, &f);
        assert!((h.a1.unwrap() + 0.25 * e).abs() < 1e-6);

        let s = build_sphere(1.0, 49).unwrap();
        let f = builtin(&s, &BuiltinField::Mode { index: 3, amplitude: 0.4 }).unwrap();
        let h = heat_invariants(&s, Some(&f), 1).unwrap();
        let e = crate::fields::dirichlet_energy(&s, &f);
        assert!((h.a1.unwrap() - (4.0 * PI / 3.0 - 0.25 * e)).abs() < 1e-10);
        assert!(h.laplacian_integral.unwrap().abs() < 1e-10);
    }

    #[test]
    fn kernel_relation() {
        let m = build_circle(2.0 * PI, 128).unwrap();
        let f = trig(&m, &[(TrigKind::Sin, vec![1], 0.3)]);
        let p = weighted_kernel_relation(&m, &f, 0.5, &[0.0], &[0.0], 64).unwrap();
        assert!((p.drifting - p.conjugated).abs() < 1e-7, "{p:?}");

        let c = builtin(&m, &BuiltinField::Constant { value: 0.7 }).unwrap();
        let p = weighted_kernel_relation(&m, &c, 0.5, &[1.0], &[2.0], 64).unwrap();
        assert!((p.drifting - p.conjugated).abs() < 1e-12);

        let z = builtin(&m, &BuiltinField::Zero).unwrap();
        let p = weighted_kernel_relation(&m, &z, 0.5, &[1.0], &[2.0], 64).unwrap();
        assert!((p.drifting - p.conjugated).abs() < 1e-13);
        assert!(weighted_kernel_relation(&m, &z, 1e-4, &[1.0], &[1.0], 64).is_err());
    }
}
