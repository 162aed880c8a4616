//! Truncated Galerkin matrices for `Delta + V` and the drifting Laplacian
//! `Delta_f`, and their spectra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{weight_derivatives, witten_potential, ScalarField};
use crate::models::{Mode, SpectralModel, Trig};
use crate::numerics::eigen::{generalized_eigen, symmetric_eigen, symmetric_eigenvalues, Eigen, SymMatrix};
use crate::numerics::Neumaier;

/// Relative pivot floor for the mass matrix Cholesky factor.
pub const MASS_PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    /// Unperturbed model spectrum, exact up to the truncation.
    Exact,
    Schrodinger,
    DriftingConjugated,
    DriftingGalerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpectrum {
    pub tag: OperatorTag,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub trusted_count: usize,
    pub eigenvalues: Vec<f64>,
}

impl OperatorSpectrum {
    /// Model eigenvalues `lambda_0..lambda_{n-1}`; all of them are trusted.
    pub fn exact(model: &SpectralModel, n: usize) -> Result<Self> {
        check_band(model, n)?;
        Ok(Self {
            tag: OperatorTag::Exact,
            truncation: n,
            trusted_count: n,
            eigenvalues: model.eigenvalues()[..n].to_vec(),
        })
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|v| **v < 0.0).count()
    }

    pub fn trusted(&self) -> &[f64] {
        &self.eigenvalues[..self.trusted_count]
    }

    /// Every eigenvalue moved by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self { eigenvalues: self.eigenvalues.iter().map(|v| v + c).collect(), ..self.clone() }
    }
}

/// Spectrum with eigenvectors as model-basis coefficient rows.
#[derive(Debug, Clone)]
pub struct OperatorEigen {
    pub spectrum: OperatorSpectrum,
    vectors: Vec<f64>,
}

impl OperatorEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.spectrum.truncation;
        &self.vectors[k * n..(k + 1) * n]
    }
}

/// Stiffness/mass pair of the weighted Galerkin discretization.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub stiffness: SymMatrix,
    pub mass: SymMatrix,
}

fn check_band(model: &SpectralModel, n: usize) -> Result<()> {
    if n == 0 || n > model.band_limit() {
        return Err(Error::BandLimitExceeded { requested: n, available: model.band_limit() });
    }
    Ok(())
}

/// `M_jk = int V phi_j phi_k` for `j, k < n`.
pub fn coupling_matrix(model: &SpectralModel, v: &ScalarField, n: usize) -> Result<SymMatrix> {
    check_band(model, n)?;
    if model.is_flat() {
        flat_coupling(model, v, n)
    } else {
        Ok(weighted_gram(model, v.samples(), n))
    }
}

fn add(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Products of trigonometric modes reduce to cosine/sine moments of `V`.
fn flat_coupling(model: &SpectralModel, v: &ScalarField, n: usize) -> Result<SymMatrix> {
    let modes = &model.modes()[..n];
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let Mode::Flat { q: a, trig: ta } = modes[j] else { unreachable!() };
            let na = model.flat_norm(ta);
            (0..=j)
                .map(|k| {
                    let Mode::Flat { q: b, trig: tb } = modes[k] else { unreachable!() };
                    let nb = model.flat_norm(tb);
                    let val = match (ta, tb) {
                        (Trig::Const, Trig::Const) => v.flat_moments(model, a)?.0,
                        (Trig::Const, Trig::Cos) => v.flat_moments(model, b)?.0,
                        (Trig::Const, Trig::Sin) => v.flat_moments(model, b)?.1,
                        (Trig::Cos, Trig::Const) => v.flat_moments(model, a)?.0,
                        (Trig::Sin, Trig::Const) => v.flat_moments(model, a)?.1,
                        _ => {
                            let (cm, sm) = v.flat_moments(model, sub(a, b))?;
                            let (cp, sp) = v.flat_moments(model, add(a, b))?;
                            match (ta, tb) {
                                (Trig::Cos, Trig::Cos) => 0.5 * (cm + cp),
                                (Trig::Sin, Trig::Sin) => 0.5 * (cm - cp),
                                (Trig::Cos, Trig::Sin) => 0.5 * (sp - sm),
                                _ => 0.5 * (sp + sm),
                            }
                        }
                    };
                    Ok(na * nb * val)
                })
                .collect()
        })
        .collect();
    let mut m = SymMatrix::zeros(n);
    for (j, row) in rows.into_iter().enumerate() {
        for (k, val) in row?.into_iter().enumerate() {
            m.set(j, k, val);
        }
    }
    Ok(m)
}

/// `sum_i w_i g_i phi_j(x_i) phi_k(x_i)` with compensated sums.
fn weighted_gram(model: &SpectralModel, g: &[f64], n: usize) -> SymMatrix {
    let q = model.quadrature();
    let phi = model.basis_matrix(n);
    let nodes = q.len();
    let mut phit = vec![0.0; n * nodes];
    for i in 0..nodes {
        for j in 0..n {
            phit[j * nodes + i] = phi[i * n + j];
        }
    }
    let wg: Vec<f64> = q.weights.iter().zip(g).map(|(w, g)| w * g).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let pj = &phit[j * nodes..(j + 1) * nodes];
            let scaled: Vec<f64> = pj.iter().zip(&wg).map(|(p, w)| p * w).collect();
            (0..=j)
                .map(|k| {
                    let pk = &phit[k * nodes..(k + 1) * nodes];
                    let mut acc = Neumaier::new();
                    for (a, b) in scaled.iter().zip(pk) {
                        acc.add(a * b);
                    }
                    acc.total()
                })
                .collect()
        })
        .collect();
    let mut m = SymMatrix::zeros(n);
    for (j, row) in rows.into_iter().enumerate() {
        for (k, val) in row.into_iter().enumerate() {
            m.set(j, k, val);
        }
    }
    m
}

/// `diag(lambda) + M`.
pub fn assemble_schrodinger(model: &SpectralModel, v: &ScalarField, n: usize) -> Result<SymMatrix> {
    let mut m = coupling_matrix(model, v, n)?;
    for (k, lam) in model.eigenvalues()[..n].iter().enumerate() {
        m.set(k, k, m.get(k, k) + lam);
    }
    Ok(m)
}

/// `Delta + witten_potential(f)`.
pub fn assemble_drifting_conjugated(model: &SpectralModel, f: &ScalarField, n: usize) -> Result<SymMatrix> {
    check_band(model, n)?;
    let v = witten_potential(model, f)?;
    assemble_schrodinger(model, &v, n)
}

/// Weighted pencil `A = int grad phi_j . grad phi_k e^{-f}`,
/// `B = int phi_j phi_k e^{-f}`. The stiffness is formed without gradients:
/// `A = (Lambda B + B Lambda) / 2 + int phi_j phi_k e^{-f} (Delta f + |grad f|^2) / 2`.
pub fn assemble_drifting_galerkin(model: &SpectralModel, f: &ScalarField, n: usize) -> Result<Pencil> {
    check_band(model, n)?;
    let d = weight_derivatives(model, f)?;
    let ef: Vec<f64> = f.samples().iter().map(|v| (-v).exp()).collect();
    let mass = weighted_gram(model, &ef, n);
    let extra: Vec<f64> = (0..ef.len()).map(|i| 0.5 * ef[i] * (d.laplacian[i] + d.grad_sq[i])).collect();
    let mut stiffness = weighted_gram(model, &extra, n);
    let lam = model.eigenvalues();
    for j in 0..n {
        for k in 0..=j {
            let v = stiffness.get(j, k) + 0.5 * (lam[j] + lam[k]) * mass.get(j, k);
            stiffness.set(j, k, v);
        }
    }
    Ok(Pencil { stiffness, mass })
}

fn spectrum_from(tag: OperatorTag, values: Vec<f64>) -> OperatorSpectrum {
    let n = values.len();
    OperatorSpectrum { tag, truncation: n, trusted_count: n / 4, eigenvalues: values }
}

pub fn eigen_decompose(matrix: &SymMatrix, tag: OperatorTag) -> Result<OperatorSpectrum> {
    Ok(spectrum_from(tag, symmetric_eigenvalues(matrix)?))
}

pub fn eigen_decompose_pencil(pencil: &Pencil) -> Result<OperatorSpectrum> {
    let e = generalized_eigen(&pencil.stiffness, &pencil.mass, false, MASS_PD_TOL)?;
    Ok(spectrum_from(OperatorTag::DriftingGalerkin, e.values))
}

fn with_vectors(tag: OperatorTag, e: Eigen) -> OperatorEigen {
    OperatorEigen { vectors: e.vectors.unwrap_or_default(), spectrum: spectrum_from(tag, e.values) }
}

pub fn eigen_decompose_vectors(matrix: &SymMatrix, tag: OperatorTag) -> Result<OperatorEigen> {
    Ok(with_vectors(tag, symmetric_eigen(matrix)?))
}

/// Pencil eigenpairs; the vectors are orthonormal in `L^2(e^{-f} dmu)`.
pub fn eigen_decompose_pencil_vectors(pencil: &Pencil) -> Result<OperatorEigen> {
    let e = generalized_eigen(&pencil.stiffness, &pencil.mass, true, MASS_PD_TOL)?;
    Ok(with_vectors(OperatorTag::DriftingGalerkin, e))
}

/// Spectrum of `Delta + V` at truncation `n`.
pub fn schrodinger_spectrum(model: &SpectralModel, v: &ScalarField, n: usize) -> Result<OperatorSpectrum> {
    eigen_decompose(&assemble_schrodinger(model, v, n)?, OperatorTag::Schrodinger)
}

/// Spectrum of `Delta_f` through the Witten conjugation.
pub fn drifting_spectrum(model: &SpectralModel, f: &ScalarField, n: usize) -> Result<OperatorSpectrum> {
    eigen_decompose(&assemble_drifting_conjugated(model, f, n)?, OperatorTag::DriftingConjugated)
}

/// Spectrum of `Delta_f` through the weighted pencil.
pub fn drifting_galerkin_spectrum(model: &SpectralModel, f: &ScalarField, n: usize) -> Result<OperatorSpectrum> {
    eigen_decompose_pencil(&assemble_drifting_galerkin(model, f, n)?)
}
