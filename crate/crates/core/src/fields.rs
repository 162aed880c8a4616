//! Scalar fields on a model: potentials `V` and weights `f`.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{canonicalize, Mode, SpectralModel, Trig};
use crate::numerics::Neumaier;

/// Nodes per parallel work unit; fixed so results do not depend on the pool.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub kind: TrigKind,
    pub wavevector: Vec<i32>,
    pub amplitude: f64,
}

/// Named test fields. Sawtooth and triangle act along the first axis of a
/// flat model: `a s(2 pi x1 / L1)` with `s(theta) = theta / pi` on
/// `(-pi, pi]` (0 at the jump) and `a (1 - 2|theta| / pi)` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", content = "params", rename_all = "snake_case")]
pub enum BuiltinField {
    Zero,
    Constant { value: f64 },
    /// `amplitude * phi_index`.
    Mode { index: usize, amplitude: f64 },
    /// Sum of `amplitude * cos/sin(2 pi q.x / L)`.
    Trig { terms: Vec<TrigTerm> },
    /// Uniform random amplitudes in `[-amplitude, amplitude]` on every
    /// nonconstant mode with `|q_i| <= max_wavenumber` (flat) or
    /// `1 <= l <= max_wavenumber` (sphere). Generator: ChaCha8 seeded by `seed`.
    RandomTrig { max_wavenumber: u32, amplitude: f64, seed: u64 },
    Sawtooth { amplitude: f64 },
    Triangle { amplitude: f64 },
}

/// Field document: a named built-in or explicit model-basis coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Builtin(BuiltinField),
    Coefficients {
        #[serde(default)]
        model_ref: Option<String>,
        coefficients: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Sawtooth,
    Triangle,
}

/// Closed-form coefficients for fields that are not band-limited.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Analytic {
    shape: Shape,
    amplitude: f64,
    offset: f64,
}

impl Analytic {
    fn value(&self, model: &SpectralModel, x: &[f64]) -> f64 {
        let l1 = model.lengths()[0];
        let u = (x[0] / l1 + 0.5).rem_euclid(1.0) - 0.5;
        let base = match self.shape {
            Shape::Sawtooth => {
                if u.abs() >= 0.5 {
                    0.0
                } else {
                    2.0 * u
                }
            }
            Shape::Triangle => 1.0 - 4.0 * u.abs(),
        };
        self.amplitude * base + self.offset
    }

    fn coefficient(&self, model: &SpectralModel, mode: &Mode) -> f64 {
        let Mode::Flat { q, trig } = mode else { return 0.0 };
        let vol = model.volume();
        if *trig == Trig::Const {
            return self.offset * vol.sqrt();
        }
        if q[1] != 0 || q[2] != 0 {
            return 0.0;
        }
        let k = q[0] as f64;
        let sign = if q[0] % 2 == 0 { -1.0 } else { 1.0 };
        match (self.shape, trig) {
            (Shape::Sawtooth, Trig::Sin) => self.amplitude * (2.0 * vol).sqrt() * sign / (PI * k),
            (Shape::Triangle, Trig::Cos) if q[0] % 2 != 0 => {
                self.amplitude * 4.0 * (2.0 * vol).sqrt() / (PI * PI * k * k)
            }
            _ => 0.0,
        }
    }

    /// `int V^2` in closed form.
    fn l2_sq(&self, model: &SpectralModel) -> f64 {
        // both shapes have mean 0 and mean square 1/3
        model.volume() * (self.amplitude * self.amplitude / 3.0 + self.offset * self.offset)
    }
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    coefficients: Vec<f64>,
    samples: Vec<f64>,
    sup_norm: f64,
    band_limited: bool,
    analytic: Option<Analytic>,
    description: String,
}

/// `||V||^2` as a partial coefficient sum and by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Norm {
    pub partial: f64,
    pub total: f64,
    /// `total - partial`: mass outside the band.
    pub tail: f64,
}

/// `||grad V||^2 = sum lambda_k V_k^2` with its growth diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Seminorm {
    pub partial: f64,
    /// `(band, partial sum up to band)` at B/8, B/4, B/2, B.
    pub band_sums: Vec<(usize, f64)>,
    /// Log-log slope of the partial sums against the band.
    pub growth_exponent: f64,
    pub divergent: bool,
}

/// Slope above which the partial sums are read as divergent.
pub const H1_GROWTH_THRESHOLD: f64 = 0.25;

impl ScalarField {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_band_limited(&self) -> bool {
        self.band_limited
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Number of leading modes holding every nonzero coefficient.
    pub fn band(&self) -> usize {
        self.coefficients.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1)
    }

    /// Mean value `int V / Vol`.
    pub fn mean(&self, model: &SpectralModel) -> f64 {
        self.coefficients[0] / model.volume().sqrt()
    }

    /// `int V dmu`.
    pub fn integral(&self, model: &SpectralModel) -> f64 {
        self.coefficients[0] * model.volume().sqrt()
    }

    /// Coefficient on any mode label, including ones beyond the model band.
    pub fn coefficient_of(&self, model: &SpectralModel, mode: &Mode) -> Result<f64> {
        if let Some(a) = &self.analytic {
            return Ok(a.coefficient(model, mode));
        }
        if let Some(i) = mode_index(model, mode) {
            return Ok(self.coefficients[i]);
        }
        if self.band_limited {
            Ok(0.0)
        } else {
            Err(Error::NotBandLimited { residual: f64::NAN })
        }
    }

    /// `(int V cos(2 pi q.x / L), int V sin(2 pi q.x / L))` for any integer `q`.
    pub fn flat_moments(&self, model: &SpectralModel, q: [i32; 3]) -> Result<(f64, f64)> {
        let (c, sign) = canonicalize(q);
        if c == [0; 3] {
            let a0 = model.flat_norm(Trig::Const);
            return Ok((self.coefficient_of(model, &Mode::Flat { q: c, trig: Trig::Const })? / a0, 0.0));
        }
        let a = model.flat_norm(Trig::Cos);
        let cc = self.coefficient_of(model, &Mode::Flat { q: c, trig: Trig::Cos })? / a;
        let ss = self.coefficient_of(model, &Mode::Flat { q: c, trig: Trig::Sin })? / a;
        Ok((cc, sign as f64 * ss))
    }

    /// Value at a point: closed form when available, else the expansion.
    pub fn value(&self, model: &SpectralModel, x: &[f64]) -> f64 {
        if let Some(a) = &self.analytic {
            return a.value(model, x);
        }
        let mut acc = Neumaier::new();
        for (k, c) in self.coefficients.iter().enumerate() {
            if *c != 0.0 {
                acc.add(c * model.eval(k, x));
            }
        }
        acc.total()
    }

    /// `V + c`.
    pub fn shifted(&self, model: &SpectralModel, c: f64) -> ScalarField {
        let mut out = self.clone();
        out.coefficients[0] += c * model.volume().sqrt();
        out.samples.iter_mut().for_each(|v| *v += c);
        out.sup_norm = sup(&out.samples);
        if let Some(a) = out.analytic.as_mut() {
            a.offset += c;
        }
        out.description = format!("{} + {}", self.description, c);
        out
    }

    /// Serializable coefficient form.
    pub fn document(&self, model: &SpectralModel) -> FieldSpec {
        FieldSpec::Coefficients { model_ref: Some(model_ref(model)), coefficients: self.coefficients.clone() }
    }
}

/// Short textual reference to a model, e.g. `torus(1,2)`.
pub fn model_ref(model: &SpectralModel) -> String {
    use crate::models::ModelKind;
    match model.kind() {
        ModelKind::Circle { circumference } => format!("circle({circumference})"),
        ModelKind::Torus { edges } => {
            let e: Vec<String> = edges.iter().map(|v| v.to_string()).collect();
            format!("torus({})", e.join(","))
        }
        ModelKind::Sphere { radius } => format!("sphere({radius})"),
    }
}

fn mode_index(model: &SpectralModel, mode: &Mode) -> Option<usize> {
    match mode {
        Mode::Flat { q, trig } => {
            let (cos_i, sin_i, _) = model.flat_lookup(*q)?;
            match trig {
                Trig::Const | Trig::Cos => Some(cos_i),
                Trig::Sin => sin_i,
            }
        }
        Mode::Harmonic { l, m } => {
            let idx = (*l as usize).pow(2)
                + if *m == 0 { 0 } else { 2 * m.unsigned_abs() as usize - 1 + usize::from(*m < 0) };
            (idx < model.band_limit()).then_some(idx)
        }
    }
}

fn sup(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Values of `sum_k c_k phi_k` at every quadrature node.
pub fn synthesize(model: &SpectralModel, coefficients: &[f64]) -> Vec<f64> {
    let q = model.quadrature();
    let count = coefficients.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    let mut out = vec![0.0; q.len()];
    if count == 0 {
        return out;
    }
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, vals)| {
        let mut phi = vec![0.0; count];
        for (j, v) in vals.iter_mut().enumerate() {
            model.eval_all(q.node(chunk * CHUNK + j), &mut phi);
            let mut acc = Neumaier::new();
            for k in 0..count {
                acc.add(coefficients[k] * phi[k]);
            }
            *v = acc.total();
        }
    });
    out
}

/// Quadrature coefficients `int g phi_k` for `k < count` from node samples.
pub fn project_samples(model: &SpectralModel, samples: &[f64], count: usize) -> Vec<f64> {
    let q = model.quadrature();
    assert_eq!(samples.len(), q.len());
    assert!(count <= model.band_limit());
    let partials: Vec<Vec<Neumaier>> = (0..q.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![Neumaier::new(); count];
            let mut phi = vec![0.0; count];
            let end = ((chunk + 1) * CHUNK).min(q.len());
            for i in chunk * CHUNK..end {
                let wv = q.weights[i] * samples[i];
                if wv == 0.0 {
                    continue;
                }
                model.eval_all(q.node(i), &mut phi);
                for k in 0..count {
                    acc[k].add(wv * phi[k]);
                }
            }
            acc
        })
        .collect();
    (0..count)
        .map(|k| {
            let mut total = Neumaier::new();
            for p in &partials {
                total.add(p[k].total());
            }
            total.total()
        })
        .collect()
}

/// Project an arbitrary pointwise field. Band-limitation is detected by
/// resynthesizing the samples.
pub fn project(model: &SpectralModel, field: impl Fn(&[f64]) -> f64 + Sync) -> ScalarField {
    let q = model.quadrature();
    let samples: Vec<f64> = (0..q.len()).into_par_iter().map(|i| field(q.node(i))).collect();
    from_samples(model, samples, "projected".into())
}

fn from_samples(model: &SpectralModel, samples: Vec<f64>, description: String) -> ScalarField {
    let coefficients = project_samples(model, &samples, model.band_limit());
    let back = synthesize(model, &coefficients);
    let scale = sup(&samples).max(1.0);
    let residual = back.iter().zip(&samples).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ScalarField {
        coefficients,
        sup_norm: sup(&samples),
        samples,
        band_limited: residual < 1e-10 * scale,
        analytic: None,
        description,
    }
}

/// Field from explicit model-basis coefficients (band-limited by definition).
pub fn from_coefficients(model: &SpectralModel, coefficients: &[f64]) -> Result<ScalarField> {
    if coefficients.len() > model.band_limit() {
        return Err(Error::BandLimitExceeded { requested: coefficients.len(), available: model.band_limit() });
    }
    let mut c = coefficients.to_vec();
    c.resize(model.band_limit(), 0.0);
    let samples = synthesize(model, &c);
    Ok(ScalarField {
        sup_norm: sup(&samples),
        coefficients: c,
        samples,
        band_limited: true,
        analytic: None,
        description: "coefficients".into(),
    })
}

/// Materialize a field document on a model.
pub fn from_spec(model: &SpectralModel, spec: &FieldSpec) -> Result<ScalarField> {
    match spec {
        FieldSpec::Builtin(b) => builtin(model, b),
        FieldSpec::Coefficients { coefficients, .. } => from_coefficients(model, coefficients),
    }
}

/// Materialize a named field with exact coefficients.
pub fn builtin(model: &SpectralModel, spec: &BuiltinField) -> Result<ScalarField> {
    let band = model.band_limit();
    let mut c = vec![0.0; band];
    let description = serde_json::to_string(spec).unwrap_or_default();
    let mut analytic = None;
    match spec {
        BuiltinField::Zero => {}
        BuiltinField::Constant { value } => c[0] = value * model.volume().sqrt(),
        BuiltinField::Mode { index, amplitude } => {
            if *index >= band {
                return Err(Error::BandLimitExceeded { requested: index + 1, available: band });
            }
            c[*index] = *amplitude;
        }
        BuiltinField::Trig { terms } => {
            require_flat(model, "trig")?;
            for t in terms {
                if t.wavevector.len() != model.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "wavevector {:?} on a {}-dimensional model",
                        t.wavevector,
                        model.dim()
                    )));
                }
                let mut q = [0i32; 3];
                q[..t.wavevector.len()].copy_from_slice(&t.wavevector);
                let (cos_i, sin_i, sign) = model.flat_lookup(q).ok_or_else(|| Error::BandLimitExceeded {
                    requested: usize::MAX,
                    available: band,
                })?;
                match (t.kind, sin_i) {
                    (TrigKind::Cos, None) => c[cos_i] += t.amplitude / model.flat_norm(Trig::Const),
                    (TrigKind::Cos, Some(_)) => c[cos_i] += t.amplitude / model.flat_norm(Trig::Cos),
                    (TrigKind::Sin, None) => {}
                    (TrigKind::Sin, Some(s)) => c[s] += sign as f64 * t.amplitude / model.flat_norm(Trig::Sin),
                }
            }
        }
        BuiltinField::RandomTrig { max_wavenumber, amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let kmax = *max_wavenumber as i32;
            for (k, mode) in model.modes().iter().enumerate() {
                let inside = match mode {
                    Mode::Flat { q, trig } => *trig != Trig::Const && q.iter().all(|v| v.abs() <= kmax),
                    Mode::Harmonic { l, .. } => *l >= 1 && *l as i32 <= kmax,
                };
                if inside {
                    c[k] = rng.gen_range(-*amplitude..=*amplitude);
                }
            }
            // every selected mode must lie inside the band
            let top = *model.eigenvalues().last().unwrap();
            let corner = match model.modes()[0] {
                Mode::Flat { .. } => {
                    let mut q = [0i32; 3];
                    q[..model.dim()].iter_mut().for_each(|v| *v = kmax);
                    model.flat_eigenvalue(&q)
                }
                Mode::Harmonic { .. } => model.mode_eigenvalue(&Mode::Harmonic { l: *max_wavenumber, m: 0 }),
            };
            if corner > top * (1.0 + 1e-12) {
                return Err(Error::BandLimitExceeded { requested: usize::MAX, available: band });
            }
        }
        BuiltinField::Sawtooth { amplitude } | BuiltinField::Triangle { amplitude } => {
            require_flat(model, "sawtooth/triangle")?;
            let shape = if matches!(spec, BuiltinField::Sawtooth { .. }) { Shape::Sawtooth } else { Shape::Triangle };
            let a = Analytic { shape, amplitude: *amplitude, offset: 0.0 };
            for (k, mode) in model.modes().iter().enumerate() {
                c[k] = a.coefficient(model, mode);
            }
            analytic = Some(a);
        }
    }
    let samples = match &analytic {
        Some(a) => {
            let q = model.quadrature();
            (0..q.len()).map(|i| a.value(model, q.node(i))).collect()
        }
        None => synthesize(model, &c),
    };
    Ok(ScalarField {
        sup_norm: sup(&samples),
        coefficients: c,
        samples,
        band_limited: analytic.is_none(),
        analytic,
        description,
    })
}

fn require_flat(model: &SpectralModel, what: &str) -> Result<()> {
    if model.is_flat() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{what} fields are defined on flat models only")))
    }
}

/// `||V||^2_{L^2}`.
pub fn l2_norm_sq(model: &SpectralModel, field: &ScalarField) -> L2Norm {
    let mut p = Neumaier::new();
    for c in &field.coefficients {
        p.add(c * c);
    }
    let partial = p.total();
    let total = match &field.analytic {
        Some(a) => a.l2_sq(model),
        None => {
            let q = model.quadrature();
            let mut acc = Neumaier::new();
            for (w, v) in q.weights.iter().zip(&field.samples) {
                acc.add(w * v * v);
            }
            acc.total()
        }
    };
    L2Norm { partial, total, tail: (total - partial).max(0.0) }
}

/// `sum_k lambda_k V_k^2` over the model band with the divergence diagnostic.
pub fn h1_seminorm_sq(model: &SpectralModel, field: &ScalarField) -> H1Seminorm {
    let lam = model.eigenvalues();
    let b = field.coefficients.len();
    let mut acc = Neumaier::new();
    let mut running = Vec::with_capacity(b);
    for k in 0..b {
        acc.add(lam[k] * field.coefficients[k] * field.coefficients[k]);
        running.push(acc.total());
    }
    let bands: Vec<usize> = [8, 4, 2, 1].iter().map(|d| (b / d).max(1)).collect();
    let band_sums: Vec<(usize, f64)> = bands.iter().map(|&n| (n, running[n - 1])).collect();
    let pts: Vec<(f64, f64)> =
        band_sums.iter().filter(|(_, s)| *s > 0.0).map(|(n, s)| ((*n as f64).ln(), s.ln())).collect();
    let growth_exponent = if pts.len() < 2 {
        0.0
    } else {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    H1Seminorm {
        partial: running.last().copied().unwrap_or(0.0),
        band_sums,
        growth_exponent,
        divergent: growth_exponent > H1_GROWTH_THRESHOLD,
    }
}

/// `int |grad f|^2 = sum lambda_k f_k^2` (exact for band-limited `f`).
pub fn dirichlet_energy(model: &SpectralModel, f: &ScalarField) -> f64 {
    let mut acc = Neumaier::new();
    for (l, c) in model.eigenvalues().iter().zip(&f.coefficients) {
        acc.add(l * c * c);
    }
    acc.total()
}

/// Node samples of `Delta f` and `|grad f|^2` (positive Laplacian).
#[derive(Debug, Clone)]
pub struct WeightDerivatives {
    pub laplacian: Vec<f64>,
    pub grad_sq: Vec<f64>,
}

/// Spectral derivatives of a band-limited weight. `|grad f|^2` uses
/// `|grad f|^2 = f Delta f - Delta(f^2) / 2`, with `f^2` projected exactly.
pub fn weight_derivatives(model: &SpectralModel, f: &ScalarField) -> Result<WeightDerivatives> {
    if !f.band_limited {
        return Err(Error::NotBandLimited { residual: f64::NAN });
    }
    let band_f = f.band();
    let lam = model.eigenvalues();
    let lam_f = if band_f == 0 { 0.0 } else { lam[band_f - 1] };
    let top = *lam.last().unwrap();
    if 4.0 * lam_f > top * (1.0 + 1e-12) {
        let needed = lam.iter().filter(|v| **v <= 4.0 * lam_f).count().max(band_f + 1);
        return Err(Error::BandLimitExceeded { requested: needed, available: model.band_limit() });
    }
    let count_sq = lam.partition_point(|v| *v <= 4.0 * lam_f * (1.0 + 1e-12)).max(1);
    let lap_c: Vec<f64> = (0..band_f).map(|k| lam[k] * f.coefficients[k]).collect();
    let laplacian = synthesize(model, &lap_c);
    let f_sq: Vec<f64> = f.samples.iter().map(|v| v * v).collect();
    let sq_c = project_samples(model, &f_sq, count_sq);
    let back = synthesize(model, &sq_c);
    let scale = sup(&f_sq).max(1.0);
    let residual = back.iter().zip(&f_sq).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > 1e-10 * scale {
        return Err(Error::NotBandLimited { residual });
    }
    let lap_sq_c: Vec<f64> = sq_c.iter().enumerate().map(|(k, c)| lam[k] * c).collect();
    let lap_sq = synthesize(model, &lap_sq_c);
    let grad_sq = (0..f.samples.len()).map(|i| f.samples[i] * laplacian[i] - 0.5 * lap_sq[i]).collect();
    Ok(WeightDerivatives { laplacian, grad_sq })
}

/// `V = Delta f / 2 + |grad f|^2 / 4`, the potential conjugate to `Delta_f`.
pub fn witten_potential(model: &SpectralModel, f: &ScalarField) -> Result<ScalarField> {
    let d = weight_derivatives(model, f)?;
    let samples: Vec<f64> = d.laplacian.iter().zip(&d.grad_sq).map(|(l, g)| 0.5 * l + 0.25 * g).collect();
    let lam = model.eigenvalues();
    let band_f = f.band();
    let lam_f = if band_f == 0 { 0.0 } else { lam[band_f - 1] };
    let count = lam.partition_point(|v| *v <= 4.0 * lam_f * (1.0 + 1e-12)).max(1);
    let mut coefficients = project_samples(model, &samples, count);
    coefficients.resize(model.band_limit(), 0.0);
    Ok(ScalarField {
        sup_norm: sup(&samples),
        coefficients,
        samples,
        band_limited: true,
        analytic: None,
        description: format!("witten({})", f.description),
    })
}
