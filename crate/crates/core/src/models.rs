//! Exact spectral models: the circle, flat tori of dimension at most three and
//! the round 2-sphere.
//!
//! Points are passed as coordinate slices: `[x]` on the circle, `[x1, .., xn]`
//! on a torus and `[theta, phi]` (colatitude, longitude) on the sphere.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::Neumaier;

/// Largest basis a model will enumerate.
pub const MAX_MODES: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelKind {
    Circle { circumference: f64 },
    Torus { edges: Vec<f64> },
    Sphere { radius: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Circle { .. } => "circle",
            ModelKind::Torus { .. } => "torus",
            ModelKind::Sphere { .. } => "sphere",
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, ModelKind::Sphere { .. })
    }

    /// Build the model with at least `min_modes` eigenpairs.
    pub fn build(&self, min_modes: usize) -> Result<SpectralModel> {
        match self {
            ModelKind::Circle { circumference } => build_circle(*circumference, min_modes),
            ModelKind::Torus { edges } => build_flat_torus(edges, min_modes),
            ModelKind::Sphere { radius } => build_sphere(*radius, min_modes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trig {
    Const,
    Cos,
    Sin,
}

/// Label of one basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `alpha_q * cos(2 pi q.x / L)` or the sine; `q` is canonical (first
    /// nonzero component positive), unused trailing components are 0.
    Flat { q: [i32; 3], trig: Trig },
    /// Real spherical harmonic: `m > 0` cosine type, `m < 0` sine type.
    Harmonic { l: u32, m: i32 },
}

/// Node/weight rule. Coordinates of node `i` are
/// `nodes[i * coords .. (i + 1) * coords]`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub coords: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.coords..(i + 1) * self.coords]
    }
}

/// Geodesic Jacobian `D(r) = det(d exp_x)` as a radial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    Flat { dim: usize, injectivity: f64 },
    Sphere { radius: f64 },
}

impl RadialProfile {
    pub fn dim(&self) -> usize {
        match self {
            RadialProfile::Flat { dim, .. } => *dim,
            RadialProfile::Sphere { .. } => 2,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            RadialProfile::Flat { injectivity, .. } => *injectivity,
            RadialProfile::Sphere { radius } => PI * radius,
        }
    }

    pub fn d(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Flat { .. } => 1.0,
            RadialProfile::Sphere { radius } => sinc(r / radius),
        }
    }

    pub fn d_prime(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Flat { .. } => 0.0,
            RadialProfile::Sphere { radius } => sinc_prime(r / radius) / radius,
        }
    }

    /// `J'/J` for `J = r^{n-1} D(r)`.
    pub fn log_jacobian_derivative(&self, r: f64) -> f64 {
        (self.dim() as f64 - 1.0) / r + self.d_prime(r) / self.d(r)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn sinc_prime(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        -x / 3.0 + x * x2 / 30.0 - x * x2 * x2 / 840.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

#[derive(Debug)]
pub struct SpectralModel {
    kind: ModelKind,
    dim: usize,
    volume: f64,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    /// `2 pi / L_i` per axis on flat models.
    scale: Vec<f64>,
    /// Axis lengths on flat models.
    lengths: Vec<f64>,
    /// Canonical wavevector to index of its cosine (or constant) mode.
    flat_index: HashMap<[i32; 3], usize>,
    /// Largest |q_i| per axis, or the degree L on the sphere.
    max_degree: Vec<u32>,
    quadrature: OnceLock<Quadrature>,
}

/// Circle of circumference `l` with at least `min_modes` eigenpairs.
pub fn build_circle(l: f64, min_modes: usize) -> Result<SpectralModel> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("circumference must be positive, got {l}")));
    }
    let mut m = build_flat(&[l], min_modes)?;
    m.kind = ModelKind::Circle { circumference: l };
    Ok(m)
}

/// Flat torus with the given edge lengths (dimension 1 to 3).
pub fn build_flat_torus(edges: &[f64], min_modes: usize) -> Result<SpectralModel> {
    if edges.is_empty() || edges.len() > 3 {
        return Err(Error::InvalidParameter(format!("torus dimension must be 1..=3, got {}", edges.len())));
    }
    if let Some(bad) = edges.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter(format!("edge lengths must be positive, got {bad}")));
    }
    build_flat(edges, min_modes)
}

/// Round sphere of radius `r`; the basis is every harmonic of degree `l <= L`
/// for the smallest `L` giving at least `min_modes` functions.
pub fn build_sphere(r: f64, min_modes: usize) -> Result<SpectralModel> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if min_modes > MAX_MODES {
        return Err(Error::BandLimitExceeded { requested: min_modes, available: MAX_MODES });
    }
    let mut lmax = 0u32;
    while ((lmax as usize + 1) * (lmax as usize + 1)) < min_modes.max(1) {
        lmax += 1;
    }
    let mut modes = Vec::new();
    let mut eigenvalues = Vec::new();
    let r2 = r * r;
    for l in 0..=lmax {
        let lam = (l as f64) * (l as f64 + 1.0) / r2;
        modes.push(Mode::Harmonic { l, m: 0 });
        for m in 1..=l as i32 {
            modes.push(Mode::Harmonic { l, m });
            modes.push(Mode::Harmonic { l, m: -m });
        }
        eigenvalues.extend(std::iter::repeat(lam).take(2 * l as usize + 1));
    }
    Ok(SpectralModel {
        kind: ModelKind::Sphere { radius: r },
        dim: 2,
        volume: 4.0 * PI * r2,
        modes,
        eigenvalues,
        scale: vec![],
        lengths: vec![],
        flat_index: HashMap::new(),
        max_degree: vec![lmax],
        quadrature: OnceLock::new(),
    })
}

fn build_flat(edges: &[f64], min_modes: usize) -> Result<SpectralModel> {
    let n = edges.len();
    if min_modes > MAX_MODES {
        return Err(Error::BandLimitExceeded { requested: min_modes, available: MAX_MODES });
    }
    let target = min_modes.max(1);
    let scale: Vec<f64> = edges.iter().map(|l| 2.0 * PI / l).collect();
    let volume: f64 = edges.iter().product();
    let smax = scale.iter().cloned().fold(0.0, f64::max);
    let omega = crate::numerics::special::unit_ball_volume(n);
    let weyl = (2.0 * PI).powi(2) * (target as f64 / (omega * volume)).powf(2.0 / n as f64);
    let mut cutoff = 1.3 * weyl + 4.0 * smax * smax;

    let lambda = |q: &[i32; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let k = q[i] as f64 * scale[i];
            s += k * k;
        }
        s
    };

    loop {
        let kmax: Vec<i32> = scale.iter().map(|s| (cutoff.sqrt() / s).floor() as i32).collect();
        let mut found: Vec<([i32; 3], f64)> = Vec::new();
        let range = |i: usize| if i < n { -kmax[i]..=kmax[i] } else { 0..=0 };
        for a in range(0) {
            for b in range(1) {
                for c in range(2) {
                    let q = [a, b, c];
                    if !is_canonical(&q) {
                        continue;
                    }
                    let lam = lambda(&q);
                    if lam <= cutoff {
                        found.push((q, lam));
                    }
                }
            }
        }
        let count: usize = found.iter().map(|(q, _)| if *q == [0; 3] { 1 } else { 2 }).sum();
        if count < target {
            cutoff *= 1.5;
            continue;
        }
        // Stable: ties keep lexicographic enumeration order.
        found.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut taken = 0usize;
        let mut last = 0.0;
        for (q, lam) in &found {
            if taken >= target {
                break;
            }
            taken += if *q == [0; 3] { 1 } else { 2 };
            last = *lam;
        }
        let shell = last * (1.0 + 1e-12);
        if shell > cutoff {
            cutoff *= 1.5;
            continue;
        }
        let mut modes = Vec::new();
        let mut eigenvalues = Vec::new();
        let mut flat_index = HashMap::new();
        let mut max_degree = vec![0u32; n];
        for (q, lam) in found.into_iter().take_while(|(_, l)| *l <= shell) {
            flat_index.insert(q, modes.len());
            for (i, md) in max_degree.iter_mut().enumerate() {
                *md = (*md).max(q[i].unsigned_abs());
            }
            if q == [0; 3] {
                modes.push(Mode::Flat { q, trig: Trig::Const });
                eigenvalues.push(0.0);
            } else {
                modes.push(Mode::Flat { q, trig: Trig::Cos });
                modes.push(Mode::Flat { q, trig: Trig::Sin });
                eigenvalues.push(lam);
                eigenvalues.push(lam);
            }
        }
        return Ok(SpectralModel {
            kind: ModelKind::Torus { edges: edges.to_vec() },
            dim: n,
            volume,
            modes,
            eigenvalues,
            scale,
            lengths: edges.to_vec(),
            flat_index,
            max_degree,
            quadrature: OnceLock::new(),
        });
    }
}

/// First nonzero component positive (the zero vector counts as canonical).
pub fn is_canonical(q: &[i32; 3]) -> bool {
    match q.iter().find(|c| **c != 0) {
        Some(c) => *c > 0,
        None => true,
    }
}

/// Canonical representative of `+-q` and the sign that was applied.
pub fn canonicalize(q: [i32; 3]) -> ([i32; 3], i32) {
    if is_canonical(&q) {
        (q, 1)
    } else {
        ([-q[0], -q[1], -q[2]], -1)
    }
}

impl SpectralModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Number of eigenpairs held by the model.
    pub fn band_limit(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> Mode {
        self.modes[k]
    }

    pub fn is_flat(&self) -> bool {
        self.kind.is_flat()
    }

    /// Axis lengths (flat models only).
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Indices of the cosine and sine modes of wavevector `q` (either sign).
    /// Returns `(cos_index, sin_index, sign)` where `sign` is the factor the
    /// sine picks up from canonicalization. The zero vector has no sine.
    pub fn flat_lookup(&self, q: [i32; 3]) -> Option<(usize, Option<usize>, i32)> {
        let (c, sign) = canonicalize(q);
        self.flat_index.get(&c).map(|&i| {
            if c == [0; 3] {
                (i, None, 1)
            } else {
                (i, Some(i + 1), sign)
            }
        })
    }

    /// Normalization of the trigonometric basis functions.
    pub fn flat_norm(&self, trig: Trig) -> f64 {
        match trig {
            Trig::Const => 1.0 / self.volume.sqrt(),
            _ => (2.0 / self.volume).sqrt(),
        }
    }

    /// Eigenvalue attached to a flat wavevector (whether or not it is in band).
    pub fn flat_eigenvalue(&self, q: &[i32; 3]) -> f64 {
        (0..self.dim).map(|i| (q[i] as f64 * self.scale[i]).powi(2)).sum()
    }

    /// Eigenvalue of an arbitrary mode label (in band or not).
    pub fn mode_eigenvalue(&self, mode: &Mode) -> f64 {
        match mode {
            Mode::Flat { q, .. } => self.flat_eigenvalue(q),
            Mode::Harmonic { l, .. } => {
                let r = self.radius();
                (*l as f64) * (*l as f64 + 1.0) / (r * r)
            }
        }
    }

    fn radius(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } => radius,
            _ => f64::NAN,
        }
    }

    /// Constant scalar curvature of the model.
    pub fn scalar_curvature(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere { radius } => 2.0 / (radius * radius),
            _ => 0.0,
        }
    }

    pub fn curvature(&self, _x: &[f64]) -> f64 {
        self.scalar_curvature()
    }

    pub fn profile(&self) -> RadialProfile {
        match self.kind {
            ModelKind::Sphere { radius } => RadialProfile::Sphere { radius },
            _ => RadialProfile::Flat {
                dim: self.dim,
                injectivity: self.lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0,
            },
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.profile().injectivity_radius()
    }

    /// Number of coordinates describing a point.
    pub fn coords(&self) -> usize {
        if self.is_flat() {
            self.dim
        } else {
            2
        }
    }

    fn phase(&self, q: &[i32; 3], x: &[f64]) -> f64 {
        (0..self.dim).map(|i| q[i] as f64 * self.scale[i] * x[i]).sum()
    }

    /// `phi_k(x)`.
    pub fn eval(&self, k: usize, x: &[f64]) -> f64 {
        self.eval_mode(&self.modes[k], x)
    }

    /// Evaluate any mode label, in band or not.
    pub fn eval_mode(&self, mode: &Mode, x: &[f64]) -> f64 {
        match mode {
            Mode::Flat { q, trig } => {
                let a = self.flat_norm(*trig);
                match trig {
                    Trig::Const => a,
                    Trig::Cos => a * self.phase(q, x).cos(),
                    Trig::Sin => a * self.phase(q, x).sin(),
                }
            }
            Mode::Harmonic { l, m } => {
                let p = legendre_single(*l, m.unsigned_abs(), x[0].cos(), x[0].sin());
                let r = self.radius();
                let mm = m.unsigned_abs() as f64;
                let v = if *m == 0 {
                    p
                } else if *m > 0 {
                    std::f64::consts::SQRT_2 * p * (mm * x[1]).cos()
                } else {
                    std::f64::consts::SQRT_2 * p * (mm * x[1]).sin()
                };
                v / r
            }
        }
    }

    /// Evaluate the first `out.len()` basis functions at `x`.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        let count = out.len();
        assert!(count <= self.modes.len());
        if self.is_flat() {
            for (o, mode) in out.iter_mut().zip(&self.modes) {
                *o = self.eval_mode(mode, x);
            }
            return;
        }
        let lmax = match self.modes.get(count.saturating_sub(1)) {
            Some(Mode::Harmonic { l, .. }) => *l,
            _ => 0,
        };
        let table = legendre_table(lmax, x[0].cos(), x[0].sin());
        let r = self.radius();
        for (o, mode) in out.iter_mut().zip(&self.modes) {
            if let Mode::Harmonic { l, m } = mode {
                let mm = m.unsigned_abs();
                let p = table[lm_index(*l, mm)];
                let v = if *m == 0 {
                    p
                } else if *m > 0 {
                    std::f64::consts::SQRT_2 * p * (mm as f64 * x[1]).cos()
                } else {
                    std::f64::consts::SQRT_2 * p * (mm as f64 * x[1]).sin()
                };
                *o = v / r;
            }
        }
    }

    /// Quadrature rule exact for products of three band-limited functions.
    pub fn quadrature(&self) -> &Quadrature {
        self.quadrature.get_or_init(|| self.build_quadrature())
    }

    fn build_quadrature(&self) -> Quadrature {
        if self.is_flat() {
            let sizes: Vec<usize> = self.max_degree.iter().map(|k| 4 * *k as usize + 4).collect();
            let total: usize = sizes.iter().product();
            let mut nodes = Vec::with_capacity(total * self.dim);
            let mut weights = Vec::with_capacity(total);
            let mut idx = vec![0usize; self.dim];
            for _ in 0..total {
                let mut w = 1.0;
                for i in 0..self.dim {
                    nodes.push(self.lengths[i] * idx[i] as f64 / sizes[i] as f64);
                    w *= self.lengths[i] / sizes[i] as f64;
                }
                weights.push(w);
                for i in (0..self.dim).rev() {
                    idx[i] += 1;
                    if idx[i] < sizes[i] {
                        break;
                    }
                    idx[i] = 0;
                }
            }
            Quadrature { coords: self.dim, nodes, weights }
        } else {
            let l = self.max_degree[0] as usize;
            let r = self.radius();
            let (xs, ws) = gauss_legendre(2 * (l + 1));
            let nphi = 4 * (l + 1);
            let dphi = 2.0 * PI / nphi as f64;
            let mut nodes = Vec::with_capacity(xs.len() * nphi * 2);
            let mut weights = Vec::with_capacity(xs.len() * nphi);
            for (x, w) in xs.iter().zip(&ws) {
                let theta = x.acos();
                for j in 0..nphi {
                    nodes.push(theta);
                    nodes.push(dphi * j as f64);
                    weights.push(w * dphi * r * r);
                }
            }
            Quadrature { coords: 2, nodes, weights }
        }
    }

    /// `int_M g dmu` by the model quadrature with compensated summation.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let q = self.quadrature();
        let mut acc = Neumaier::new();
        for i in 0..q.len() {
            acc.add(q.weights[i] * g(q.node(i)));
        }
        acc.total()
    }

    /// Row-major `nodes x count` matrix of basis values at the quadrature nodes.
    pub fn basis_matrix(&self, count: usize) -> Vec<f64> {
        let q = self.quadrature();
        let mut phi = vec![0.0; q.len() * count];
        if count == 0 {
            return phi;
        }
        phi.par_chunks_mut(count).enumerate().for_each(|(i, row)| self.eval_all(q.node(i), row));
        phi
    }

    /// Riemannian distance.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.is_flat() {
            let mut s = 0.0;
            for i in 0..self.dim {
                let l = self.lengths[i];
                let mut d = (x[i] - y[i]).rem_euclid(l);
                if d > l / 2.0 {
                    d = l - d;
                }
                s += d * d;
            }
            s.sqrt()
        } else {
            let (a, b) = (to_cartesian(x), to_cartesian(y));
            let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let cross = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            let c = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
            self.radius() * c.atan2(dot)
        }
    }

    /// Point at distance `r` from `x` along the unit direction `dir`.
    /// On flat models `dir` has `dim` components; on the sphere it is the
    /// pair of components along the colatitude and longitude unit vectors.
    pub fn geodesic_point(&self, x: &[f64], dir: &[f64], r: f64) -> Vec<f64> {
        if self.is_flat() {
            (0..self.dim).map(|i| (x[i] + r * dir[i]).rem_euclid(self.lengths[i])).collect()
        } else {
            let (th, ph) = (x[0], x[1]);
            let n = to_cartesian(x);
            let e_th = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
            let e_ph = [-ph.sin(), ph.cos(), 0.0];
            let a = r / self.radius();
            let p: Vec<f64> = (0..3)
                .map(|i| a.cos() * n[i] + a.sin() * (dir[0] * e_th[i] + dir[1] * e_ph[i]))
                .collect();
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            vec![rho.atan2(p[2]), p[1].atan2(p[0]).rem_euclid(2.0 * PI)]
        }
    }

    /// Serializable summary; eigenfunctions are implied by `kind`.
    pub fn document(&self) -> ModelDocument {
        ModelDocument {
            kind: self.kind.clone(),
            dim: self.dim,
            volume: self.volume,
            eigenvalues: self.eigenvalues.clone(),
            band_limit: self.modes.len(),
        }
    }
}

fn to_cartesian(x: &[f64]) -> [f64; 3] {
    let (th, ph) = (x[0], x[1]);
    [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub dim: usize,
    pub volume: f64,
    pub eigenvalues: Vec<f64>,
    pub band_limit: usize,
}

fn lm_index(l: u32, m: u32) -> usize {
    let l = l as usize;
    l * (l + 1) / 2 + m as usize
}

/// Unit-sphere normalized associated Legendre values `p_lm(cos theta)` for
/// `0 <= m <= l <= lmax`, so that `p_l0` is the zonal harmonic and
/// `sqrt(2) p_lm cos(m phi)` is unit norm on the sphere.
fn legendre_table(lmax: u32, x: f64, s: f64) -> Vec<f64> {
    let mut p = vec![0.0; lm_index(lmax, lmax) + 1];
    let mut pmm = (0.25 / PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        p[lm_index(m, m)] = pmm;
        if m < lmax {
            let mut prev2 = pmm;
            let mut prev1 = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
            p[lm_index(m + 1, m)] = prev1;
            for l in m + 2..=lmax {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let cur = a * (x * prev1 - b * prev2);
                p[lm_index(l, m)] = cur;
                prev2 = prev1;
                prev1 = cur;
            }
        }
    }
    p
}

fn legendre_single(l: u32, m: u32, x: f64, s: f64) -> f64 {
    let mut pmm = (0.25 / PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mut prev2 = pmm;
    let mut prev1 = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
    for ll in m + 2..=l {
        let (lf, mf) = (ll as f64, m as f64);
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let cur = a * (x * prev1 - b * prev2);
        prev2 = prev1;
        prev1 = cur;
    }
    prev1
}
