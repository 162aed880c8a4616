use std::f64::consts::PI;

use heatlab::asymptotics::{
    classify_h1, fit_coefficients, predicted_coefficients, remainder_exponent, AsymptoticsReport, ExpansionFit, H1Classification,
    Perturbation, PredictedCoefficients, RemainderFit,
};
use heatlab::fields::{builtin, from_spec, weight_derivatives, BuiltinField, ScalarField};
use heatlab::heattrace::{heat_trace_with_tolerance, HeatTraceCurve, WeylEnvelope};
use heatlab::isospectral::{compare_spectra, isospectral_report, SpectralInference};
use heatlab::models::SpectralModel;
use heatlab::operators::{drifting_galerkin_spectrum, drifting_spectrum, schrodinger_spectrum, OperatorSpectrum};
use heatlab::parametrix::{heat_invariants, HeatInvariants};
use heatlab::weyl::{
    counting_function, karamata_check, lattice_count, limit_constant, unit_ball_volume, weyl_csv, weyl_ratio_from_count,
    KaramataReport, KaramataTestFunction, WeylPoint,
};
use serde::Serialize;

use crate::config::{combined_hash, ExperimentConfig, OperatorPath};
use crate::report::{Artifact, CommandOutput, Provenance, RngRecord};
use crate::CliError;

/// Model and field materialized from a config; the band grows until a
/// drifting weight's derivatives are exactly representable.
pub struct Prepared {
    pub model: SpectralModel,
    pub field: ScalarField,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let mut modes = cfg.model_modes.unwrap_or(0).max(cfg.operator.n);
    for _ in 0..4 {
        let model = cfg.model.build(modes)?;
        let field = match &cfg.field {
            Some(spec) => from_spec(&model, spec)?,
            None => builtin(&model, &BuiltinField::Zero)?,
        };
        let needs_derivatives = matches!(cfg.operator.path, OperatorPath::Drifting | OperatorPath::DriftingGalerkin);
        if needs_derivatives {
            match weight_derivatives(&model, &field) {
                Err(heatlab::Error::BandLimitExceeded { requested, .. }) if requested > model.band_limit() => {
                    modes = requested;
                    continue;
                }
                Err(e) => return Err(e.into()),
                Ok(_) => {}
            }
        }
        return Ok(Prepared { model, field });
    }
    Err(CliError::Config(format!("could not size the model band for the weight (last request {modes})")))
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        config: cfg.canonical(),
        rng: cfg.random_seed().map(|seed| RngRecord { generator: "ChaCha8", seed }),
    }
}

fn file(cfg: &ExperimentConfig, command: &str, ext: &str) -> String {
    format!("{}.{command}.{ext}", cfg.name)
}

pub fn compute_spectrum(cfg: &ExperimentConfig, p: &Prepared) -> Result<OperatorSpectrum, CliError> {
    if let Some(path) = &cfg.spectrum_file {
        return load_spectrum(path);
    }
    let n = cfg.operator.n;
    let s = match cfg.operator.path {
        OperatorPath::Exact => OperatorSpectrum::exact(&p.model, n)?,
        OperatorPath::Schrodinger => schrodinger_spectrum(&p.model, &p.field, n)?,
        OperatorPath::Drifting => drifting_spectrum(&p.model, &p.field, n)?,
        OperatorPath::DriftingGalerkin => drifting_galerkin_spectrum(&p.model, &p.field, n)?,
    };
    Ok(s)
}

/// Reads either a bare spectrum document or a `spectrum` report.
pub fn load_spectrum(path: &std::path::Path) -> Result<OperatorSpectrum, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let body = v.get("result").cloned().unwrap_or(v);
    let s: OperatorSpectrum = serde_json::from_value(body).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if s.trusted_count > s.eigenvalues.len() || s.eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Config(format!("{}: eigenvalues must be sorted with trusted_count <= length", path.display())));
    }
    Ok(s)
}

fn curve_for(cfg: &ExperimentConfig, model: &SpectralModel, s: &OperatorSpectrum) -> Result<HeatTraceCurve, CliError> {
    Ok(heat_trace_with_tolerance(s, model.dim(), &cfg.t_grid.points(), cfg.tolerance)?)
}

pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let p = prepare(cfg)?;
    let s = compute_spectrum(cfg, &p)?;
    let summary = format!(
        "{} spectrum: N = {}, trusted = {}, lowest = {:.12e}, negative = {}\n",
        cfg.model.name(),
        s.truncation,
        s.trusted_count,
        s.eigenvalues[0],
        s.negative_count()
    );
    let json = provenance(cfg).wrap("spectrum", &s);
    Ok(CommandOutput { artifacts: vec![Artifact { file_name: file(cfg, "spectrum", "json"), contents: json }], summary })
}

pub fn cmd_trace(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let p = prepare(cfg)?;
    let s = compute_spectrum(cfg, &p)?;
    let curve = curve_for(cfg, &p.model, &s)?;
    let summary = match curve.trusted_t_min() {
        Some(t) => format!("{} points, trusted down to t = {t:.4e}\n", curve.len()),
        None => format!("{} points, none trusted at tolerance {:.1e}\n", curve.len(), cfg.tolerance),
    };
    Ok(CommandOutput {
        artifacts: vec![
            Artifact { file_name: file(cfg, "trace", "json"), contents: provenance(cfg).wrap("trace", &curve) },
            Artifact { file_name: file(cfg, "trace", "csv"), contents: curve.to_csv() },
        ],
        summary,
    })
}

fn predicted_for(cfg: &ExperimentConfig, p: &Prepared) -> Result<PredictedCoefficients, CliError> {
    let perturbation = match cfg.operator.path {
        OperatorPath::Exact => None,
        OperatorPath::Schrodinger => Some(Perturbation::Schrodinger(&p.field)),
        OperatorPath::Drifting | OperatorPath::DriftingGalerkin => Some(Perturbation::Drifting(&p.field)),
    };
    let zero;
    let perturbation = match perturbation {
        Some(x) => x,
        None => {
            zero = builtin(&p.model, &BuiltinField::Zero)?;
            Perturbation::Schrodinger(&zero)
        }
    };
    Ok(predicted_coefficients(&p.model, perturbation)?)
}

#[derive(Debug, Serialize)]
pub struct FitResult {
    pub report: AsymptoticsReport,
    pub fit: ExpansionFit,
    pub remainder: Option<RemainderFit>,
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let p = prepare(cfg)?;
    let s = compute_spectrum(cfg, &p)?;
    let curve = curve_for(cfg, &p.model, &s)?;
    let n = cfg.fit.dimension.unwrap_or(p.model.dim() as f64);
    let fit = fit_coefficients(&curve, n, cfg.fit.degree, cfg.fit.t_max)?;
    let predicted = predicted_for(cfg, &p)?;
    // the remainder only makes sense against a known expansion; an empty
    // window here is reported, not fatal
    let remainder = remainder_exponent(&curve, &predicted, cfg.fit.remainder_t_max).ok();
    let report = AsymptoticsReport::new(&fit, Some(predicted), remainder.as_ref(), None);
    let mut summary = report.table();
    if fit.ill_conditioned {
        summary.push_str(&format!("warning: condition number {:.3e}\n", fit.condition_number));
    }
    let result = FitResult { report, fit, remainder };
    Ok(CommandOutput {
        artifacts: vec![Artifact { file_name: file(cfg, "fit", "json"), contents: provenance(cfg).wrap("fit", &result) }],
        summary,
    })
}

pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    if cfg.operator.path != OperatorPath::Schrodinger {
        return Err(CliError::Config("classify needs operator.path = \"schrodinger\"".into()));
    }
    let p = prepare(cfg)?;
    let s = compute_spectrum(cfg, &p)?;
    let c: H1Classification = classify_h1(&p.model, &p.field, &s, &cfg.t_grid.points())?;
    let label = serde_json::to_value(c.classification).expect("class serializes");
    let summary = format!(
        "{}: remainder exponent {}, fourier divergent {}{}\n",
        label.as_str().unwrap_or_default(),
        c.remainder.exponent.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into()),
        c.fourier_divergent,
        c.annotation.as_deref().map(|a| format!(" ({a})")).unwrap_or_default()
    );
    Ok(CommandOutput {
        artifacts: vec![Artifact { file_name: file(cfg, "classify", "json"), contents: provenance(cfg).wrap("classify", &c) }],
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct KaramataSummary {
    pub t_limit: f64,
    /// `t^alpha Theta(t)` at the smallest trusted `t`.
    pub limit_estimate: f64,
    pub reports: Vec<KaramataReport>,
    /// `t^alpha` times the trace tail bound, aligned with the report rows.
    pub scaled_tail: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct WeylResult {
    pub mode: &'static str,
    pub dim: usize,
    pub volume: f64,
    pub negative_count: usize,
    pub points: Vec<WeylPoint>,
    pub alpha: f64,
    /// `Vol / (4 pi)^{n/2}`, the leading small-`t` constant.
    pub c: f64,
    pub karamata: KaramataSummary,
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![hi];
    }
    (0..k).map(|i| if i + 1 == k { hi } else { lo * (hi / lo).powf(i as f64 / (k - 1) as f64) }).collect()
}

pub fn cmd_weyl(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let p = prepare(cfg)?;
    let s = compute_spectrum(cfg, &p)?;
    let (dim, vol) = (p.model.dim(), p.model.volume());
    let plain = cfg.operator.path == OperatorPath::Exact && cfg.spectrum_file.is_none();
    let lattice = cfg.weyl.lattice && plain && p.model.is_flat();
    let lambdas = match &cfg.weyl.lambdas {
        Some(l) => l.clone(),
        None if lattice => {
            let target = cfg.weyl.lattice_count as f64;
            let top = (2.0 * PI).powi(2) * (target / (unit_ball_volume(dim) * vol)).powf(2.0 / dim as f64);
            geometric(top * 1e-2, top, cfg.weyl.points)
        }
        None => {
            let t = s.trusted();
            let lo = t.iter().copied().find(|v| *v > 0.0).ok_or_else(|| CliError::Tolerance("no positive trusted eigenvalue".into()))?;
            geometric(lo, *t.last().unwrap(), cfg.weyl.points)
        }
    };
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let count = if lattice { lattice_count(p.model.lengths(), lambda)? } else { counting_function(&s, lambda)? };
        points.push(WeylPoint { lambda, count, ratio: weyl_ratio_from_count(count, dim, vol, lambda) });
    }

    let curve = curve_for(cfg, &p.model, &s)?;
    let alpha = cfg.weyl.alpha.unwrap_or(dim as f64 / 2.0);
    let c = vol / (4.0 * PI).powf(dim as f64 / 2.0);
    let (t_limit, limit_estimate) = limit_constant(&curve, alpha)?;
    let r = curve.trusted_range();
    let take = cfg.weyl.karamata_points.max(1).min(r.len());
    let idx: Vec<usize> = (r.start..r.start + take).rev().collect();
    let ts: Vec<f64> = idx.iter().map(|&i| curve.t[i]).collect();
    let env = WeylEnvelope::fit(s.trusted(), dim);
    let scaled_tail = ts.iter().map(|t| t.powf(alpha) * env.tail(*t)).collect();
    let reports = [KaramataTestFunction::counting(), KaramataTestFunction::one()]
        .iter()
        .map(|g| karamata_check(&s, alpha, g, &ts, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = String::from("lambda                   count      ratio\n");
    for pt in &points {
        summary.push_str(&format!("{:<24.12e} {:<10} {:.6}\n", pt.lambda, pt.count, pt.ratio));
    }
    for rep in &reports {
        if let Some(last) = rep.rows.last() {
            summary.push_str(&format!("karamata {:<9} t = {:.3e}  relative gap {:.3e}\n", rep.function, last.t, last.relative_gap));
        }
    }
    let mut artifacts = vec![Artifact { file_name: file(cfg, "weyl", "csv"), contents: weyl_csv(&points) }];
    for rep in &reports {
        artifacts.push(Artifact { file_name: format!("{}.karamata_{}.csv", cfg.name, rep.function), contents: rep.to_csv() });
    }
    let result = WeylResult {
        mode: if lattice { "lattice" } else { "spectrum" },
        dim,
        volume: vol,
        negative_count: s.negative_count(),
        points,
        alpha,
        c,
        karamata: KaramataSummary { t_limit, limit_estimate, reports, scaled_tail },
    };
    artifacts.insert(0, Artifact { file_name: file(cfg, "weyl", "json"), contents: provenance(cfg).wrap("weyl", &result) });
    Ok(CommandOutput { artifacts, summary })
}

pub fn cmd_invariants(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let p = prepare(cfg)?;
    let weight = cfg.field.as_ref().map(|_| &p.field);
    let inv: HeatInvariants = heat_invariants(&p.model, weight, cfg.invariants.order)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.15e}")).unwrap_or_else(|| "-".into());
    let mut summary = format!("a0 {:.15e}\na1 {}\na2 {}\n", inv.a0, opt(inv.a1), opt(inv.a2));
    for (i, u) in inv.u_diagonal.iter().enumerate() {
        summary.push_str(&format!("u{i}(0) {u:.15e}\n"));
    }
    Ok(CommandOutput {
        artifacts: vec![Artifact { file_name: file(cfg, "invariants", "json"), contents: provenance(cfg).wrap("invariants", &inv) }],
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct IsospecResult {
    pub against: String,
    pub against_hash: String,
    pub verdict: bool,
    pub first: SpectralInference,
    pub second: SpectralInference,
}

pub fn cmd_isospec(cfg: &ExperimentConfig, other: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let s1 = compute_spectrum(cfg, &prepare(cfg)?)?;
    let s2 = compute_spectrum(other, &prepare(other)?)?;
    let (first, second) = isospectral_report(&s1, &s2, cfg.isospec.dirichlet_norm, cfg.isospec.rel_tol)?;
    let verdict = compare_spectra(&s1, &s2, cfg.isospec.rel_tol);
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    let mut summary = format!("isospectral (rel_tol {:.1e}): {verdict}\n", cfg.isospec.rel_tol);
    for (label, inf) in [(&cfg.name, &first), (&other.name, &second)] {
        summary.push_str(&format!(
            "{label}: n_hat {:.4}  vol_hat {:.8}  a1_hat {:.6}  euler_hat {}\n",
            inf.n_hat,
            inf.vol_hat,
            inf.a1_hat,
            opt(inf.euler_hat)
        ));
    }
    let mut prov = provenance(cfg);
    let other_hash = other.hash();
    prov.config_hash = combined_hash(&prov.config_hash, &other_hash);
    let result = IsospecResult { against: other.name.clone(), against_hash: other_hash, verdict, first, second };
    Ok(CommandOutput {
        artifacts: vec![Artifact { file_name: file(cfg, "isospec", "json"), contents: prov.wrap("isospec", &result) }],
        summary,
    })
}

