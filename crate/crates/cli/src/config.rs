use std::path::{Path, PathBuf};

use heatlab::asymptotics::{FIT_T_MAX, REMAINDER_T_MAX};
use heatlab::fields::{BuiltinField, FieldSpec};
use heatlab::heattrace::{log_grid, TAIL_TOLERANCE};
use heatlab::models::ModelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorPath {
    /// Unperturbed model eigenvalues; the field is ignored.
    #[default]
    Exact,
    Schrodinger,
    /// Witten conjugation to a Schrodinger matrix.
    Drifting,
    /// Weighted-measure Galerkin pencil.
    DriftingGalerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub path: OperatorPath,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { n: 256, path: OperatorPath::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_min: 1e-4, t_max: 1.0, per_decade: 40 }
    }
}

impl GridConfig {
    pub fn points(&self) -> Vec<f64> {
        log_grid(self.t_min, self.t_max, self.per_decade)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Highest fitted power of `t`.
    pub degree: usize,
    pub t_max: f64,
    pub remainder_t_max: f64,
    /// Dimension used in the `(4 pi t)^{n/2}` scaling; defaults to the model's.
    #[serde(default)]
    pub dimension: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { degree: 2, t_max: FIT_T_MAX, remainder_t_max: REMAINDER_T_MAX, dimension: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    /// Explicit thresholds; otherwise `points` geometric values up to the
    /// largest trusted eigenvalue (or to `lattice_count` points).
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    pub points: usize,
    /// Count lattice points directly when the operator is the flat Laplacian.
    pub lattice: bool,
    /// Target count for the largest default threshold in lattice mode.
    pub lattice_count: usize,
    /// Karamata exponent; defaults to `n / 2`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Number of trusted `t` values (from the smallest up) in the Karamata table.
    pub karamata_points: usize,
}

impl Default for WeylConfig {
    fn default() -> Self {
        Self { lambdas: None, points: 12, lattice: true, lattice_count: 200_000, alpha: None, karamata_points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsConfig {
    pub order: usize,
}

impl Default for InvariantsConfig {
    fn default() -> Self {
        Self { order: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsospecConfig {
    /// `int |grad f|^2` of the weight, supplied externally.
    pub dirichlet_norm: f64,
    pub rel_tol: f64,
}

impl Default for IsospecConfig {
    fn default() -> Self {
        Self { dirichlet_norm: 0.0, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelKind,
    /// Minimum model band; raised automatically when a weight needs more.
    #[serde(default)]
    pub model_modes: Option<usize>,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub t_grid: GridConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub weyl: WeylConfig,
    #[serde(default)]
    pub invariants: InvariantsConfig,
    #[serde(default)]
    pub isospec: IsospecConfig,
    /// Precomputed spectrum to load instead of solving.
    #[serde(default)]
    pub spectrum_file: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Replaces the seed of a `random_trig` field.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_name() -> String {
    "run".into()
}

fn default_tolerance() -> f64 {
    TAIL_TOLERANCE
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.sync()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative spectrum paths are taken from the config's directory
        if let (Some(sf), Some(dir)) = (&cfg.spectrum_file, path.parent()) {
            if sf.is_relative() {
                cfg.spectrum_file = Some(dir.join(sf));
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name must be a plain file stem, got {:?}", self.name));
        }
        if self.operator.n == 0 {
            return bad("operator.N must be positive".into());
        }
        let g = &self.t_grid;
        if !(g.t_min > 0.0 && g.t_max > g.t_min && g.per_decade > 0) {
            return bad(format!("t_grid needs 0 < t_min < t_max and per_decade > 0, got {g:?}"));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(tol) = o.tolerance {
            self.tolerance = tol;
        }
        self.sync()
    }

    fn sync(&mut self) -> Result<(), CliError> {
        if let (Some(seed), Some(FieldSpec::Builtin(BuiltinField::RandomTrig { seed: s, .. }))) = (self.seed, self.field.as_mut()) {
            *s = seed;
        }
        self.validate()
    }

    /// Output directory: flag or config key, then `HEATLAB_OUT`, then `.`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("HEATLAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Canonical form used for hashing; the output location does not count.
    pub fn canonical(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.canonical()).expect("config serializes")))
    }

    pub fn random_seed(&self) -> Option<u64> {
        match &self.field {
            Some(FieldSpec::Builtin(BuiltinField::RandomTrig { seed, .. })) => Some(*seed),
            _ => None,
        }
    }
}

pub fn combined_hash(a: &str, b: &str) -> String {
    hex::encode(Sha256::digest(format!("{a}:{b}").as_bytes()))
}
