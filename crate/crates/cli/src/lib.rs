//! Reproducible experiment runner over the `heatlab` library.

pub mod commands;
pub mod config;
pub mod report;

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("tolerance: {0}")]
    Tolerance(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
    version: &'a str,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Tolerance(_) => "tolerance",
            CliError::Io(_) => "io",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Config(m) | CliError::Tolerance(m) | CliError::Io(m) | CliError::Numeric(m) => m.clone(),
        };
        serde_json::to_string(&ErrorDocument { error: self.kind(), message, exit_code: self.exit_code(), version: VERSION })
            .expect("error serializes")
    }
}

impl From<heatlab::Error> for CliError {
    fn from(e: heatlab::Error) -> Self {
        use heatlab::Error as E;
        let m = e.to_string();
        match e {
            E::InvalidParameter(_)
            | E::BandLimitExceeded { .. }
            | E::DimensionMismatch(_)
            | E::MismatchedTruncation { .. }
            | E::Unsupported(_) => CliError::Config(m),
            E::TailTolerance { .. } | E::WindowTooShort { .. } | E::IllConditioned(_) | E::NotBandLimited { .. } => {
                CliError::Tolerance(m)
            }
            E::ConvergenceFailure { .. } | E::NotPositiveDefinite { .. } | E::QuadratureFailure(_) => CliError::Numeric(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let all = [CliError::Config(String::new()), CliError::Tolerance(String::new()), CliError::Io(String::new()), CliError::Numeric(String::new())];
        let mut codes: Vec<i32> = all.iter().map(|e| e.exit_code()).collect();
        codes.dedup();
        assert_eq!(codes, vec![2, 3, 4, 5]);
        let v: serde_json::Value = serde_json::from_str(&all[1].to_json()).unwrap();
        assert_eq!(v["error"], "tolerance");
        assert_eq!(CliError::from(heatlab::Error::IllConditioned(1e9)).exit_code(), 3);
    }
}
