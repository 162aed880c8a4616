use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab_cli::commands::{cmd_classify, cmd_fit, cmd_invariants, cmd_isospec, cmd_spectrum, cmd_trace, cmd_weyl};
use heatlab_cli::config::{ExperimentConfig, Overrides};
use heatlab_cli::report::CommandOutput;
use heatlab_cli::CliError;

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat-trace experiments on exactly solvable manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out`, then HEATLAB_OUT, then `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized potentials.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative tail tolerance for trusted trace points.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the configured operator.
    Spectrum(Common),
    /// Heat trace with tail bounds.
    Trace(Common),
    /// Small-t expansion fit.
    Fit(Common),
    /// H1 classification of the potential.
    Classify(Common),
    /// Weyl ratios and Karamata checks.
    Weyl(Common),
    /// Heat invariants from the parametrix.
    Invariants(Common),
    /// Spectral inference and comparison of two configs.
    Isospec {
        #[command(flatten)]
        common: Common,
        /// Second config.
        #[arg(long)]
        against: PathBuf,
    },
}

fn load(common: &Common, path: &Path) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides { out: common.out.clone(), seed: common.seed, tolerance: common.tolerance })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, against) = match &cli.command {
        Command::Spectrum(c) | Command::Trace(c) | Command::Fit(c) | Command::Classify(c) | Command::Weyl(c) | Command::Invariants(c) => {
            (c, None)
        }
        Command::Isospec { common, against } => (common, Some(against)),
    };
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = load(common, &common.config)?;
    let out: CommandOutput = match &cli.command {
        Command::Spectrum(_) => cmd_spectrum(&cfg)?,
        Command::Trace(_) => cmd_trace(&cfg)?,
        Command::Fit(_) => cmd_fit(&cfg)?,
        Command::Classify(_) => cmd_classify(&cfg)?,
        Command::Weyl(_) => cmd_weyl(&cfg)?,
        Command::Invariants(_) => cmd_invariants(&cfg)?,
        Command::Isospec { .. } => {
            let other = load(common, against.expect("isospec has --against"))?;
            cmd_isospec(&cfg, &other)?
        }
    };
    let written = out.write_to(&cfg.out_dir())?;
    print!("{}", out.summary);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Parses `args` and runs the command; help and version print and succeed.
fn execute<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string().trim_end().to_string())),
    };
    run(cli)
}

fn main() -> ExitCode {
    match execute(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    const CIRCLE: &str = r#"{"name": "c", "model": {"kind": "circle", "params": {"circumference": 6.283185307179586}},
        "operator": {"N": 400, "path": "exact"}}"#;

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn code(args: &[&str]) -> i32 {
        let mut full = vec!["heatlab"];
        full.extend_from_slice(args);
        execute(full).err().map(|e| e.exit_code()).unwrap_or(0)
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let bad = write(dir.path(), "bad.json", r#"{"model": {"kind": "klein_bottle", "params": {}}}"#);
        assert_eq!(code(&["fit", "--config", &bad, "--out", out]), 2);
        assert_eq!(code(&["fit", "--bogus"]), 2);
        assert_eq!(code(&["trace", "--config", "/nonexistent/heatlab.json"]), 4);
        let cfg = write(dir.path(), "c.json", CIRCLE);
        // no grid point can meet this tail tolerance
        assert_eq!(code(&["fit", "--config", &cfg, "--tolerance", "1e-300", "--out", out]), 3);
        assert_eq!(code(&["classify", "--config", &cfg, "--out", out]), 2);
        assert_eq!(code(&["--help"]), 0);
    }

    #[test]
    fn env_out_dir_and_spectrum_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "c.json", CIRCLE);
        std::env::set_var("HEATLAB_OUT", dir.path());
        let r = execute(["heatlab", "spectrum", "--config", &cfg]);
        std::env::remove_var("HEATLAB_OUT");
        r.unwrap();
        let text = std::fs::read_to_string(dir.path().join("c.spectrum.json")).unwrap();
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(report["command"], "spectrum");
        assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(report["result"]["N"], 400);

        // a config that loads the stored spectrum reproduces the trace
        let reuse = CIRCLE.replace(r#""name": "c""#, r#""name": "r", "spectrum_file": "c.spectrum.json""#);
        let rcfg = write(dir.path(), "r.json", &reuse);
        let out = dir.path().to_str().unwrap();
        execute(["heatlab", "trace", "--config", &cfg, "--out", out]).unwrap();
        execute(["heatlab", "trace", "--config", &rcfg, "--out", out]).unwrap();
        let a = std::fs::read(dir.path().join("c.trace.csv")).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("r.trace.csv")).unwrap());
    }
}
