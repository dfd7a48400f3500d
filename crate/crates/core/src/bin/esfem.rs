//! Runs one experiment preset and writes its CSV, VTK and OFF output.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures, 1 for I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use esfem::runner::{run_experiment, ExperimentConfig, RawConfig};
use esfem::Error;

#[derive(Debug, Parser)]
#[command(version, about = "Cahn-Hilliard on evolving surfaces with linear surface finite elements")]
struct Cli {
    /// JSON configuration file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// linear4th, ch-ellipsoid or ch-dumbbell.
    #[arg(long)]
    experiment: Option<String>,
    /// Comma-separated refinement levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed time step.
    #[arg(long)]
    tau: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Use the lumped mass matrix.
    #[arg(long)]
    lumped: bool,
}

fn load(cli: Cli) -> esfem::Result<ExperimentConfig> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    if cli.experiment.is_some() {
        raw.experiment = cli.experiment;
    }
    if cli.levels.is_some() {
        raw.levels = cli.levels;
    }
    if cli.epsilon.is_some() {
        raw.epsilon = cli.epsilon;
    }
    if cli.tau.is_some() {
        raw.tau = cli.tau;
        raw.tau_rule = None;
    }
    if cli.final_time.is_some() {
        raw.final_time = cli.final_time;
    }
    if cli.seed.is_some() {
        raw.seed = cli.seed;
    }
    if cli.output_dir.is_some() {
        raw.output_dir = cli.output_dir;
    }
    if cli.lumped {
        raw.lumped = Some(true);
    }
    raw.validate()
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else if matches!(err, Error::Io { .. }) {
        1
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cfg = match load(Cli::parse()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Some(tau) = cfg.tau {
        for w in cfg.scheme().warnings(tau) {
            eprintln!("warning: {w}");
        }
    }
    match run_experiment(&cfg) {
        Ok(report) => {
            for r in &report.convergence {
                println!(
                    "level {} h {:.6e} L2(u) {:.6e} L2(w) {:.6e} eoc(u) {}",
                    r.level,
                    r.h,
                    r.err_u_l2,
                    r.err_w_l2,
                    r.eoc_u_l2.map_or("-".into(), |v| format!("{v:.4}"))
                );
            }
            for (level, tau, hist) in &report.histories {
                let (t, last) = hist.last().expect("history has the initial state");
                println!(
                    "level {level}: {} steps of {tau:e} to t = {t}, energy {:.6e}, mass {:.6e}",
                    hist.len() - 1,
                    last.energy,
                    last.mass
                );
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} files to {}", report.files.len(), cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut source: &Error = &e;
            while let Error::AtStep { source: inner, .. } | Error::AtNode { source: inner, .. } = source {
                source = inner;
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(source))
        }
    }
}
