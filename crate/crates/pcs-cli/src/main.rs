//! `pcs`: batch experiments on photonic-crystal-slab mirrors and the
//! cavities built from them.
//!
//! One subcommand per experiment class; every run reads a TOML config,
//! writes plot-ready CSV plus a JSON report embedding the resolved config,
//! and exits 0 on success, 2 on config errors, 3 on numerical failures and
//! 4 on I/O problems.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "pcs",
    about = "Photonic-crystal-slab mirror and cavity experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parameter sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Master seed for synthetic noise (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format for tabular data: csv | json.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic guided-mode bands of the homogenized membrane.
    GuidedBands,
    /// Reflectivity/transmission map over (k_x, nu/c), optionally convolved
    /// with the spectrometer response.
    BandMap,
    /// Fit the two-mode model to a transmission spectrum (RCWA sweep or a
    /// CSV file).
    FanoFit,
    /// Synthesize a single-ended cavity scan and run the full reduction
    /// pipeline.
    CavityScan,
    /// Membrane-in-the-middle transmission map, eigenmode pairs and the
    /// loss-width inference.
    MimMap,
}

fn load_config(cli: &Cli) -> Result<config::RunConfig, CliError> {
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            config::RunConfig::parse(&text)
        }
        None => config::RunConfig::parse(""),
    }
}

/// Write atomically: to a temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().ok_or_else(|| {
        CliError::Io(format!("no parent directory for {}", path.display()))
    })?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    // sweeps parallelize across grid points; the dense linear algebra stays
    // sequential so outputs are identical for any worker count
    pcs_rcwa::lock_linear_algebra_sequential();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!(
                "{}",
                serde_json::json!({"error": "config", "message": e.to_string()})
            );
            return ExitCode::from(2);
        }
    }

    let result = load_config(&cli).and_then(|cfg| {
        let ctx = commands::Context {
            config: cfg,
            out_dir: cli.out.clone(),
            seed_override: cli.seed,
            json_tables: cli.format == "json",
        };
        match cli.command {
            Command::GuidedBands => commands::guided_bands(&ctx),
            Command::BandMap => commands::band_map(&ctx),
            Command::FanoFit => commands::fano_fit(&ctx),
            Command::CavityScan => commands::cavity_scan(&ctx),
            Command::MimMap => commands::mim_map(&ctx),
        }
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": e.kind(), "message": e.message()})
            );
            ExitCode::from(e.exit_code())
        }
    }
}
