//! `holoweld` command-line front end.
//!
//! Exit codes: 0 all checks passed, 1 usage or configuration error,
//! 2 a check failed (artifacts are still written), 3 internal or solver error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{construct_defaults, flags, resolve, GlueConfig, LedgerConfig, TowersConfig, WindowsConfig};
use crate::output::Artifacts;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Io(_) | Self::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser, Debug)]
#[command(name = "holoweld", version, about = "Window functions, gluing, tower models and growth ledgers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON file whose keys override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a window system and check P1-P3 and subharmonicity.
    Windows {
        #[command(flatten)]
        flags: WindowsFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Glue random polynomial patches (subharmonic or entire).
    Glue {
        #[command(flatten)]
        flags: GlueFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Nested tower refinement with its loss bounds and the four-corner check.
    Towers {
        #[command(flatten)]
        flags: TowersFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Inductive construction over a tower model with its property report.
    Construct {
        #[command(flatten)]
        flags: ConstructFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Log-space growth ledger.
    Ledger {
        #[command(flatten)]
        flags: LedgerFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Convert a binary field container to CSV.
    FieldCsv {
        input: PathBuf,
        output: PathBuf,
        /// The container holds complex values.
        #[arg(long)]
        complex: bool,
    },
}

#[derive(Args, Debug, Serialize)]
struct WindowsFlags {
    #[arg(long = "C")]
    #[serde(rename = "C")]
    c: Option<f64>,
    /// `random:N` or `file:path.json`.
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    image_size: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct GlueFlags {
    /// `entire` or `subharmonic`.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long = "C")]
    #[serde(rename = "C")]
    c: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    m: Option<f64>,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    b: Option<f64>,
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    patch_degree: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    image_size: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct TowersFlags {
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    d: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corners: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct ConstructFlags {
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    d: Option<f64>,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    b: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the small nested lattice layout instead of `a_n = D n ln²n a_{n-1}`.
    #[arg(long)]
    #[serde(skip)]
    desk: bool,
}

#[derive(Args, Debug, Serialize)]
struct LedgerFlags {
    #[arg(long = "B")]
    #[serde(rename = "B")]
    b: Option<f64>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    d: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Largest `m`, e.g. `1e9`.
    #[arg(long)]
    mmax: Option<f64>,
    /// `linear` or `geometric`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    per_decade: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HOLOWELD_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Usage(format!("HOLOWELD_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Internal(e.to_string()))
}

fn stamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let ts = stamp();
    let (passed, out) = match cli.command {
        Command::Windows { flags: f, common } => {
            let cfg = resolve(&WindowsConfig::default(), flags(&f), common.config.as_deref())?;
            let mut out = Artifacts::new(&common.out, "windows", cfg.seed, &ts)?;
            (commands::windows(&cfg, &mut out)?, out)
        }
        Command::Glue { flags: f, common } => {
            let cfg = resolve(&GlueConfig::default(), flags(&f), common.config.as_deref())?;
            let mut out = Artifacts::new(&common.out, "glue", cfg.seed, &ts)?;
            (commands::glue(&cfg, &mut out)?, out)
        }
        Command::Towers { flags: f, common } => {
            let cfg = resolve(&TowersConfig::default(), flags(&f), common.config.as_deref())?;
            let mut out = Artifacts::new(&common.out, "towers", cfg.seed, &ts)?;
            (commands::towers(&cfg, &mut out)?, out)
        }
        Command::Construct { flags: f, common } => {
            let mut defaults = construct_defaults();
            if f.desk {
                defaults.desk = holoweld::construct::PipelineConfig::default().desk;
            }
            let cfg = resolve(&defaults, flags(&f), common.config.as_deref())?;
            let mut out = Artifacts::new(&common.out, "construct", cfg.seed, &ts)?;
            (commands::construct(&cfg, &mut out)?, out)
        }
        Command::Ledger { flags: f, common } => {
            let cfg = resolve(&LedgerConfig::default(), flags(&f), common.config.as_deref())?;
            let mut out = Artifacts::new(&common.out, "ledger", cfg.seed, &ts)?;
            (commands::ledger(&cfg, &mut out)?, out)
        }
        Command::FieldCsv { input, output, complex } => {
            commands::export_csv(&input, complex, &output)?;
            println!("{}", output.display());
            return Ok(true);
        }
    };
    for p in &out.written {
        println!("{}", p.display());
    }
    eprintln!("{}", if passed { "all checks passed" } else { "some checks failed; see the JSON report" });
    Ok(passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("holoweld: {e}");
            ExitCode::from(e.code())
        }
    }
}
