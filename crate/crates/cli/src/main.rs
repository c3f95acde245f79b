use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;
mod config;

use config::{parse_param, InputSpec, RunConfig};

#[derive(Parser)]
#[command(name = "cmlab", version, about = "Excess, Lipschitz approximation and center-manifold experiments on minimal graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dyadic level whose ζ_k is written by `cm`.
    #[arg(long, global = true)]
    level: Option<u32>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param, global = true)]
    params: Vec<(String, String)>,
    /// Input field file, replacing the config input.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Minimize area for preset boundary data.
    Generate,
    /// Cylindrical and optimal spherical excess of an input graph.
    Excess,
    /// Excess over a halving sequence of balls.
    Decay,
    /// Lipschitz approximation in a cylinder.
    Lipapprox,
    /// Center-manifold interpolation over all levels.
    Cm,
    /// Acceptance suite.
    Verify {
        #[arg(value_enum)]
        target: Target,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum Target {
    /// All criteria, with the determinism rerun.
    All,
}

#[derive(Debug)]
pub enum Failure {
    Assertion(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Assertion(s) => write!(f, "assertion failed: {s}"),
            Failure::Config(s) => write!(f, "configuration error: {s}"),
            Failure::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl From<cmlab::Error> for Failure {
    fn from(e: cmlab::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, cmlab::Error::Certificate { .. }) {
            Failure::Assertion(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub level: Option<u32>,
    pub flags: Vec<(String, String)>,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
        write(&self.path(name), text.as_bytes())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        write(&self.path(name), text.as_bytes())
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn context(cli: &Cli) -> Result<Ctx, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(file) = &cli.input {
        cfg.input = Some(InputSpec::File { file: file.clone() });
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let seed = cli.seed.or(cfg.seed).unwrap_or(7);
    let level = cli.level.or(cfg.level);
    Ok(Ctx {
        cfg,
        out,
        seed,
        level,
        flags: cli.params.clone(),
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = context(cli)?;
    match cli.command {
        Command::Generate => commands::generate(&ctx)?,
        Command::Excess => commands::excess(&ctx)?,
        Command::Decay => commands::decay(&ctx)?,
        Command::Lipapprox => commands::lipapprox(&ctx)?,
        Command::Cm => commands::cm(&ctx)?,
        Command::Verify { target: Target::All } => commands::verify_all(&ctx)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cmlab: {f}");
            ExitCode::from(f.code())
        }
    }
}
