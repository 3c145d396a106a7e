//! `ftlab`: batch driver for the torus experiments.

use clap::{Parser, Subcommand};
use finsler_torus::harness::{self, Command, ExperimentConfig};
use finsler_torus::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ftlab", version, about = "Minimal geodesics and Mather theory for Finsler metrics on the 2-torus")]
struct Cli {
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads` in the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Integrate one geodesic and record energy drift.
    Integrate,
    /// Periodic minimizers for the configured classes.
    Minimize,
    /// Beta on Farey classes, with corner slopes.
    BetaTable,
    /// Level set of alpha.
    AlphaLevel,
    /// Coverage of the torus by periodic minimizers of one class.
    GapScan,
    /// Heteroclinics of both signs across the widest gap.
    Heteroclinic,
    /// Multibump minimizers and the traversal fit.
    Multibump,
    /// Separated-set entropy estimate over an epsilon ladder.
    Entropy,
    /// Invariant tori for irrational directions and their cyclic order.
    Torus,
    /// Period and invariance checks for Katok-Ziller flows.
    KatokCheck,
    /// Print a config with every default filled in.
    DefaultConfig,
}

impl Sub {
    fn command(self) -> Option<Command> {
        Some(match self {
            Sub::Integrate => Command::Integrate,
            Sub::Minimize => Command::Minimize,
            Sub::BetaTable => Command::BetaTable,
            Sub::AlphaLevel => Command::AlphaLevel,
            Sub::GapScan => Command::GapScan,
            Sub::Heteroclinic => Command::Heteroclinic,
            Sub::Multibump => Command::Multibump,
            Sub::Entropy => Command::Entropy,
            Sub::Torus => Command::Torus,
            Sub::KatokCheck => Command::KatokCheck,
            Sub::DefaultConfig => return None,
        })
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e.to_json()).unwrap_or_default());
    ExitCode::from(e.exit_code() as u8)
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    // flag overrides are applied before validation, so a missing seed may
    // come from the command line
    let mut v: toml::Table = text.parse().map_err(|e| Error::Invalid(format!("config: {e}")))?;
    if let Some(s) = cli.seed {
        v.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    if let Some(t) = cli.threads {
        v.insert("threads".into(), toml::Value::Integer(t as i64));
    }
    ExperimentConfig::from_toml(&toml::to_string(&v).map_err(|e| Error::Invalid(e.to_string()))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(cmd) = cli.cmd.command() else {
        let c = ExperimentConfig::from_toml("seed = 0\n[metric]\nkind = \"flat\"\n").expect("default config");
        print!("{}", c.to_toml());
        return ExitCode::SUCCESS;
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(cmd.name()));
    match harness::run(cmd, &cfg, &out) {
        Ok(0) => {
            println!("{}", out.display());
            ExitCode::SUCCESS
        }
        Ok(code) => {
            if let Ok(text) = std::fs::read_to_string(out.join("error.json")) {
                eprintln!("{text}");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => fail(&e),
    }
}
