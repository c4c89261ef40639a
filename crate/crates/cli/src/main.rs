//! `freevar` command line.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or schema error,
//! 3 numeric failure. Every run that writes files also writes
//! `<output-stem>.manifest.json` next to them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cmd_levy;
mod cmd_ncsym;
mod cmd_sim;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use manifest::RunManifest;

#[derive(Parser, Debug, Serialize)]
#[command(name = "freevar", version, about = "Higher variations of free Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Polynomials in non-commuting variables.
    Ncsym(cmd_ncsym::NcsymArgs),
    /// Generating triples, pairs and the variation map.
    Levy(cmd_levy::LevyArgs),
    /// Random-matrix verification campaigns.
    Sim(cmd_sim::SimArgs),
}

/// How a command ended, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Verify(String),
    Usage(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verify(m) | Failure::Usage(m) | Failure::Numeric(m) => m,
        }
    }
}

/// Files a successful command touched, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Some verification check failed; outputs are still written.
    pub failed: bool,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Ncsym(a) => format!("ncsym {}", a.name()),
            Command::Levy(a) => format!("levy {}", a.name()),
            Command::Sim(a) => format!("sim {}", a.name()),
        }
    }

    fn manifest_stem(&self) -> Option<PathBuf> {
        match self {
            Command::Ncsym(a) => a.out.as_deref().map(manifest::stem_of),
            Command::Levy(a) => a.out.as_deref().map(manifest::stem_of),
            Command::Sim(a) => Some(a.out.join(a.name())),
        }
    }

    fn run(&self) -> Result<Outcome, Failure> {
        match self {
            Command::Ncsym(a) => cmd_ncsym::run(a),
            Command::Levy(a) => cmd_levy::run(a),
            Command::Sim(a) => cmd_sim::run(a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = cli.command.run();
    let (code, outcome) = match result {
        Ok(o) => (u8::from(o.failed), o),
        Err(f) => {
            eprintln!("error: {}", f.message());
            (f.code(), Outcome::default())
        }
    };
    if let Some(stem) = cli.command.manifest_stem() {
        let m = RunManifest::new(
            cli.command.name(),
            &cli.command,
            outcome.inputs,
            outcome.outputs,
            start.elapsed().as_secs_f64(),
            code,
        );
        if let Err(e) = m.write(&stem) {
            eprintln!("error: could not write manifest: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
