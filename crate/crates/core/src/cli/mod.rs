//! Batch front-end behind the `nehari` binary.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_check, cmd_constants, cmd_ground, cmd_multibump, Context, Outcome};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nehari", version, about = "Nehari-manifold solver for elliptic systems on multi-chamber domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Check,
    Ground,
    Multibump,
    Constants,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assumption checks, geometry validation and domain constants.
    Check(RunArgs),
    /// Ground-state solve.
    Ground(RunArgs),
    /// Multiplicity sweep over all bump patterns.
    Multibump(RunArgs),
    /// Domain constants only.
    Constants(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `experiment.output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the sweep.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Check(a) => (CommandKind::Check, a),
            Command::Ground(a) => (CommandKind::Ground, a),
            Command::Multibump(a) => (CommandKind::Multibump, a),
            Command::Constants(a) => (CommandKind::Constants, a),
        }
    }
}

pub fn execute(kind: CommandKind, ctx: &Context) -> crate::Result<Outcome> {
    match kind {
        CommandKind::Check => cmd_check(ctx),
        CommandKind::Ground => cmd_ground(ctx),
        CommandKind::Multibump => cmd_multibump(ctx),
        CommandKind::Constants => cmd_constants(ctx),
    }
}

/// Parses arguments, runs the subcommand and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    let (kind, a) = cli.command.split();
    let result = Context::load(&a.config, a.out.clone(), a.seed, a.workers).and_then(|ctx| execute(kind, &ctx));
    match result {
        Ok(out) => {
            for r in &out.records {
                println!("{}", r.line());
            }
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
