//! `ltlseq` command-line front end.

mod commands;
mod config;
mod failure;
mod manifest;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ltlseq", version, about = "LTL tasks as reach-avoid sequences for grid-world agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON, see schema/config.schema.json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the configured one, then `ltlseq-out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Translate a formula into an LDBA and write it as HOA.
    Compile(commands::CompileArgs),
    /// List accepting-cycle paths and their reach-avoid sequences.
    Paths(commands::PathsArgs),
    /// Train a sequence-conditioned policy with PPO.
    Train(commands::TrainArgs),
    /// Execute tasks with a trained or oracle agent.
    Eval(commands::EvalArgs),
    /// Exact product-MDP analyses.
    Oracle(commands::OracleArgs),
    /// Draw a recorded trajectory as SVG.
    Render(commands::RenderArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => commands::compile(a),
        Command::Paths(a) => commands::paths(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Render(a) => commands::render(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
