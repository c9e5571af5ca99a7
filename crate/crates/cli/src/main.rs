//! `seqlogic` command-line interface.
//!
//! Exit status: 0 success, 1 verification failure, 2 usage or input error,
//! 3 restart budget exhausted.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seqlogic::PrepPath;

use commands::{Failure, Output};

#[derive(Parser)]
#[command(name = "seqlogic", version, about = "Test sequential quantum logic propositions on a simulator")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a proposition and show its tree and canonical form.
    Parse { proposition: String },
    /// Report which tests are physically implementable for an assignment.
    Check(Target),
    /// Compile to a circuit and print its dump.
    Compile {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "teleport")]
        path: PrepPath,
    },
    /// Sample shots of the protocol.
    Run {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "teleport")]
        path: PrepPath,
        #[command(flatten)]
        sampling: Sampling,
        /// Restart each shot until success, at most N attempts. Without N the
        /// cap is 100 × ⌈1/p⌉ for the exact success probability p.
        #[arg(long, value_name = "N", num_args = 0..=1)]
        retry: Option<Option<u64>>,
    },
    /// Check the simulator against the operator oracle.
    Verify {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        /// Restrict to one preparation path; default is every supported path.
        #[arg(long)]
        path: Option<PrepPath>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Oracle quantities: branch norms, conditional distribution, success
    /// probability and the proposition operator.
    Analytic(Target),
}

#[derive(Args)]
struct Target {
    proposition: String,
    /// JSON assignment file.
    assignment: PathBuf,
}

#[derive(Args)]
struct Sampling {
    #[arg(long, default_value_t = seqlogic::harness::DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

fn dispatch(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Parse { proposition } => commands::parse(proposition),
        Command::Check(t) => commands::check(&t.proposition, &t.assignment),
        Command::Compile { target, path } => commands::compile(&target.proposition, &target.assignment, *path),
        Command::Run {
            target,
            path,
            sampling,
            retry,
        } => commands::run(
            &target.proposition,
            &target.assignment,
            *path,
            sampling.shots,
            sampling.seed,
            *retry,
            sampling.jobs,
        ),
        Command::Verify {
            target,
            mode,
            path,
            sampling,
        } => {
            let mode = match mode {
                Mode::Exact => seqlogic::VerifyMode::Exact,
                Mode::Sampled => seqlogic::VerifyMode::Sampled {
                    shots: sampling.shots,
                    seed: sampling.seed,
                },
            };
            commands::verify(&target.proposition, &target.assignment, mode, *path, sampling.jobs)
        }
        Command::Analytic(t) => commands::analytic(&t.proposition, &t.assignment),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable")),
                Format::Text => print!("{}", out.text),
            }
            ExitCode::from(out.status)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}
