use std::process::ExitCode;

use clap::{Parser, Subcommand};
use onsager_degree_cli::{resolve, run, Command, RunFlags};

#[derive(Parser)]
#[command(name = "onsager-degree", version, about = "Spectral-Galerkin solver and degree engine for the Doi-Onsager equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find all solutions in the a-priori ball with their stability.
    Solve(RunFlags),
    /// Brouwer degree of the finite-rank map (optionally over --levels).
    Degree(RunFlags),
    /// Trace the bifurcation diagram up to --lambda-max.
    Bifurcate(RunFlags),
    /// Run the invariant suite.
    Verify(RunFlags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, flags) = match cli.command {
        Cmd::Solve(f) => (Command::Solve, f),
        Cmd::Degree(f) => (Command::Degree, f),
        Cmd::Bifurcate(f) => (Command::Bifurcate, f),
        Cmd::Verify(f) => (Command::Verify, f),
    };
    let outcome = resolve(&flags, command.default_formats()).and_then(|cfg| {
        let out = cfg.out.clone();
        let artifact = run(command, cfg)?;
        let paths = artifact.write(&out)?;
        Ok((artifact, paths))
    });
    match outcome {
        Ok((artifact, paths)) => {
            for p in paths {
                println!("{}", p.display());
            }
            if artifact.succeeded() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: result not certified or checks failed", command.name());
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
