use std::path::PathBuf;
use std::process::ExitCode;

use arp_core::exec::Execution;
use arp_core::experiment::{execute, reproduce, ExperimentConfig, ExperimentError, Figure};
use clap::{Parser, Subcommand};

/// Adaptive regularization experiments.
#[derive(Parser)]
#[command(name = "arp", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a key = value config file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate a canned experiment: fig-top, fig-bottom, example-2-1 or sigma-star.
    Reproduce {
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run sub-experiments one after another.
        #[arg(long)]
        sequential: bool,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CONTRACT: u8 = 3;

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn cmd_run(config: PathBuf, out: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: ", config.display());
            return fail(&e);
        }
    };
    let outcome = match execute(&cfg, &out) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let fin = &outcome.trace.final_state;
    println!(
        "{}: {} after {} iterations, grad norm {:.6}",
        cfg.name,
        outcome.trace.termination.name(),
        fin.k,
        fin.grad_norm
    );
    for p in &outcome.written {
        println!("wrote {}", p.display());
    }
    if !outcome.audit_ok() {
        eprintln!("error: audit found violations, see {}.audit.txt", cfg.name);
        return ExitCode::from(EXIT_CONTRACT);
    }
    ExitCode::SUCCESS
}

fn cmd_reproduce(figure: &str, out: Option<PathBuf>, sequential: bool) -> ExitCode {
    let Some(fig) = Figure::from_name(figure) else {
        let names: Vec<&str> = Figure::ALL.iter().map(|f| f.name()).collect();
        eprintln!("error: unknown figure {figure:?}; expected one of {}", names.join(", "));
        return ExitCode::from(EXIT_CONFIG);
    };
    let out = out.unwrap_or_else(|| PathBuf::from("out").join(fig.name()));
    let exec = if sequential { Execution::Sequential } else { Execution::default() };
    let rep = match reproduce(fig, &out, exec) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    for p in &rep.files {
        println!("wrote {}", p.display());
    }
    if !rep.audits_ok {
        eprintln!("error: audit found violations");
        return ExitCode::from(EXIT_CONTRACT);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { config, out } => cmd_run(config, out),
        Cmd::Reproduce { figure, out, sequential } => cmd_reproduce(&figure, out, sequential),
    }
}
