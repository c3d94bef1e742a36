use clap::{Parser, Subcommand};
use heston_degen::cli;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "heston-degen", version, about = "Degenerate-parabolic Heston solver and verifier")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the parameter gates and print the validity report.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Price at the configured evaluation points by pde, mc, and/or cf.
    Price {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Methods to run (comma separated); defaults to all three.
        #[arg(long, value_delimiter = ',')]
        method: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run a verification suite: maxprinciple, traces, smoothing, boundary.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporal and spatial refinement study.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let args = Args::parse();
    let result = match args.cmd {
        Cmd::Validate { config } => cli::cmd_validate(&config),
        Cmd::Price { config, out, method, seed, paths, steps } => {
            cli::cmd_price(&config, &method, out, seed, paths, steps)
        }
        Cmd::Verify { config, suite, out } => cli::cmd_verify(&config, &suite, out),
        Cmd::Converge { config, levels, out } => cli::cmd_converge(&config, levels, out),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::exit_code_for(&e));
        }
    }
}
