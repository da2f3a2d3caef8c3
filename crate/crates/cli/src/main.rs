use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyvi_cli::commands::{self, BatchArgs, SolveArgs};
use polyvi_cli::generate::Family;

/// Solve polynomial variational inequalities with moment relaxations.
#[derive(Parser)]
#[command(name = "polyvi", version)]
struct Cli {
    /// Log solver progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find one solution (default) or all solutions.
    Solve {
        file: PathBuf,
        /// Enumerate every solution and certify completeness.
        #[arg(long, conflicts_with = "one")]
        all: bool,
        /// Stop after the first solution (default).
        #[arg(long)]
        one: bool,
        #[arg(long, env = "POLYVI_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        max_loops: Option<usize>,
        /// Relaxation orders tried above the minimal one.
        #[arg(long)]
        max_order_extra: Option<u32>,
        #[arg(long)]
        json: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the gap ε of a point.
    Verify {
        file: PathBuf,
        /// Comma separated coordinates, e.g. "1.0,0,3,0".
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        json: bool,
    },
    /// Upper bounds on the number of complex KKT points.
    Bound {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a random problem file (dims: ball n d | eig-linear n | eig-soc n | capital n1 n2).
    GenRandom {
        family: Family,
        #[arg(required = true)]
        dims: Vec<usize>,
        #[arg(long, env = "POLYVI_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve random instances and report the success rate.
    Batch {
        family: Family,
        #[arg(required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, env = "POLYVI_SEED", default_value_t = 0)]
        seed: u64,
        /// Parallel workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let mut stdout = std::io::stdout().lock();
    let res = match cli.cmd {
        Cmd::Solve { file, all, one: _, seed, max_loops, max_order_extra, json, out } => {
            commands::solve(&SolveArgs { file, all, seed, max_loops, max_order_extra, json, out }, &mut stdout)
        }
        Cmd::Verify { file, point, json } => commands::verify(&file, &point, json, &mut stdout),
        Cmd::Bound { file, json } => commands::bound(&file, json, &mut stdout),
        Cmd::GenRandom { family, dims, seed, out } => commands::gen_random(family, &dims, seed, out.as_deref(), &mut stdout),
        Cmd::Batch { family, dims, count, seed, jobs, json } => {
            commands::batch(&BatchArgs { family, dims, count, seed, jobs, json }, &mut stdout)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
