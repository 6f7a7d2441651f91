use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use q2q1_amg_cli::{run, Config, Mode, Options};

/// Monolithic AMG experiments for Q2-Q1 Stokes and Navier-Stokes problems.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for reports and dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the fine system, masses, coordinates and all level operators
    /// and transfers as Matrix Market files under `--out`.
    #[arg(long)]
    dump_matrices: bool,
    /// Write coarse point lists and transfer patterns under `--out`.
    #[arg(long)]
    dump_splitting: bool,
    #[arg(long, value_enum, default_value = "stokes")]
    mode: Mode,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if (args.dump_matrices || args.dump_splitting) && args.out.is_none() {
        eprintln!("error: --dump-matrices and --dump-splitting need --out");
        return ExitCode::from(2);
    }
    let config = match &args.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    };
    let result = config.and_then(|c| c.resolve()).map_err(Into::into).and_then(|cfg| {
        let opts = Options { out: args.out.clone(), dump_matrices: args.dump_matrices, dump_splitting: args.dump_splitting };
        run(args.mode, &cfg, &opts)
    });
    match result {
        Ok(report) => {
            print!("{}", report.table());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
