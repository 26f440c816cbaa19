use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rocofbench::cli::{run, Dataset, RunConfig};
use rocofbench::estimators::{Algorithm, PmuClass};
use rocofbench::Error;

/// Regenerates the ROCOF accuracy experiments and the UFLS comparison.
#[derive(Debug, Parser)]
#[command(name = "rocofbench", version)]
struct Args {
    /// dataset1, dataset2, dataset3, ufls or custom.
    dataset: Dataset,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Noise seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated algorithms (e_ipdft, i_ipdft, tfm).
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<Algorithm>>,
    /// Comma-separated PMU classes (P, M).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<PmuClass>>,
}

fn exec(args: Args) -> Result<String, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.algos {
        cfg.algorithms = a;
    }
    if let Some(c) = args.classes {
        cfg.classes = c;
    }
    run(&cfg, args.dataset, &args.out)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match exec(args) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rocofbench: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => 3,
                _ => 2,
            })
        }
    }
}
