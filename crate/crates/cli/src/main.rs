use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conslab_cli::config::Config;
use conslab_cli::{run, summarize, EXIT_FAIL, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "conslab", version, about = "Conservation-law experiments on the discretized unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments named in a config file.
    Run {
        /// TOML config; the schema is documented in the README.
        config: PathBuf,
        /// Output directory for the CSV files.
        #[arg(long, env = "CONSLAB_OUT", default_value = "out")]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, out, seed, jobs } = Cli::parse().command;
    let mut cfg = match Config::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid config {}: {e:#}", config.display());
            eprintln!("see the Configuration section of the README for the schema");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = jobs {
        if k == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot start {k} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cfg, &out) {
        Ok((outcomes, written)) => {
            let (lines, code) = summarize(&outcomes);
            for l in lines {
                println!("{l}");
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
