//! Experiment runner behind the `conslab` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use config::{Config, Experiment};
use experiments::{run_experiment, Report};

/// Process exit codes.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Result of one experiment: its report, or the error that stopped it.
pub type Outcome = (Experiment, anyhow::Result<Report>);

/// Runs every configured experiment, in parallel, and writes the tables of
/// the ones that completed. Outcomes keep the configured order.
pub fn run(cfg: &Config, out: &Path) -> anyhow::Result<(Vec<Outcome>, Vec<PathBuf>)> {
    let outcomes: Vec<Outcome> = cfg.experiments.par_iter().map(|&e| (e, run_experiment(e, cfg))).collect();
    let mut written = Vec::new();
    for (_, r) in &outcomes {
        if let Ok(report) = r {
            for t in &report.tables {
                written.push(t.write(out)?);
            }
        }
    }
    Ok((outcomes, written))
}

/// Summary lines and the exit code they imply.
pub fn summarize(outcomes: &[Outcome]) -> (Vec<String>, u8) {
    let mut lines = Vec::new();
    let mut code = EXIT_PASS;
    for (e, r) in outcomes {
        match r {
            Ok(report) => {
                for c in &report.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    lines.push(format!("  [{tag}] {}: {}", c.name, c.detail));
                }
                let passed = report.checks.iter().filter(|c| c.passed).count();
                let tag = if report.passed() { "PASS" } else { "FAIL" };
                lines.push(format!("{}: {tag} ({passed}/{} checks)", e.as_str(), report.checks.len()));
                if !report.passed() {
                    code = EXIT_FAIL;
                }
            }
            Err(err) => {
                lines.push(format!("{}: ERROR {err:#}", e.as_str()));
                code = EXIT_FAIL;
            }
        }
    }
    (lines, code)
}
