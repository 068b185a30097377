//! Experiment configuration files.
//!
//! A config is a flat TOML table. Every key is optional except
//! `experiment` and `grid_sizes`; unknown keys are rejected so typos cannot
//! silently fall back to defaults.

use std::path::Path;

use anyhow::{bail, ensure, Context};
use serde::Deserialize;

use conslab_core::conslaw::FixedPointOptions;
use conslab_core::gauge::GaugeOptions;
use conslab_core::targets::{GeometryKind, GeometrySpec};
use conslab_core::wente::{Family, WenteBc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    Wente,
    Gauge,
    Conslaw,
    Frames,
    Heinz,
    Convergence,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Wente => "wente",
            Experiment::Gauge => "gauge",
            Experiment::Conslaw => "conslaw",
            Experiment::Frames => "frames",
            Experiment::Heinz => "heinz",
            Experiment::Convergence => "convergence",
        }
    }

    fn parse(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "wente" => Experiment::Wente,
            "gauge" => Experiment::Gauge,
            "conslaw" => Experiment::Conslaw,
            "frames" => Experiment::Frames,
            "heinz" => Experiment::Heinz,
            "convergence" => Experiment::Convergence,
            other => bail!(
                "unknown experiment '{other}' (expected wente, gauge, conslaw, frames, heinz or convergence)"
            ),
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    experiment: Option<OneOrMany>,
    grid_sizes: Option<Vec<usize>>,
    seed: u64,
    samples: u64,
    family: String,
    bc: String,
    geometry: String,
    lambda: f64,
    lambdas: Option<Vec<f64>>,
    center_x: f64,
    center_y: f64,
    h_const: f64,
    tol_div: Option<f64>,
    max_iter: usize,
    step0: f64,
    backtrack: f64,
    eps_threshold: f64,
    force: bool,
    tol_fp: f64,
    max_sweeps: usize,
    min_slope: f64,
    bound_slack: f64,
    residual_max: f64,
    reconstruction_max: f64,
    c_spread_max: f64,
}

impl Default for RawConfig {
    fn default() -> Self {
        let g = GaugeOptions::default();
        let fp = FixedPointOptions::default();
        RawConfig {
            experiment: None,
            grid_sizes: None,
            seed: 0,
            samples: 20,
            family: "random".into(),
            bc: "dirichlet".into(),
            geometry: "sphere_harmonic".into(),
            lambda: 0.3,
            lambdas: None,
            center_x: 0.0,
            center_y: 0.0,
            h_const: 0.0,
            tol_div: g.tol_div,
            max_iter: g.max_iter,
            step0: g.step0,
            backtrack: g.backtrack,
            eps_threshold: g.eps_threshold,
            force: g.force,
            tol_fp: fp.tol_fp,
            max_sweeps: fp.max_sweeps,
            min_slope: 0.9,
            bound_slack: 0.10,
            residual_max: 1e-3,
            reconstruction_max: 1e-6,
            c_spread_max: 3.0,
        }
    }
}

/// Pass/fail thresholds applied to experiment results.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub min_slope: f64,
    /// Relative slack on the Wente constants.
    pub bound_slack: f64,
    /// Largest accepted relative gauge residual at the finest grid.
    pub residual_max: f64,
    pub reconstruction_max: f64,
    /// Largest accepted max/min ratio of an empirical constant over a sweep.
    pub c_spread_max: f64,
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub experiments: Vec<Experiment>,
    pub grid_sizes: Vec<usize>,
    pub seed: u64,
    pub samples: u64,
    pub family: Family,
    pub bc: WenteBc,
    pub geometry: GeometrySpec,
    /// Dilations swept by the gauge, conslaw and frames experiments.
    pub lambdas: Vec<f64>,
    pub gauge: GaugeOptions,
    pub fixed_point: FixedPointOptions,
    pub bounds: Bounds,
}

impl Config {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let names = match raw.experiment {
            Some(OneOrMany::One(s)) => vec![s],
            Some(OneOrMany::Many(v)) => v,
            None => bail!("missing key 'experiment'"),
        };
        ensure!(!names.is_empty(), "'experiment' must name at least one experiment");
        let mut experiments = Vec::new();
        for name in &names {
            let e = Experiment::parse(name)?;
            ensure!(!experiments.contains(&e), "experiment '{name}' listed twice");
            experiments.push(e);
        }

        let grid_sizes = raw.grid_sizes.context("missing key 'grid_sizes'")?;
        ensure!(!grid_sizes.is_empty(), "'grid_sizes' is empty");
        for &n in &grid_sizes {
            ensure!(n % 2 == 1 && n >= 17, "grid size {n} must be odd and at least 17");
        }
        ensure!(grid_sizes.windows(2).all(|w| w[0] < w[1]), "'grid_sizes' must be strictly ascending");
        if experiments.contains(&Experiment::Convergence) {
            ensure!(grid_sizes.len() >= 3, "the convergence experiment needs at least 3 grid sizes");
        }

        ensure!(raw.samples >= 1, "'samples' must be at least 1");
        let family: Family = raw.family.parse()?;
        let bc: WenteBc = raw.bc.parse()?;
        let kind: GeometryKind = raw.geometry.parse()?;
        let geometry = GeometrySpec { kind, lambda: raw.lambda, center: (raw.center_x, raw.center_y), h_const: raw.h_const };
        geometry.validate()?;
        let lambdas = raw.lambdas.unwrap_or_else(|| vec![raw.lambda]);
        ensure!(!lambdas.is_empty(), "'lambdas' is empty");
        for &l in &lambdas {
            ensure!(l > 0.0 && l.is_finite(), "every lambda must be positive, got {l}");
        }
        if experiments.contains(&Experiment::Frames) {
            ensure!(
                matches!(kind, GeometryKind::SphereHarmonic | GeometryKind::Hypersurface),
                "frames needs geometry sphere_harmonic or hypersurface"
            );
        }
        if experiments.contains(&Experiment::Heinz) {
            ensure!(raw.h_const != 0.0, "heinz needs a nonzero 'h_const'");
        }

        if let Some(t) = raw.tol_div {
            ensure!(t > 0.0, "'tol_div' must be positive");
        }
        ensure!(raw.step0 > 0.0, "'step0' must be positive");
        ensure!(raw.backtrack > 0.0 && raw.backtrack < 1.0, "'backtrack' must lie in (0, 1)");
        ensure!(raw.eps_threshold > 0.0, "'eps_threshold' must be positive");
        ensure!(raw.tol_fp > 0.0, "'tol_fp' must be positive");
        ensure!(raw.max_sweeps >= 1, "'max_sweeps' must be at least 1");
        ensure!(raw.bound_slack >= 0.0, "'bound_slack' must be non-negative");
        ensure!(raw.residual_max > 0.0 && raw.reconstruction_max > 0.0, "residual bounds must be positive");
        ensure!(raw.c_spread_max >= 1.0, "'c_spread_max' must be at least 1");

        Ok(Config {
            experiments,
            grid_sizes,
            seed: raw.seed,
            samples: raw.samples,
            family,
            bc,
            geometry,
            lambdas,
            gauge: GaugeOptions {
                tol_div: raw.tol_div,
                max_iter: raw.max_iter,
                step0: raw.step0,
                backtrack: raw.backtrack,
                eps_threshold: raw.eps_threshold,
                force: raw.force,
                ..GaugeOptions::default()
            },
            fixed_point: FixedPointOptions { tol_fp: raw.tol_fp, max_sweeps: raw.max_sweeps },
            bounds: Bounds {
                min_slope: raw.min_slope,
                bound_slack: raw.bound_slack,
                residual_max: raw.residual_max,
                reconstruction_max: raw.reconstruction_max,
                c_spread_max: raw.c_spread_max,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = Config::parse("experiment = \"wente\"\ngrid_sizes = [33]\nseed = 7\n").unwrap();
        assert_eq!(c.experiments, vec![Experiment::Wente]);
        assert_eq!(c.samples, 20);
        assert_eq!(c.lambdas, vec![0.3]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_sizes() {
        assert!(Config::parse("experiment = \"wente\"\ngrid_sizes = [33]\nsede = 7\n").is_err());
        assert!(Config::parse("experiment = \"wente\"\ngrid_sizes = [32]\n").is_err());
        assert!(Config::parse("experiment = \"wente\"\ngrid_sizes = [65, 33]\n").is_err());
        assert!(Config::parse("experiment = \"convergence\"\ngrid_sizes = [33, 65]\n").is_err());
    }
}
