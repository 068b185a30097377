//! Wente-type problems `Δφ = ∂x a ∂y b - ∂y a ∂x b` and their constants.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elliptic::{solve_dirichlet, solve_neumann, SolveReport};
use crate::error::{Error, Result};
use crate::field_core::{grad, jacobian, l2_norm_vec, make_grid, sup_norm, w12_seminorm, Domain, Grid, ScalarField};

/// Sharp constant of `‖φ‖∞ ≤ C ‖∇a‖₂ ‖∇b‖₂` on the disk.
pub const SUP_CONSTANT: f64 = 1.0 / (2.0 * PI);

/// Constant of `‖∇φ‖₂ ≤ C ‖∇a‖₂ ‖∇b‖₂`.
pub fn grad_constant() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WenteBc {
    Dirichlet,
    Neumann,
}

impl WenteBc {
    pub fn as_str(self) -> &'static str {
        match self {
            WenteBc::Dirichlet => "dirichlet",
            WenteBc::Neumann => "neumann",
        }
    }
}

impl FromStr for WenteBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(WenteBc::Dirichlet),
            "neumann" => Ok(WenteBc::Neumann),
            other => Err(Error::InvalidParameter(format!("unknown boundary condition '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WenteReport {
    pub bc: WenteBc,
    pub norm_grad_a: f64,
    pub norm_grad_b: f64,
    /// `‖φ‖∞ / (‖∇a‖₂‖∇b‖₂)`, undefined for constant inputs.
    pub ratio_sup: Option<f64>,
    /// `‖∇φ‖₂ / (‖∇a‖₂‖∇b‖₂)`, undefined for constant inputs.
    pub ratio_grad: Option<f64>,
    /// Plain nodal sum `h² Σ |∇²φ|` over fully centered nodes.
    pub hessian_l1: f64,
    pub solve: SolveReport,
}

pub fn wente_solve(a: &ScalarField, b: &ScalarField, bc: WenteBc) -> Result<(ScalarField, WenteReport)> {
    let j = jacobian(a, b)?;
    let (phi, solve) = match bc {
        WenteBc::Dirichlet => solve_dirichlet(&j)?,
        WenteBc::Neumann => solve_neumann(&j)?,
    };
    let (na, nb) = (w12_seminorm(a), w12_seminorm(b));
    let denom = na * nb;
    let defined = denom > 0.0;
    let report = WenteReport {
        bc,
        norm_grad_a: na,
        norm_grad_b: nb,
        ratio_sup: defined.then(|| sup_norm(&phi) / denom),
        ratio_grad: defined.then(|| l2_norm_vec(&grad(&phi)) / denom),
        hessian_l1: hessian_l1(&phi),
        solve,
    };
    Ok((phi, report))
}

fn hessian_l1(f: &ScalarField) -> f64 {
    let g = f.grid();
    let (h, n) = (g.h(), g.n());
    let v = f.values();
    let mut s = 0.0;
    for &k in g.interior() {
        if !g.is_centered(k) {
            continue;
        }
        let fxx = (v[k + n] - 2.0 * v[k] + v[k - n]) / (h * h);
        let fyy = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
        let fxy = (v[k + n + 1] - v[k + n - 1] - v[k - n + 1] + v[k - n - 1]) / (4.0 * h * h);
        s += (fxx * fxx + 2.0 * fxy * fxy + fyy * fyy).sqrt();
    }
    s * h * h
}

/// Generator of input pairs for sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Truncated Fourier series with coefficients decaying like |k|⁻².
    Random,
    /// First two components of an inverse stereographic map with random
    /// dilation and center.
    Bubble,
    /// Opposite Gaussian bumps, `b` rotated a quarter turn from `a`.
    Dipole,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Random => "random",
            Family::Bubble => "bubble",
            Family::Dipole => "dipole",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Family::Random),
            "bubble" => Ok(Family::Bubble),
            "dipole" => Ok(Family::Dipole),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

const MODES: i32 = 4;

/// Continuous description of one sample, so the same pair can be sampled on
/// several grids.
#[derive(Clone, Debug)]
enum PairSpec {
    Fourier { a: Vec<(f64, f64, f64, f64)>, b: Vec<(f64, f64, f64, f64)> },
    Bubble { lambda: f64, center: (f64, f64) },
    Dipole { offset: (f64, f64), sigma: f64 },
}

fn fourier(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64, f64)> {
    let mut terms = Vec::new();
    for k1 in -MODES..=MODES {
        for k2 in 0..=MODES {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let amp = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let (c, s) = (rng.gen_range(-1.0..1.0) * amp, rng.gen_range(-1.0..1.0) * amp);
            terms.push((PI * k1 as f64 / 2.0, PI * k2 as f64 / 2.0, c, s));
        }
    }
    terms
}

fn eval_fourier(terms: &[(f64, f64, f64, f64)], x: f64, y: f64) -> f64 {
    terms.iter().map(|&(kx, ky, c, s)| {
        let t = kx * x + ky * y;
        c * t.cos() + s * t.sin()
    }).sum()
}

impl PairSpec {
    fn draw(family: Family, seed: u64, sample: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample);
        match family {
            Family::Random => PairSpec::Fourier { a: fourier(&mut rng), b: fourier(&mut rng) },
            Family::Bubble => {
                let lambda = rng.gen_range(0.5..3.0);
                let center = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                PairSpec::Bubble { lambda, center }
            }
            Family::Dipole => {
                let angle: f64 = rng.gen_range(0.0..2.0 * PI);
                let r = rng.gen_range(0.1..0.4);
                let sigma = rng.gen_range(0.15..0.3);
                PairSpec::Dipole { offset: (r * angle.cos(), r * angle.sin()), sigma }
            }
        }
    }

    fn sample(&self, grid: &Arc<Grid>) -> (ScalarField, ScalarField) {
        match self {
            PairSpec::Fourier { a, b } => (
                ScalarField::from_fn(grid, |x, y| eval_fourier(a, x, y)),
                ScalarField::from_fn(grid, |x, y| eval_fourier(b, x, y)),
            ),
            &PairSpec::Bubble { lambda, center } => {
                let w = move |x: f64, y: f64| (lambda * (x - center.0), lambda * (y - center.1));
                let a = ScalarField::from_fn(grid, |x, y| {
                    let (w1, w2) = w(x, y);
                    2.0 * w1 / (1.0 + w1 * w1 + w2 * w2)
                });
                let b = ScalarField::from_fn(grid, |x, y| {
                    let (w1, w2) = w(x, y);
                    2.0 * w2 / (1.0 + w1 * w1 + w2 * w2)
                });
                (a, b)
            }
            &PairSpec::Dipole { offset: (px, py), sigma } => {
                let bump = move |x: f64, y: f64| (-(x * x + y * y) / (sigma * sigma)).exp();
                let a = ScalarField::from_fn(grid, |x, y| bump(x - px, y - py) - bump(x + px, y + py));
                let b = ScalarField::from_fn(grid, |x, y| bump(x + py, y - px) - bump(x - py, y + px));
                (a, b)
            }
        }
    }
}

/// Input pair `sample` of `family` on `grid`; deterministic in `(seed, sample)`.
pub fn sample_pair(family: Family, grid: &Arc<Grid>, seed: u64, sample: u64) -> (ScalarField, ScalarField) {
    PairSpec::draw(family, seed, sample).sample(grid)
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sample_id: u64,
    pub n: usize,
    pub h: f64,
    pub bc: WenteBc,
    pub norm_grad_a: f64,
    pub norm_grad_b: f64,
    pub ratio_sup: Option<f64>,
    pub ratio_grad: Option<f64>,
}

/// Solves every `(sample, n)` pair on the disk; rows are ordered by sample,
/// then by grid size, and are identical for identical arguments.
pub fn wente_sweep(family: Family, n_list: &[usize], samples: u64, seed: u64, bc: WenteBc) -> Result<Vec<SweepRow>> {
    let grids = n_list.iter().map(|&n| make_grid(n, Domain::DiskMask)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(u64, &Arc<Grid>)> = (0..samples).flat_map(|s| grids.iter().map(move |g| (s, g))).collect();
    jobs.par_iter()
        .map(|&(sample, grid)| {
            let (a, b) = sample_pair(family, grid, seed, sample);
            let (_, r) = wente_solve(&a, &b, bc)?;
            Ok(SweepRow {
                sample_id: sample,
                n: grid.n(),
                h: grid.h(),
                bc,
                norm_grad_a: r.norm_grad_a,
                norm_grad_b: r.norm_grad_b,
                ratio_sup: r.ratio_sup,
                ratio_grad: r.ratio_grad,
            })
        })
        .collect()
}
