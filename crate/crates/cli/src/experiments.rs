//! The named experiments. Each returns its CSV tables and the checks
//! evaluated against the configured bounds.

use rayon::prelude::*;

use conslab_core::conslaw::{
    build_ab, conservation_residual, gauge_relation_residual, pde_certificate, regularity_demo, shatah_residual,
};
use conslab_core::convergence::{fit_slope, pair_slope};
use conslab_core::field_core::{connection_apply, make_grid, Connection, Domain, Grid, MatField, MapField};
use conslab_core::frames::{
    check_frame, coulomb_frame, coulomb_frame_with_normal, frame_conservation_residual, potential_bounds,
    second_derivative_report, solve_a, FrameOptions,
};
use conslab_core::gauge::{coulomb_gauge, verify_gauge};
use conslab_core::targets::{
    cmc_cap_map, cmc_defect, cylinder_normal, omega_mean_curvature, residual_norms, residual_pde, wedge,
    GeometryKind, GeometrySpec,
};
use conslab_core::wente::{grad_constant, wente_sweep, SUP_CONSTANT};

use crate::config::{Config, Experiment};
use crate::output::{num, opt, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_experiment(e: Experiment, cfg: &Config) -> anyhow::Result<Report> {
    let (tables, checks) = match e {
        Experiment::Wente => wente(cfg)?,
        Experiment::Gauge => gauge(cfg)?,
        Experiment::Conslaw => conslaw(cfg)?,
        Experiment::Frames => frames(cfg)?,
        Experiment::Heinz => heinz(cfg)?,
        Experiment::Convergence => convergence(cfg)?,
    };
    Ok(Report { experiment: e, tables, checks })
}

type Output = (Vec<Table>, Vec<Check>);

fn disk(n: usize) -> anyhow::Result<std::sync::Arc<Grid>> {
    Ok(make_grid(n, Domain::DiskMask)?)
}

/// Refinement slope: least squares over three or more sizes, the single
/// pairwise slope over two, nothing over one.
fn slope(hs: &[f64], rs: &[f64]) -> Option<anyhow::Result<f64>> {
    match hs.len() {
        0 | 1 => None,
        2 if rs.iter().all(|r| *r > 0.0) => Some(Ok(pair_slope(hs[0], rs[0], hs[1], rs[1]))),
        2 => Some(Err(anyhow::anyhow!("non-positive residual"))),
        _ => Some(fit_slope(hs, rs).map(|f| f.slope).map_err(Into::into)),
    }
}

fn slope_check(name: &str, hs: &[f64], rs: &[f64], min: f64) -> Option<Check> {
    slope(hs, rs).map(|s| match s {
        Ok(p) => Check::new(format!("{name} slope >= {min}"), p >= min, format!("slope {p:.3}")),
        Err(e) => Check::new(format!("{name} slope >= {min}"), false, e.to_string()),
    })
}

fn decreasing(rs: &[f64]) -> bool {
    rs.windows(2).all(|w| w[1] < w[0])
}

fn spread(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn jobs(cfg: &Config) -> Vec<(f64, usize)> {
    cfg.lambdas.iter().flat_map(|&l| cfg.grid_sizes.iter().map(move |&n| (l, n))).collect()
}

fn fixture(cfg: &Config, lambda: f64, grid: &std::sync::Arc<Grid>) -> anyhow::Result<(MapField, Connection)> {
    let spec = GeometrySpec { lambda, ..cfg.geometry };
    let u = spec.map(grid)?;
    let omega = spec.omega(&u)?;
    Ok((u, omega))
}

fn wente(cfg: &Config) -> anyhow::Result<Output> {
    let rows = wente_sweep(cfg.family, &cfg.grid_sizes, cfg.samples, cfg.seed, cfg.bc)?;
    let mut t = Table::new(
        "wente.csv",
        &["sample_id", "n", "h", "bc", "norm_grad_a", "norm_grad_b", "ratio_sup", "ratio_grad"],
    );
    for r in &rows {
        t.push(vec![
            r.sample_id.to_string(),
            r.n.to_string(),
            num(r.h),
            r.bc.as_str().to_string(),
            num(r.norm_grad_a),
            num(r.norm_grad_b),
            opt(r.ratio_sup),
            opt(r.ratio_grad),
        ]);
    }
    let slack = 1.0 + cfg.bounds.bound_slack;
    let max_sup = rows.iter().filter_map(|r| r.ratio_sup).fold(0.0, f64::max);
    let max_grad = rows.iter().filter_map(|r| r.ratio_grad).fold(0.0, f64::max);
    let (bs, bg) = (SUP_CONSTANT * slack, grad_constant() * slack);
    let checks = vec![
        Check::new(format!("ratio_sup <= {bs:.4}"), max_sup <= bs, format!("max {max_sup:.4}")),
        Check::new(format!("ratio_grad <= {bg:.4}"), max_grad <= bg, format!("max {max_grad:.4}")),
    ];
    Ok((vec![t], checks))
}

struct GaugeRow {
    lambda: f64,
    n: usize,
    h: f64,
    rel: f64,
    ratio: Option<f64>,
    verified: bool,
    row: Vec<String>,
    trace: Vec<f64>,
}

fn gauge(cfg: &Config) -> anyhow::Result<Output> {
    let runs: Vec<GaugeRow> = jobs(cfg)
        .par_iter()
        .map(|&(lambda, n)| {
            let grid = disk(n)?;
            let (_, omega) = fixture(cfg, lambda, &grid)?;
            let r = coulomb_gauge(&omega, &cfg.gauge)?;
            let check = verify_gauge(&omega, &r);
            let rel = if r.omega_norm > 0.0 { r.residual / r.omega_norm } else { r.residual };
            let row = vec![
                num(lambda),
                n.to_string(),
                num(grid.h()),
                r.iterations.to_string(),
                num(r.energy_in),
                num(r.energy_out),
                num(r.stationarity),
                num(r.sym_defect),
                num(r.residual),
                num(rel),
                opt(r.ratio),
                check.all_pass().to_string(),
            ];
            Ok(GaugeRow { lambda, n, h: grid.h(), rel, ratio: r.ratio, verified: check.all_pass(), row, trace: r.energy_trace })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut t = Table::new(
        "gauge.csv",
        &[
            "lambda", "n", "h", "iterations", "energy_in", "energy_out", "stationarity", "sym_defect", "residual",
            "residual_rel", "ratio", "verified",
        ],
    );
    let mut trace = Table::new("gauge_trace.csv", &["lambda", "n", "iteration", "energy"]);
    for r in &runs {
        t.push(r.row.clone());
        for (i, e) in r.trace.iter().enumerate() {
            trace.push(vec![num(r.lambda), r.n.to_string(), i.to_string(), num(*e)]);
        }
    }

    let b = &cfg.bounds;
    let mut checks = vec![Check::new(
        "gauge certificates (rotation, det, xi boundary, energy)",
        runs.iter().all(|r| r.verified),
        format!("{} runs", runs.len()),
    )];
    let finest: Vec<&GaugeRow> = per_lambda(&runs, |r| r.lambda).into_iter().filter_map(|g| g.last().copied()).collect();
    for group in per_lambda(&runs, |r| r.lambda) {
        let last = group[group.len() - 1];
        checks.push(Check::new(
            format!("lambda={}: residual/|Omega| at n={} <= {:e}", last.lambda, last.n, b.residual_max),
            last.rel <= b.residual_max,
            format!("{:.3e}", last.rel),
        ));
        if group.len() > 1 {
            let rels: Vec<f64> = group.iter().map(|r| r.rel).collect();
            checks.push(Check::new(
                format!("lambda={}: residual decreases under refinement", last.lambda),
                decreasing(&rels),
                format!("h {:.4} to {:.4}", group[0].h, last.h),
            ));
        }
    }
    let ratios: Vec<f64> = finest.iter().filter_map(|r| r.ratio).collect();
    if ratios.len() > 1 {
        let s = spread(&ratios);
        checks.push(Check::new(
            format!("gauge ratio spread across lambda <= {}", b.c_spread_max),
            s <= b.c_spread_max,
            format!("max/min {s:.3}"),
        ));
    }
    Ok((vec![t, trace], checks))
}

/// Groups consecutive runs sharing a lambda; runs are ordered by lambda,
/// then by grid size.
fn per_lambda<T>(runs: &[T], key: impl Fn(&T) -> f64) -> Vec<Vec<&T>> {
    let mut groups: Vec<Vec<&T>> = Vec::new();
    for r in runs {
        match groups.last_mut() {
            Some(g) if key(g[0]) == key(r) => g.push(r),
            _ => groups.push(vec![r]),
        }
    }
    groups
}

struct ConsRow {
    lambda: f64,
    n: usize,
    h: f64,
    monotone: bool,
    a_hat_mean: f64,
    relation: f64,
    cons: f64,
    scrambled: f64,
    reconstruction: f64,
    certificate: bool,
    row: Vec<String>,
    trace: Vec<f64>,
}

fn conslaw(cfg: &Config) -> anyhow::Result<Output> {
    let runs: Vec<ConsRow> = jobs(cfg)
        .par_iter()
        .map(|&(lambda, n)| {
            let grid = disk(n)?;
            let (u, omega) = fixture(cfg, lambda, &grid)?;
            let g = coulomb_gauge(&omega, &cfg.gauge)?;
            let ab = build_ab(&omega, &g, &cfg.fixed_point)?;
            let norm = g.omega_norm;
            let relation = gauge_relation_residual(&ab.a, &ab.b, &omega)? / if norm > 0.0 { norm } else { 1.0 };
            let cons = conservation_residual(&u, &ab.a, &ab.b)?;
            let doubled = MatField::general(u.m(), ab.b.entries().iter().map(|e| e.scale(2.0)).collect())?;
            let scrambled = conservation_residual(&u, &ab.a, &doubled)?.hminus1;
            let reg = regularity_demo(&u, &ab.a, &ab.b)?;
            let cert = pde_certificate(&u, &omega, &ab.a, &ab.b)?;
            let h = grid.h();
            let row = vec![
                num(lambda),
                n.to_string(),
                num(h),
                ab.fp_iters.to_string(),
                num(ab.fp_residual),
                num(ab.a_hat_mean),
                num(relation),
                num(cons.l2),
                num(cons.hminus1),
                num(scrambled),
                num(ab.dist_so),
                num(ab.min_singular),
                opt(ab.bound_ratios.grad),
                num(reg.rem_norm),
                num(reg.reconstruction_error),
                num(cert.lhs),
                num(cert.bound()),
            ];
            Ok(ConsRow {
                lambda,
                n,
                h,
                monotone: ab.trace.windows(2).all(|w| w[1] <= w[0]),
                a_hat_mean: ab.a_hat_mean,
                relation,
                cons: cons.hminus1,
                scrambled,
                reconstruction: reg.reconstruction_error,
                certificate: cert.holds(h * h),
                row,
                trace: ab.trace,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut t = Table::new(
        "conslaw.csv",
        &[
            "lambda", "n", "h", "fp_iters", "fp_residual", "a_hat_mean", "gauge_relation_rel", "cons_l2",
            "cons_hminus1", "scrambled_hminus1", "dist_so", "min_singular", "grad_ratio", "rem_norm",
            "reconstruction_error", "pde_lhs", "pde_bound",
        ],
    );
    let mut trace = Table::new("conslaw_trace.csv", &["lambda", "n", "sweep", "update"]);
    for r in &runs {
        t.push(r.row.clone());
        for (i, u) in r.trace.iter().enumerate() {
            trace.push(vec![num(r.lambda), r.n.to_string(), (i + 1).to_string(), num(*u)]);
        }
    }

    let b = &cfg.bounds;
    let mut checks = vec![
        Check::new(
            "fixed-point trace decreasing",
            runs.iter().all(|r| r.monotone),
            format!("{} runs", runs.len()),
        ),
        Check::new(
            "mean of A_hat vanishes to 1e-10",
            runs.iter().all(|r| r.a_hat_mean <= 1e-10),
            format!("max {:.2e}", runs.iter().map(|r| r.a_hat_mean).fold(0.0, f64::max)),
        ),
        Check::new(
            format!("Hodge reconstruction error <= {:e}", b.reconstruction_max),
            runs.iter().all(|r| r.reconstruction <= b.reconstruction_max),
            format!("max {:.2e}", runs.iter().map(|r| r.reconstruction).fold(0.0, f64::max)),
        ),
        Check::new(
            "A(Lu + Omega.grad u) bounded by the two residuals",
            runs.iter().all(|r| r.certificate),
            format!("{} runs", runs.len()),
        ),
    ];
    for group in per_lambda(&runs, |r| r.lambda) {
        let last = group[group.len() - 1];
        let lam = last.lambda;
        checks.push(Check::new(
            format!("lambda={lam}: gauge relation at n={} <= {:e}", last.n, b.residual_max),
            last.relation <= b.residual_max,
            format!("{:.3e}", last.relation),
        ));
        let hs: Vec<f64> = group.iter().map(|r| r.h).collect();
        if group.len() > 1 {
            let rel: Vec<f64> = group.iter().map(|r| r.relation).collect();
            checks.push(Check::new(format!("lambda={lam}: gauge relation decreases"), decreasing(&rel), ""));
        }
        let cons: Vec<f64> = group.iter().map(|r| r.cons).collect();
        checks.extend(slope_check(&format!("lambda={lam}: conservation H^-1"), &hs, &cons, b.min_slope));
        checks.push(Check::new(
            format!("lambda={lam}: scrambled B stays away from 0"),
            last.scrambled > 10.0 * last.cons,
            format!("{:.3e} vs {:.3e}", last.scrambled, last.cons),
        ));
    }
    Ok((vec![t, trace], checks))
}

struct FrameRow {
    lambda: f64,
    h: f64,
    valid: bool,
    bounds: bool,
    r: (f64, f64),
    scrambled: (f64, f64),
    c: Option<f64>,
    row: Vec<String>,
}

fn frames(cfg: &Config) -> anyhow::Result<Output> {
    let hyper = cfg.geometry.kind == GeometryKind::Hypersurface;
    let normal = move |y: &[f64]| if hyper { cylinder_normal(y) } else { y.to_vec() };
    let opts = FrameOptions::default();
    let runs: Vec<FrameRow> = jobs(cfg)
        .par_iter()
        .map(|&(lambda, n)| {
            let grid = disk(n)?;
            let u = GeometrySpec { lambda, ..cfg.geometry }.map(&grid)?;
            let frame = if hyper {
                coulomb_frame_with_normal(&u, &cylinder_normal, &opts)?
            } else {
                coulomb_frame(&u, &opts)?
            };
            let check = check_frame(&u, &frame, &normal);
            let a = solve_a(&frame)?;
            let pb = potential_bounds(&frame, &a);
            let r = frame_conservation_residual(&u, &frame, &a)?;
            let s = frame_conservation_residual(&u, &frame, &a.scale(2.0))?;
            let sd = second_derivative_report(&u, &frame);
            let row = vec![
                num(lambda),
                n.to_string(),
                num(grid.h()),
                frame.iterations.to_string(),
                num(frame.coulomb_residual),
                num(check.orthonormal),
                num(check.tangency),
                num(pb.sup),
                num(pb.sup_bound),
                num(pb.grad),
                num(pb.grad_bound),
                num(r.0),
                num(r.1),
                num(s.0),
                num(s.1),
                num(sd.lhs),
                num(sd.rhs),
                opt(sd.ratio),
            ];
            Ok(FrameRow {
                lambda,
                h: grid.h(),
                valid: check.passes(),
                bounds: pb.holds(),
                r,
                scrambled: s,
                c: sd.ratio,
                row,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut t = Table::new(
        "frames.csv",
        &[
            "lambda", "n", "h", "iterations", "coulomb_residual", "orthonormal_defect", "tangency_defect", "sup_a",
            "sup_bound", "grad_a", "grad_bound", "r1", "r2", "scrambled_r1", "scrambled_r2", "hessian_l1",
            "rhs", "empirical_c",
        ],
    );
    for r in &runs {
        t.push(r.row.clone());
    }
    let b = &cfg.bounds;
    let mut checks = vec![
        Check::new("frame orthonormality and tangency", runs.iter().all(|r| r.valid), format!("{} runs", runs.len())),
        Check::new("potential a within the Wente bounds", runs.iter().all(|r| r.bounds), format!("{} runs", runs.len())),
    ];
    let mut finest_c = Vec::new();
    for group in per_lambda(&runs, |r| r.lambda) {
        let last = group[group.len() - 1];
        let lam = last.lambda;
        let hs: Vec<f64> = group.iter().map(|r| r.h).collect();
        let r1: Vec<f64> = group.iter().map(|r| r.r.0).collect();
        let r2: Vec<f64> = group.iter().map(|r| r.r.1).collect();
        checks.extend(slope_check(&format!("lambda={lam}: first cosh/sinh law"), &hs, &r1, b.min_slope));
        checks.extend(slope_check(&format!("lambda={lam}: second cosh/sinh law"), &hs, &r2, b.min_slope));
        let (s, r) = (last.scrambled.0.min(last.scrambled.1), last.r.0.max(last.r.1));
        checks.push(Check::new(
            format!("lambda={lam}: scrambled potential stays away from 0"),
            s > 10.0 * r,
            format!("{s:.3e} vs {r:.3e}"),
        ));
        let cs: Vec<f64> = group.iter().filter_map(|r| r.c).collect();
        if cs.len() > 1 {
            let sp = spread(&cs);
            checks.push(Check::new(
                format!("lambda={lam}: empirical C stable under refinement within 20%"),
                sp <= 1.2,
                format!("max/min {sp:.3}"),
            ));
        }
        finest_c.extend(last.c);
    }
    if finest_c.len() > 1 {
        let sp = spread(&finest_c);
        checks.push(Check::new(
            format!("empirical C spread across lambda <= {}", b.c_spread_max),
            sp <= b.c_spread_max,
            format!("max/min {sp:.3}"),
        ));
    }
    Ok((vec![t], checks))
}

fn heinz(cfg: &Config) -> anyhow::Result<Output> {
    let (hc, lambda) = (cfg.geometry.h_const, cfg.geometry.lambda);
    let runs: Vec<(f64, f64, f64, f64, f64)> = cfg
        .grid_sizes
        .par_iter()
        .map(|&n| {
            let grid = disk(n)?;
            let u = cmc_cap_map(&grid, hc, lambda)?;
            let omega = omega_mean_curvature(&u, &|_| hc)?;
            let m = u.m();
            let mut antisym: f64 = 0.0;
            for &k in grid.interior() {
                for i in 0..m {
                    for j in 0..m {
                        let ([a, b], [c, d]) = (omega.value(i, j, k), omega.value(j, i, k));
                        antisym = antisym.max((a + c).abs()).max((b + d).abs());
                    }
                }
            }
            let applied = connection_apply(&omega, &u)?;
            let w = wedge(&u)?;
            let mut apply: f64 = 0.0;
            for &k in grid.interior() {
                for i in 0..m {
                    apply = apply.max((applied.comp(i).at(k) + 2.0 * hc * w.comp(i).at(k)).abs());
                }
            }
            let res = residual_norms(&cmc_defect(&u, hc)?)?;
            Ok((grid.h(), antisym, apply, res.l2, res.hminus1))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut t = Table::new(
        "heinz.csv",
        &["n", "h", "h_const", "lambda", "antisym_defect", "apply_defect", "residual_l2", "residual_hminus1"],
    );
    for (&n, r) in cfg.grid_sizes.iter().zip(&runs) {
        t.push(vec![n.to_string(), num(r.0), num(hc), num(lambda), num(r.1), num(r.2), num(r.3), num(r.4)]);
    }
    let antisym = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let apply = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let mut checks = vec![
        Check::new("Omega exactly antisymmetric", antisym == 0.0, format!("max {antisym:e}")),
        Check::new("Omega.grad u = -2H u_x ^ u_y to 1e-10", apply <= 1e-10, format!("max {apply:.2e}")),
    ];
    let hs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let rs: Vec<f64> = runs.iter().map(|r| r.3).collect();
    checks.extend(slope_check("mean curvature residual", &hs, &rs, cfg.bounds.min_slope));
    Ok((vec![t], checks))
}

fn convergence(cfg: &Config) -> anyhow::Result<Output> {
    let sphere = cfg.geometry.map(&disk(17)?)?.constraint() == conslab_core::field_core::Constraint::UnitSphere;
    let runs: Vec<Vec<(&'static str, f64)>> = cfg
        .grid_sizes
        .par_iter()
        .map(|&n| {
            let grid = disk(n)?;
            let (u, omega) = fixture(cfg, cfg.geometry.lambda, &grid)?;
            let mut out = vec![("pde_hminus1", residual_pde(&u, &omega)?.hminus1)];
            let g = coulomb_gauge(&omega, &cfg.gauge)?;
            let ab = build_ab(&omega, &g, &cfg.fixed_point)?;
            out.push(("gauge_relation", gauge_relation_residual(&ab.a, &ab.b, &omega)?));
            out.push(("conservation_hminus1", conservation_residual(&u, &ab.a, &ab.b)?.hminus1));
            if sphere {
                out.push(("shatah_hminus1", shatah_residual(&u)?.hminus1));
            }
            Ok(out)
        })
        .collect::<anyhow::Result<_>>()?;
    let hs: Vec<f64> = cfg.grid_sizes.iter().map(|&n| 2.0 / (n - 1) as f64).collect();
    let mut t = Table::new("convergence.csv", &["quantity", "n", "h", "residual"]);
    let mut s = Table::new("convergence_slopes.csv", &["quantity", "kind", "from_n", "to_n", "slope"]);
    let mut checks = Vec::new();
    for (q, &(name, _)) in runs[0].iter().enumerate() {
        let rs: Vec<f64> = runs.iter().map(|r| r[q].1).collect();
        for (i, (&n, &r)) in cfg.grid_sizes.iter().zip(&rs).enumerate() {
            t.push(vec![name.to_string(), n.to_string(), num(hs[i]), num(r)]);
        }
        let (first, last) = (cfg.grid_sizes[0], cfg.grid_sizes[cfg.grid_sizes.len() - 1]);
        match fit_slope(&hs, &rs) {
            Ok(fit) => {
                s.push(vec![name.to_string(), "fit".into(), first.to_string(), last.to_string(), num(fit.slope)]);
                for (i, p) in fit.pairwise.iter().enumerate() {
                    let (a, b) = (cfg.grid_sizes[i], cfg.grid_sizes[i + 1]);
                    s.push(vec![name.to_string(), "pair".into(), a.to_string(), b.to_string(), num(*p)]);
                }
                checks.push(Check::new(
                    format!("{name} slope >= {}", cfg.bounds.min_slope),
                    fit.passes(cfg.bounds.min_slope),
                    format!("slope {:.3}", fit.slope),
                ));
            }
            Err(e) => checks.push(Check::new(format!("{name} slope"), false, e.to_string())),
        }
    }
    Ok((vec![t, s], checks))
}
