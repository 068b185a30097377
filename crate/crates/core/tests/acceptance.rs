//! Acceptance run: one PASS/FAIL line per criterion; exits nonzero if any failed.
//!
//! `cargo test --release -p conslab-core --test acceptance`

use std::sync::Arc;
use std::time::{Duration, Instant};

use conslab_core::conslaw::*;
use conslab_core::convergence::fit_slope;
use conslab_core::field_core::*;
use conslab_core::frames::*;
use conslab_core::gauge::*;
use conslab_core::targets::*;
use conslab_core::wente::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};

const SIZES: [usize; 3] = [33, 65, 129];
const LAMBDAS: [f64; 3] = [0.1, 0.2, 0.3];

type Verdict = (bool, String);

fn disk(n: usize) -> Arc<Grid> {
    make_grid(n, Domain::DiskMask).unwrap()
}

fn hs() -> Vec<f64> {
    SIZES.iter().map(|&n| 2.0 / (n - 1) as f64).collect()
}

fn slope(rs: &[f64]) -> f64 {
    fit_slope(&hs(), rs).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// The λ = 0.3 harmonic fixture with its gauge and (A, B) on one grid.
struct Fixture {
    grid: Arc<Grid>,
    u: MapField,
    omega: Connection,
    ab: ABResult,
}

fn fixture(n: usize, lambda: f64) -> Fixture {
    let grid = disk(n);
    let u = stereo_sphere_map(&grid, lambda, (0.0, 0.0)).unwrap();
    let omega = omega_sphere(&u).unwrap();
    let gauge = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
    let ab = build_ab(&omega, &gauge, &FixedPointOptions::default()).unwrap();
    Fixture { grid, u, omega, ab }
}

fn wente_rows() -> Vec<SweepRow> {
    wente_sweep(Family::Random, &[129], 20, 7, WenteBc::Dirichlet).unwrap()
}

fn c1(rows: &[SweepRow], elapsed: Duration) -> Verdict {
    let worst = rows.iter().filter_map(|r| r.ratio_sup).fold(0.0, f64::max);
    let bound = SUP_CONSTANT * 1.1;
    let ok = rows.len() == 20 && rows.iter().all(|r| r.ratio_sup.is_some_and(|v| v <= bound)) && elapsed.as_secs() < 120;
    (ok, format!("max ratio_sup {worst:.4} <= {bound:.4} over {} pairs, sweep {:.1}s", rows.len(), elapsed.as_secs_f64()))
}

fn c2(rows: &[SweepRow]) -> Verdict {
    let worst = rows.iter().filter_map(|r| r.ratio_grad).fold(0.0, f64::max);
    let bound = grad_constant() * 1.1;
    (rows.iter().all(|r| r.ratio_grad.is_some_and(|v| v <= bound)), format!("max ratio_grad {worst:.4} <= {bound:.4}"))
}

fn dyadic(grid: &Arc<Grid>, raw: &[i32], offset: usize) -> ScalarField {
    let mut v = vec![0.0; grid.len()];
    for (i, &k) in grid.active().iter().enumerate() {
        v[k] = raw[(i + offset) % raw.len()] as f64 / 1024.0;
    }
    ScalarField::new(grid, v).unwrap()
}

fn identities_hold(n: usize, raw: &[i32], seed: u64) -> bool {
    let g = disk(n);
    let (a, b) = (dyadic(&g, raw, 0), dyadic(&g, raw, 37));
    let (dp, cg) = (div(&perp_grad(&a)), curl(&grad(&a)));
    let (ab, ba) = (jacobian(&a, &b).unwrap(), jacobian(&b, &a).unwrap());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut comps = vec![vec![0.0; g.len()]; 3];
    for &k in g.active() {
        let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..1.0)];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        for i in 0..3 {
            comps[i][k] = p[i] / r;
        }
    }
    let u = MapField::new(comps.into_iter().map(|v| ScalarField::new(&g, v).unwrap()).collect(), Constraint::UnitSphere).unwrap();
    let omega = omega_sphere(&u).unwrap();
    g.interior().iter().filter(|&&k| g.is_centered(k)).all(|&k| {
        let antisym = (0..3).all(|i| {
            (0..3).all(|j| {
                let (p, q) = (omega.value(i, j, k), omega.value(j, i, k));
                p == [-q[0], -q[1]]
            })
        });
        dp.at(k) == 0.0 && cg.at(k) == 0.0 && ab.at(k) == -ba.at(k) && antisym
    })
}

fn c3() -> Verdict {
    let mut runner = TestRunner::new(Config { cases: 100, failure_persistence: None, ..Config::default() });
    let strategy = (prop::sample::select(vec![17usize, 33, 65]), prop::collection::vec(-1024i32..=1024, 800), any::<u64>());
    let result = runner.run(&strategy, |(n, raw, seed)| {
        prop_assert!(identities_hold(n, &raw, seed));
        Ok(())
    });
    match result {
        Ok(()) => (true, "100 random cases, all identities exactly 0.0".into()),
        Err(e) => (false, e.to_string()),
    }
}

fn c4() -> Verdict {
    let rs: Vec<f64> = SIZES
        .iter()
        .map(|&n| shatah_residual(&stereo_sphere_map(&disk(n), 0.3, (0.0, 0.0)).unwrap()).unwrap().hminus1)
        .collect();
    let s = slope(&rs);
    (rs.windows(2).all(|w| w[1] < w[0]) && s >= 0.9, format!("H^-1 {}, slope {s:.2}", sci(&rs)))
}

fn c5(start: Instant) -> Verdict {
    let mut notes = Vec::new();
    let g = disk(33);
    let zero = coulomb_gauge(&Connection::zeros(&g, 3), &GaugeOptions::default()).unwrap();
    let id = MatField::identity(&g, 3);
    let zero_ok = g.active().iter().all(|&k| {
        zero.p.at(k).iter().zip(id.at(k)).all(|(a, b)| (a - b).abs() <= 1e-12) && zero.xi.at(k).iter().all(|v| v.abs() <= 1e-12)
    });
    notes.push(format!("zero {}", if zero_ok { "ok" } else { "bad" }));

    let g = disk(65);
    let bumps: [fn(f64, f64) -> f64; 3] =
        [|x, y| 0.3 * (1.0 - x * x - y * y).powi(2), |x, y| 0.2 * x * (1.0 - x * x - y * y).powi(2), |x, y| -0.25 * y * (1.0 - x * x - y * y).powi(2)];
    let xi0: Vec<ScalarField> = bumps
        .iter()
        .map(|f| {
            let mut v = vec![0.0; g.len()];
            for &k in g.interior().iter().filter(|&&k| g.is_centered(k)) {
                let (x, y) = g.coords(k);
                v[k] = f(x, y);
            }
            ScalarField::new(&g, v).unwrap()
        })
        .collect();
    let omega = Connection::from_upper(3, xi0.iter().map(perp_grad).collect()).unwrap();
    let r = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
    let xi_err = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .zip(&xi0)
        .map(|(&(i, j), w)| l2_norm(&r.xi.entry(i, j).sub(w).unwrap()) / l2_norm(w))
        .fold(0.0, f64::max);
    notes.push(format!("xi0 error {xi_err:.1e}"));

    let mut ratios = Vec::new();
    let mut residual = f64::NAN;
    for &lambda in &LAMBDAS {
        let u = stereo_sphere_map(&g, lambda, (0.0, 0.0)).unwrap();
        let omega = omega_sphere(&u).unwrap();
        let r = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
        ratios.push(r.ratio.unwrap_or(f64::NAN));
        if lambda == 0.3 {
            residual = r.residual / r.omega_norm;
        }
    }
    notes.push(format!("residual/|Omega| {residual:.2e}, ratios {ratios:.3?}"));
    let elapsed = start.elapsed();
    let ok = zero_ok && xi_err <= 1e-6 && residual <= 1e-3 && spread(&ratios) <= 3.0 && elapsed.as_secs() < 300;
    (ok, notes.join(", "))
}

fn c6() -> Verdict {
    let omega = omega_sphere(&stereo_sphere_map(&disk(17), 0.3, (0.0, 0.0)).unwrap()).unwrap();
    let g = omega.grid().clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let mut antisym = |scale: f64| {
        let upper = (0..3)
            .map(|_| {
                let mut v = vec![0.0; g.len()];
                for &k in g.active() {
                    v[k] = scale * rng.gen_range(-1.0..1.0);
                }
                ScalarField::new(&g, v).unwrap()
            })
            .collect();
        MatField::antisym_from_upper(3, upper).unwrap()
    };
    let p = exp_antisym(&antisym(0.3)).unwrap();
    let grad = gauge_energy_gradient(&omega, &p).unwrap();
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let eta = antisym(1.0);
        let analytic: f64 = grad.entries().iter().zip(eta.entries()).map(|(a, b)| g.active().iter().map(|&k| a.at(k) * b.at(k)).sum::<f64>()).sum();
        let at = |s: f64| {
            let step = MatField::antisym_from_upper(3, [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| eta.entry(i, j).scale(s)).collect()).unwrap();
            gauge_energy(&omega, &matmul(&p, &exp_antisym(&step).unwrap()).unwrap())
        };
        let fd = (at(t) - at(-t)) / (2.0 * t);
        worst = worst.max((fd - analytic).abs() / analytic.abs());
    }
    (worst <= 1e-5, format!("max relative error {worst:.1e} over 5 directions"))
}

fn c7(fx: &[Fixture]) -> Verdict {
    let g = disk(33);
    let omega = Connection::zeros(&g, 3);
    let gauge = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
    let ab = build_ab(&omega, &gauge, &FixedPointOptions::default()).unwrap();
    let exact = g.active().iter().all(|&k| {
        (0..3).all(|i| (0..3).all(|j| ab.a.entry(i, j).at(k) == if i == j { 1.0 } else { 0.0 } && ab.b.entry(i, j).at(k) == 0.0))
    });
    let rel: Vec<f64> = fx.iter().map(|f| gauge_relation_residual(&f.ab.a, &f.ab.b, &f.omega).unwrap() / connection_norm(&f.omega)).collect();
    let geometric = fx.iter().all(|f| f.ab.trace.windows(2).all(|w| w[1] < 0.5 * w[0]));
    let mean = fx.iter().map(|f| f.ab.a_hat_mean).fold(0.0, f64::max);
    let ok = exact && geometric && mean <= 1e-10 && rel[1] <= 1e-3 && rel.windows(2).all(|w| w[1] < w[0]);
    let sweeps: Vec<usize> = fx.iter().map(|f| f.ab.fp_iters).collect();
    (ok, format!("Omega=0 exact {exact}, sweeps {sweeps:?}, mean(A_hat) {mean:.1e}, relation {}", sci(&rel)))
}

fn c8(fx: &[Fixture]) -> Verdict {
    let rs: Vec<f64> = fx.iter().map(|f| conservation_residual(&f.u, &f.ab.a, &f.ab.b).unwrap().hminus1).collect();
    let last = fx.last().unwrap();
    let doubled = MatField::general(3, last.ab.b.entries().iter().map(|e| e.scale(2.0)).collect()).unwrap();
    let scrambled = conservation_residual(&last.u, &last.ab.a, &doubled).unwrap().hminus1;
    let s = slope(&rs);
    let ok = s >= 0.9 && rs.windows(2).all(|w| w[1] < w[0]) && scrambled > 10.0 * rs[2];
    (ok, format!("H^-1 {}, slope {s:.2}, scrambled B {scrambled:.2e}", sci(&rs)))
}

fn c9() -> Verdict {
    let hc = 2.0;
    let (mut antisym, mut apply, mut rs) = (0.0f64, 0.0f64, Vec::new());
    for &n in &SIZES {
        let g = disk(n);
        let u = cmc_cap_map(&g, hc, 0.5).unwrap();
        let omega = omega_mean_curvature(&u, &|_| hc).unwrap();
        let (applied, w) = (connection_apply(&omega, &u).unwrap(), wedge(&u).unwrap());
        for &k in g.interior() {
            for i in 0..3 {
                apply = apply.max((applied.comp(i).at(k) + 2.0 * hc * w.comp(i).at(k)).abs());
                for j in 0..3 {
                    let (p, q) = (omega.value(i, j, k), omega.value(j, i, k));
                    antisym = antisym.max((p[0] + q[0]).abs()).max((p[1] + q[1]).abs());
                }
            }
        }
        rs.push(residual_norms(&cmc_defect(&u, hc).unwrap()).unwrap().l2);
    }
    let s = slope(&rs);
    (antisym == 0.0 && apply <= 1e-10 && s >= 1.9, format!("antisymmetry {antisym:e}, apply {apply:.1e}, residual slope {s:.2}"))
}

fn c10() -> Verdict {
    let (mut valid, mut bounds, mut slopes, mut cs) = (true, true, Vec::new(), Vec::new());
    let mut c_stable = true;
    for &lambda in &LAMBDAS {
        let (mut r1, mut r2, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for &n in &SIZES {
            let g = disk(n);
            let u = stereo_sphere_map(&g, lambda, (0.0, 0.0)).unwrap();
            let f = coulomb_frame(&u, &FrameOptions::default()).unwrap();
            valid &= check_frame(&u, &f, &|y| y.to_vec()).passes();
            let a = solve_a(&f).unwrap();
            bounds &= potential_bounds(&f, &a).holds();
            let (p, q) = frame_conservation_residual(&u, &f, &a).unwrap();
            r1.push(p);
            r2.push(q);
            c.push(second_derivative_report(&u, &f).ratio.unwrap_or(f64::NAN));
        }
        slopes.push(slope(&r1));
        slopes.push(slope(&r2));
        c_stable &= spread(&c) <= 3.0;
        cs.push(c[2]);
    }
    let min_slope = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = valid && bounds && min_slope >= 0.9 && c_stable && spread(&cs) <= 3.0;
    (ok, format!("frames valid {valid}, bounds {bounds}, min slope {min_slope:.2}, C {cs:.3?}"))
}

fn c11(fx: &[Fixture]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut fixtures = vec![&fx[1]];
    let extra = fixture(65, 0.1);
    fixtures.push(&extra);
    for f in fixtures {
        let reg = regularity_demo(&f.u, &f.ab.a, &f.ab.b).unwrap();
        let scale = flux_norm(&f.u, &f.ab.a, &MatField::zeros(&f.grid, 3, MatVariant::General));
        worst = worst.max(reg.rem_norm / scale);
    }
    (worst <= 1e-6, format!("max relative remainder {worst:.1e} at n = 65"))
}

fn main() {
    let total = Instant::now();
    let mut results: Vec<(usize, Verdict, Duration)> = Vec::new();
    let mut timed = |id: usize, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let d = t.elapsed();
        println!("criterion {id:>2}: {} ({:.1}s) {}", if v.0 { "PASS" } else { "FAIL" }, d.as_secs_f64(), v.1);
        results.push((id, v, d));
    };

    let t = Instant::now();
    let rows = wente_rows();
    let wente_time = t.elapsed();
    timed(1, &mut || c1(&rows, wente_time));
    timed(2, &mut || c2(&rows));
    timed(3, &mut c3);
    timed(4, &mut c4);
    timed(5, &mut || c5(Instant::now()));
    timed(6, &mut c6);
    let fx: Vec<Fixture> = SIZES.iter().map(|&n| fixture(n, 0.3)).collect();
    timed(7, &mut || c7(&fx));
    timed(8, &mut || c8(&fx));
    timed(9, &mut c9);
    timed(10, &mut c10);
    timed(11, &mut || c11(&fx));
    let elapsed = total.elapsed();
    timed(12, &mut || (elapsed.as_secs() < 1200, format!("criteria 1-11 took {:.1}s (limit 1200s)", elapsed.as_secs_f64())));

    let failed: Vec<usize> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", results.len());
}
