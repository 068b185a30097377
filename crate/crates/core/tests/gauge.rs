use std::sync::Arc;

use conslab_core::Error;
use conslab_core::field_core::*;
use conslab_core::gauge::*;
use conslab_core::targets::{omega_sphere, stereo_sphere_map};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_omega(n: usize, lambda: f64) -> Connection {
    let g = make_grid(n, Domain::DiskMask).unwrap();
    omega_sphere(&stereo_sphere_map(&g, lambda, (0.0, 0.0)).unwrap()).unwrap()
}

fn random_antisym(g: &Arc<Grid>, rng: &mut ChaCha8Rng, scale: f64) -> MatField {
    let upper = (0..3)
        .map(|_| {
            let mut v = vec![0.0; g.len()];
            for &k in g.active() {
                v[k] = scale * rng.gen_range(-1.0..1.0);
            }
            ScalarField::new(g, v).unwrap()
        })
        .collect();
    MatField::antisym_from_upper(3, upper).unwrap()
}

#[test]
fn zero_connection_gives_identity_and_zero() {
    let g = make_grid(33, Domain::DiskMask).unwrap();
    let r = coulomb_gauge(&Connection::zeros(&g, 3), &GaugeOptions::default()).unwrap();
    let id = MatField::identity(&g, 3);
    for (a, b) in r.p.entries().iter().zip(id.entries()) {
        assert!(g.active().iter().all(|&k| (a.at(k) - b.at(k)).abs() <= 1e-12));
    }
    assert!(r.xi.entries().iter().all(|e| sup_norm(e) <= 1e-12));
    assert_eq!(r.ratio, None);
}

#[test]
fn divergence_free_connection_recovers_its_potential() {
    let g = make_grid(65, Domain::DiskMask).unwrap();
    let bumps: [fn(f64, f64) -> f64; 3] = [
        |x, y| 0.3 * (1.0 - x * x - y * y).powi(2),
        |x, y| 0.2 * x * (1.0 - x * x - y * y).powi(2),
        |x, y| -0.25 * (x + 2.0 * y) * y * (1.0 - x * x - y * y).powi(2),
    ];
    let xi0: Vec<ScalarField> = bumps
        .iter()
        .map(|f| {
            let mut v = vec![0.0; g.len()];
            for &k in g.interior() {
                if g.is_centered(k) {
                    let (x, y) = g.coords(k);
                    v[k] = f(x, y);
                }
            }
            ScalarField::new(&g, v).unwrap()
        })
        .collect();
    let omega = Connection::from_upper(3, xi0.iter().map(perp_grad).collect()).unwrap();
    let r = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
    for ((i, j), want) in [(0, 1), (0, 2), (1, 2)].into_iter().zip(&xi0) {
        let err = l2_norm(&r.xi.entry(i, j).sub(want).unwrap()) / l2_norm(want);
        assert!(err <= 1e-6, "({i},{j}): {err:e}");
    }
    assert!(r.residual <= 1e-6 * r.omega_norm);
}

#[test]
fn energy_gradient_matches_central_differences() {
    let omega = sphere_omega(17, 0.3);
    let g = omega.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = exp_antisym(&random_antisym(&g, &mut rng, 0.3)).unwrap();
    let grad = gauge_energy_gradient(&omega, &p).unwrap();
    let t = 1e-5;
    for _ in 0..5 {
        let eta = random_antisym(&g, &mut rng, 1.0);
        let analytic: f64 = grad
            .entries()
            .iter()
            .zip(eta.entries())
            .map(|(a, b)| g.active().iter().map(|&k| a.at(k) * b.at(k)).sum::<f64>())
            .sum();
        let at = |s: f64| {
            let step = MatField::antisym_from_upper(3, [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| eta.entry(i, j).scale(s)).collect()).unwrap();
            gauge_energy(&omega, &matmul(&p, &exp_antisym(&step).unwrap()).unwrap())
        };
        let fd = (at(t) - at(-t)) / (2.0 * t);
        let rel = (fd - analytic).abs() / analytic.abs();
        assert!(rel <= 1e-5, "fd {fd:e} analytic {analytic:e} rel {rel:e}");
    }
}

#[test]
fn sphere_gauge_passes_the_independent_check() {
    let omega = sphere_omega(33, 0.3);
    let r = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
    let c = verify_gauge(&omega, &r);
    assert!(c.all_pass(), "{c:?}");
    assert!((c.residual - r.residual).abs() <= 1e-12 * r.omega_norm);
    assert!(r.energy_out < r.energy_in);
    assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let (rot, sym) = rotate_connection(&omega, &r.p).unwrap();
    // The discrete product rule only holds to O(h²), so Pᵀ∇P keeps a small symmetric part.
    assert!(sym < 1e-2 * r.omega_norm);
    assert!((sym - r.sym_defect).abs() <= 1e-12 * r.omega_norm);
    assert!((connection_energy(&rot) - r.energy_out).abs() < 1e-12 * r.energy_in);
}

#[test]
fn large_energy_is_refused_unless_forced() {
    let omega = sphere_omega(17, 0.3);
    let strict = GaugeOptions { eps_threshold: 0.1, ..Default::default() };
    assert!(matches!(coulomb_gauge(&omega, &strict), Err(Error::EnergyTooLarge { .. })));
    assert!(coulomb_gauge(&omega, &GaugeOptions { force: true, ..strict }).is_ok());
}

#[test]
fn iteration_cap_is_reported() {
    let omega = sphere_omega(33, 0.3);
    let capped = GaugeOptions { max_iter: 1, ..Default::default() };
    match coulomb_gauge(&omega, &capped) {
        Err(Error::GaugeNotConverged(r)) => assert_eq!(r.iterations, 1),
        other => panic!("expected GaugeNotConverged, got {:?}", other.map(|r| r.iterations)),
    }
}

#[test]
fn rotate_connection_rejects_non_rotations() {
    let omega = sphere_omega(17, 0.3);
    let g = omega.grid();
    let p = MatField::general(3, (0..9).map(|e| ScalarField::constant(g, if e % 4 == 0 { 2.0 } else { 0.0 })).collect()).unwrap();
    assert!(matches!(rotate_connection(&omega, &p), Err(Error::NotRotation { .. })));
}
