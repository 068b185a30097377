use std::sync::Arc;

use conslab_core::convergence::fit_slope;
use conslab_core::field_core::*;
use conslab_core::frames::*;
use conslab_core::targets::*;
use conslab_core::Error;

fn disk(n: usize) -> Arc<Grid> {
    make_grid(n, Domain::DiskMask).unwrap()
}

#[test]
fn pde_and_harmonic_defects_differ_by_the_tangency_term() {
    let g = disk(33);
    let u = stereo_sphere_map(&g, 0.3, (0.1, -0.2)).unwrap();
    let omega = omega_sphere(&u).unwrap();
    let (hd, pd) = (harmonic_defect(&u).unwrap(), pde_defect(&u, &omega).unwrap());
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    for &k in g.interior() {
        let t: [f64; 2] = [0, 1].map(|d| (0..3).map(|j| u.comp(j).at(k) * gu[j].at(k)[d]).sum());
        for i in 0..3 {
            let [gx, gy] = gu[i].at(k);
            let want = gx * t[0] + gy * t[1];
            assert!((hd[i].at(k) - pd[i].at(k) - want).abs() < 1e-12, "node {k}");
        }
    }
    assert!(tangency_defect(&u) > 0.0);
}

#[test]
fn general_lagrangian_reproduces_the_special_connections() {
    let g = disk(33);
    let u = stereo_sphere_map(&g, 0.4, (0.0, 0.0)).unwrap();
    let (a, b) = (omega_sphere(&u).unwrap(), omega_general(&u, &RoundSphere).unwrap());
    let cap = cmc_cap_map(&g, 2.0, 0.5).unwrap();
    let (c, d) = (omega_mean_curvature(&cap, &|_| 2.0).unwrap(), omega_general(&cap, &ConstantMeanCurvature { h: 2.0 }).unwrap());
    for &k in g.interior() {
        for i in 0..3 {
            for j in 0..3 {
                for (p, q) in [(a.value(i, j, k), b.value(i, j, k)), (c.value(i, j, k), d.value(i, j, k))] {
                    assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn mean_curvature_connection_applies_to_the_wedge() {
    let g = disk(65);
    let h = 2.0;
    let u = cmc_cap_map(&g, h, 0.5).unwrap();
    let omega = omega_mean_curvature(&u, &|_| h).unwrap();
    let (applied, w) = (connection_apply(&omega, &u).unwrap(), wedge(&u).unwrap());
    for &k in g.interior() {
        for i in 0..3 {
            assert_eq!(omega.value(i, i, k), [0.0, 0.0]);
            assert!((applied.comp(i).at(k) + 2.0 * h * w.comp(i).at(k)).abs() <= 1e-10);
        }
    }
}

#[test]
fn fixture_residuals_converge() {
    let sizes = [33, 65, 129];
    let hs: Vec<f64> = sizes.iter().map(|&n| 2.0 / (n - 1) as f64).collect();
    let mut cmc = Vec::new();
    let mut cyl = Vec::new();
    for &n in &sizes {
        let g = disk(n);
        let cap = cmc_cap_map(&g, 2.0, 0.5).unwrap();
        cmc.push(residual_norms(&cmc_defect(&cap, 2.0).unwrap()).unwrap().l2);
        let u = cylinder_map(&g, 0.8).unwrap();
        cyl.push(residual_pde(&u, &omega_hypersurface(&u, &cylinder_normal).unwrap()).unwrap().hminus1);
    }
    assert!(fit_slope(&hs, &cmc).unwrap().slope >= 1.9, "{cmc:?}");
    // Centered differences of (cos ax, sin ax) reproduce the wide-stencil
    // Laplacian exactly, so the cylinder map solves the discrete system.
    assert!(cyl.iter().all(|&r| r <= 1e-12), "{cyl:?}");
}

#[test]
fn bad_geometry_data_is_rejected() {
    let g = disk(17);
    let u = cylinder_map(&g, 0.8).unwrap();
    let long = |y: &[f64]| y.iter().map(|v| 2.0 * v).collect::<Vec<_>>();
    assert!(matches!(omega_hypersurface(&u, &long), Err(Error::NonUnitNormal { .. })));
    assert!(matches!(omega_sphere(&u), Err(Error::ConstraintMissing)));

    struct Broken;
    impl LagrangianGeometry for Broken {
        fn second_form(&self, _: &[f64], _: &mut [f64]) -> Result<(), String> {
            Err("no data".into())
        }
        fn torsion(&self, _: &[f64], _: &mut [f64]) -> Result<(), String> {
            Ok(())
        }
    }
    assert!(matches!(omega_general(&u, &Broken), Err(Error::Callback { .. })));
    assert!(GeometrySpec { kind: GeometryKind::MeanCurvature, ..GeometrySpec::sphere(0.3) }.validate().is_err());
}

fn rotated(e1: &MapField, e2: &MapField, theta: &ScalarField) -> (MapField, MapField) {
    let g = e1.grid();
    let mk = |sign: f64, a: &MapField, b: &MapField| {
        let comps = (0..3)
            .map(|i| {
                let mut v = vec![0.0; g.len()];
                for &k in g.active() {
                    let (s, c) = theta.at(k).sin_cos();
                    v[k] = c * a.comp(i).at(k) + sign * s * b.comp(i).at(k);
                }
                ScalarField::new(g, v).unwrap()
            })
            .collect();
        MapField::new(comps, Constraint::None).unwrap()
    };
    (mk(1.0, e1, e2), mk(-1.0, e2, e1))
}

#[test]
fn rotating_a_frame_shifts_its_connection_by_the_gradient_to_second_order() {
    let mut defects = Vec::new();
    for n in [33, 65, 129] {
        let g = disk(n);
        let u = stereo_sphere_map(&g, 0.3, (0.0, 0.0)).unwrap();
        let f = coulomb_frame(&u, &FrameOptions::default()).unwrap();
        let theta = ScalarField::from_fn(&g, |x, y| 0.7 * x * y + (2.0 * y).sin());
        let (r1, r2) = rotated(&f.e1, &f.e2, &theta);
        let want = frame_connection(&f.e1, &f.e2).axpy(1.0, &grad(&theta)).unwrap();
        defects.push(l2_norm_vec(&frame_connection(&r1, &r2).sub(&want).unwrap()));
    }
    let hs = [2.0 / 32.0, 2.0 / 64.0, 2.0 / 128.0];
    assert!(fit_slope(&hs, &defects).unwrap().slope >= 1.8, "{defects:?}");
}

#[test]
fn sphere_frame_is_valid_and_idempotent() {
    let g = disk(65);
    let u = stereo_sphere_map(&g, 0.3, (0.0, 0.0)).unwrap();
    let opts = FrameOptions::default();
    let f = coulomb_frame(&u, &opts).unwrap();
    assert!(check_frame(&u, &f, &|y| y.to_vec()).passes());
    let again = coulombize(&f.e1, &f.e2, &opts).unwrap();
    assert_eq!((again.iterations, again.rotation), (0, 0.0));

    let a = solve_a(&f).unwrap();
    assert!(potential_bounds(&f, &a).holds());
    let (r1, r2) = frame_conservation_residual(&u, &f, &a).unwrap();
    let (s1, s2) = frame_conservation_residual(&u, &f, &a.scale(2.0)).unwrap();
    assert!(s1.min(s2) > 10.0 * r1.max(r2), "{r1:e} {r2:e} {s1:e} {s2:e}");
    assert!(second_derivative_report(&u, &f).ratio.is_some());
}

#[test]
fn cylinder_frame_is_valid() {
    let g = disk(33);
    let u = cylinder_map(&g, 0.8).unwrap();
    let f = coulomb_frame_with_normal(&u, &cylinder_normal, &FrameOptions::default()).unwrap();
    assert!(check_frame(&u, &f, &cylinder_normal).passes());
}

#[test]
fn constant_map_has_trivial_frame_data() {
    let g = disk(33);
    let u = MapField::new(vec![ScalarField::constant(&g, 0.6), ScalarField::constant(&g, 0.0), ScalarField::constant(&g, 0.8)], Constraint::UnitSphere).unwrap();
    let f = coulomb_frame(&u, &FrameOptions::default()).unwrap();
    assert_eq!(f.coulomb_residual, 0.0);
    let a = solve_a(&f).unwrap();
    assert_eq!(sup_norm(&a), 0.0);
    assert_eq!(frame_conservation_residual(&u, &f, &a).unwrap(), (0.0, 0.0));
}

#[test]
fn frames_near_the_reference_pole_are_refused() {
    let g = disk(33);
    let u = stereo_sphere_map(&g, 3.0, (0.0, 0.0)).unwrap();
    assert!(matches!(coulomb_frame(&u, &FrameOptions::default()), Err(Error::PoleMargin { .. })));
}
