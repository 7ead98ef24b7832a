use std::f64::consts::PI;

use polyheat::oracle::{jacobian_mu_oracle, operator_reference_1d, spectral_kernel, spectral_trace};
use polyheat::propagator::{compose_apply, compose_apply_mc, heat_kernel_matrix, trace_estimate};
use polyheat::{
    Bundle, Connection, Field, Manifold, Partition, Point, Potential, Section, StepKernelConfig, Variant, C64,
};

fn circle_v() -> (StepKernelConfig, polyheat::GridQuadrature) {
    let c = Manifold::circle(1.0).unwrap();
    (
        StepKernelConfig::new(Bundle::scalar(c, Potential::zero()), Variant::V),
        c.make_grid(256).unwrap(),
    )
}

#[test]
fn circle_kernel_diagonal() {
    let (cfg, grid) = circle_v();
    let k = heat_kernel_matrix(&cfg, &Partition::uniform(0.5, 64).unwrap(), &grid).unwrap();
    let x = &grid.nodes[17];
    assert!((k.values[(17, 17)] - 0.398942).abs() < 1e-3);
    assert!((k.values[(17, 17)] - spectral_kernel(&cfg.bundle.manifold, 0.5, x, x)).abs() < 1e-6);
}

#[test]
fn circle_cosine_decays() {
    let (cfg, grid) = circle_v();
    let u = Section::from_scalar_fn(&grid, &cfg.bundle, |p| p.coords[0].cos());
    let v = compose_apply(&cfg, &Partition::uniform(0.5, 64).unwrap(), &u, &grid).unwrap();
    let expect = Section::from_scalar_fn(&grid, &cfg.bundle, |p| (-0.5f64).exp() * p.coords[0].cos());
    assert!(v.sup_distance(&expect) < 2e-3);
}

#[test]
fn traces_match_spectral_sums() {
    let (cfg, grid) = circle_v();
    let tr = trace_estimate(&cfg, &Partition::uniform(0.5, 32).unwrap(), &grid).unwrap();
    assert!((tr - 2.506628).abs() < 0.01 * 2.506628);
    assert!((spectral_trace(&cfg.bundle.manifold, 0.5) - 2.506628).abs() < 1e-6);

    let s = Manifold::sphere(1.0).unwrap();
    let cfg = StepKernelConfig::new(Bundle::scalar(s, Potential::zero()), Variant::WHat);
    let grid = s.make_grid(1024).unwrap();
    let tr = trace_estimate(&cfg, &Partition::uniform(1.0, 32).unwrap(), &grid).unwrap();
    assert!((tr - 1.418443).abs() < 0.02 * 1.418443, "{tr}");
}

#[test]
fn trace_diagonal_is_positive_for_scalar_problems() {
    let c = Manifold::circle(1.0).unwrap();
    let cfg = StepKernelConfig::new(Bundle::scalar(c, Potential::cos_angle()), Variant::V);
    let grid = c.make_grid(64).unwrap();
    let k = heat_kernel_matrix(&cfg, &Partition::uniform(0.4, 6).unwrap(), &grid).unwrap();
    assert!((0..grid.len()).all(|i| k.values[(i, i)] > 0.0));
}

#[test]
fn grid_tracks_operator_reference_for_bundles() {
    // A rank 2 bundle with a rotation connection and a matrix potential.
    let c = Manifold::circle(1.0).unwrap();
    let conn = Connection::rotation_form(&[0.35], 2).unwrap();
    let b = Bundle::new(c, 2, Field::Real, conn, Potential::matrix_demo()).unwrap();
    let cfg = StepKernelConfig::new(b.clone(), Variant::WHat);
    let grid = c.make_grid(128).unwrap();
    let u = Section::from_fn(&grid, &b, |p| {
        vec![C64::new(p.coords[0].cos(), 0.0), C64::new(p.coords[0].sin().exp(), 0.0)]
    })
    .unwrap();
    let reference = operator_reference_1d(&b, 128, 0.5).unwrap().apply(&u);
    let mut errs = Vec::new();
    for r in [8, 16, 32] {
        let v = compose_apply(&cfg, &Partition::uniform(0.5, r).unwrap(), &u, &grid).unwrap();
        errs.push(v.sup_distance(&reference));
    }
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 1e-2, "{errs:?}");
}

#[test]
fn jacobian_oracle_matches_volume_distortion() {
    let s = Manifold::sphere(1.5).unwrap();
    let y = s.point(&[-0.2, 0.5, 0.4]).unwrap();
    for i in 0..12 {
        let x = s.sphere_point_polar(0.2 + 0.22 * i as f64, 1.3 * i as f64).unwrap();
        let fd = jacobian_mu_oracle(&s, &x, &y).unwrap();
        assert!((fd - s.volume_distortion(&x, &y).unwrap()).abs() < 1e-6);
    }
    let x = s.sphere_point_polar(0.0, 0.0).unwrap();
    let anti = s.point(&[0.0, 0.0, -1.0]).unwrap();
    assert!(jacobian_mu_oracle(&s, &x, &anti).is_err());
}

#[test]
fn monte_carlo_agrees_with_spectral_torus() {
    let t = Manifold::torus(&[1.0, 1.0]).unwrap();
    let cfg = StepKernelConfig::new(
        Bundle::scalar(t, Potential::zero()),
        Variant::Lambda {
            lambda: -1.0,
            cutoff: false,
        },
    );
    let x0 = t.point(&[0.4, 0.1]).unwrap();
    let u = |p: &Point| vec![C64::new((2.0 * PI * p.coords[0]).cos(), 0.0)];
    let est = compose_apply_mc(&cfg, &Partition::uniform(0.1, 16).unwrap(), &u, x0, 200_000, 11).unwrap();
    let exact = (-4.0 * PI * PI * 0.1f64).exp() * (2.0 * PI * 0.4f64).cos();
    assert!(
        (est.mean[0].re - exact).abs() < 4.0 * est.stderr[0],
        "{est:?} vs {exact}"
    );
}
