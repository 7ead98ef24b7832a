use polyheat::propagator::{compose_apply, heat_kernel_matrix, step_kernel_matrix};
use polyheat::{Bundle, Connection, Field, Manifold, Partition, Potential, Section, StepKernelConfig, Variant};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::V),
        Just(Variant::WHat),
        Just(Variant::EndpointScal),
        (-1.0f64..1.0, any::<bool>()).prop_map(|(lambda, cutoff)| Variant::Lambda { lambda, cutoff }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composition_is_associative(
        a in prop::collection::vec(0.01f64..0.2, 1..4),
        b in prop::collection::vec(0.01f64..0.2, 1..4),
        v in variant(),
    ) {
        let c = Manifold::circle(1.0).unwrap();
        let cfg = StepKernelConfig::new(Bundle::scalar(c, Potential::cos_angle()), v);
        let grid = c.make_grid(48).unwrap();
        let u = Section::from_scalar_fn(&grid, &cfg.bundle, |p| (2.0 * p.coords[0]).sin() + 0.5);
        let p1 = Partition::new(a).unwrap();
        let p2 = Partition::new(b).unwrap();
        let whole = compose_apply(&cfg, &p1.concat(&p2), &u, &grid).unwrap();
        let split = compose_apply(&cfg, &p1, &compose_apply(&cfg, &p2, &u, &grid).unwrap(), &grid).unwrap();
        prop_assert!(whole.sup_distance(&split) <= 1e-12 * (1.0 + whole.sup_norm()));
    }

    #[test]
    fn scalar_step_matrices_are_symmetric(t in 0.01f64..0.5, v in variant(), sphere in any::<bool>()) {
        let m = if sphere { Manifold::sphere(1.3).unwrap() } else { Manifold::torus(&[1.0, 2.0]).unwrap() };
        let cfg = StepKernelConfig::new(Bundle::scalar(m, Potential::cos_angle()), v);
        let grid = m.make_grid(if sphere { 64 } else { 6 }).unwrap();
        let k = step_kernel_matrix(&cfg, t, &grid).unwrap();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                prop_assert_eq!(k.values[(i, j)], k.values[(j, i)]);
                let direct = cfg.scalar_step_kernel(t, &grid.nodes[i], &grid.nodes[j]);
                prop_assert!((k.values[(i, j)] - direct).abs() <= 1e-13 * direct.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn bundle_kernels_are_adjoint_under_swap(t in 0.02f64..0.4, form in -1.0f64..1.0) {
        // K(y, x) = K(x, y)* when V is constant along the segment, as for the matrix demo.
        let c = Manifold::circle(1.0).unwrap();
        let conn = Connection::rotation_form(&[form], 2).unwrap();
        let b = Bundle::new(c, 2, Field::Real, conn, Potential::matrix_demo()).unwrap();
        let cfg = StepKernelConfig::new(b, Variant::V);
        let grid = c.make_grid(16).unwrap();
        let k = step_kernel_matrix(&cfg, t, &grid).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let d = k.fiber_block(i, j).distance(&k.fiber_block(j, i).adjoint());
                prop_assert!(d < 1e-13, "{}", d);
            }
        }
    }
}

#[test]
fn doubled_bundle_doubles_the_trace() {
    let c = Manifold::circle(1.0).unwrap();
    let grid = c.make_grid(64).unwrap();
    let p = Partition::uniform(0.3, 5).unwrap();
    let one = StepKernelConfig::new(Bundle::scalar(c, Potential::cos_angle()), Variant::V);
    let two = one.with_bundle(Bundle::trivial(c, 2, Potential::cos_angle()).unwrap());
    let t1 = heat_kernel_matrix(&one, &p, &grid).unwrap().weighted_trace();
    let t2 = heat_kernel_matrix(&two, &p, &grid).unwrap().weighted_trace();
    assert!((t2 - 2.0 * t1).abs() < 1e-13 * t1);
}
