use jetspray::bundle::{self, BundlePoint, Projection};
use jetspray::flow;
use jetspray::{MultiDual, Semispray};
use proptest::prelude::*;

fn jet(order: usize) -> impl Strategy<Value = MultiDual> {
    prop::collection::vec(-3.0..3.0f64, 1 << order).prop_map(move |b| MultiDual::new(order, b).unwrap())
}

fn bundle_point(n: usize, r: usize) -> impl Strategy<Value = BundlePoint> {
    prop::collection::vec(-5.0..5.0f64, n << r).prop_map(move |d| BundlePoint::new(n, r, d).unwrap())
}

fn any_point() -> impl Strategy<Value = BundlePoint> {
    (1usize..=3, 2usize..=4).prop_flat_map(|(n, r)| bundle_point(n, r))
}

fn close(a: &MultiDual, b: &MultiDual, tol: f64) -> bool {
    a.blocks().iter().zip(b.blocks()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_product_is_commutative_and_associative(a in jet(3), b in jet(3), c in jet(3)) {
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-15));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-13));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-13));
    }

    #[test]
    fn generators_square_to_zero(j in 1usize..=4) {
        let e = MultiDual::generator(4, j);
        prop_assert!((&e * &e).blocks().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn reciprocal_inverts(a in jet(2)) {
        prop_assume!(a.value().abs() > 0.1);
        let one = &a * &a.recip().unwrap();
        prop_assert!(close(&one, &MultiDual::one(2), 1e-12));
    }

    #[test]
    fn involution_is_an_involution(xi in any_point(), pick in 0usize..8) {
        let k = 2 + pick % (xi.order() - 1);
        let twice = bundle::involution(&bundle::involution(&xi, k).unwrap(), k).unwrap();
        prop_assert_eq!(twice, xi);
    }

    #[test]
    fn dpi_is_pi_after_kappa(xi in any_point()) {
        let r = xi.order();
        let lhs = bundle::project(&xi, Projection::DPi).unwrap();
        let rhs = bundle::project(&bundle::involution(&xi, r).unwrap(), Projection::Pi).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn representative_map_at_zero_is_the_base(xi in any_point()) {
        let w = bundle::representative_map(&xi).eval(&vec![0.0; xi.order()]);
        prop_assert_eq!(w.as_slice(), xi.block(0));
    }

    #[test]
    fn split_assemble_round_trip(xi in any_point()) {
        let (b, t) = xi.split().unwrap();
        prop_assert_eq!(BundlePoint::assemble(&b, &t).unwrap(), xi);
    }

    #[test]
    fn curvature_spray_is_two_homogeneous(
        k in -1.0..1.0f64,
        x in prop::collection::vec(-0.8..0.8f64, 2),
        y in prop::collection::vec(-2.0..2.0f64, 2),
        lambda in 0.1..4.0f64,
    ) {
        let s = Semispray::constant_curvature(2, k);
        let g = s.eval_real(&x, &y).unwrap();
        let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
        let gl = s.eval_real(&x, &ly).unwrap();
        for (a, b) in g.iter().zip(&gl) {
            prop_assert!((lambda * lambda * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn flat_geodesics_are_affine(
        x in prop::collection::vec(-3.0..3.0f64, 3),
        v in prop::collection::vec(0.5..2.0f64, 3),
        t1 in 0.1..3.0f64,
    ) {
        let s = Semispray::flat(3);
        let g = flow::integrate_geodesic(&s, 0, (&BundlePoint::base(&x), &BundlePoint::base(&v)), (0.0, t1), 0.01).unwrap();
        let (t, end) = (*g.t_grid.last().unwrap(), g.pos.last().unwrap().as_slice());
        for i in 0..3 {
            prop_assert!((end[i] - (x[i] + t * v[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_geodesics_keep_their_speed(
        x in prop::collection::vec(-0.5..0.5f64, 2),
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let s = Semispray::constant_curvature(2, 1.0);
        let v = [angle.cos(), angle.sin()];
        let g = flow::integrate_geodesic(&s, 0, (&BundlePoint::base(&x), &BundlePoint::base(&v)), (0.0, 1.0), 1e-3).unwrap();
        let speed = |i: usize| {
            let (p, w) = (g.pos[i].as_slice(), g.vel[i].as_slice());
            let conf = 1.0 / (1.0 + (p[0] * p[0] + p[1] * p[1]) / 4.0);
            conf * (w[0] * w[0] + w[1] * w[1]).sqrt()
        };
        let s0 = speed(0);
        for i in 0..g.len() {
            prop_assert!((speed(i) - s0).abs() < 1e-10);
        }
    }

    #[test]
    fn lifted_geodesics_project_to_base_geodesics(
        blocks in prop::collection::vec(-0.3..0.3f64, 4),
    ) {
        let s = Semispray::constant_curvature(2, -1.0);
        let pos = BundlePoint::new(2, 1, vec![0.1, 0.0, blocks[0], blocks[1]]).unwrap();
        let vel = BundlePoint::new(2, 1, vec![1.0, 0.2, blocks[2], blocks[3]]).unwrap();
        let lifted = flow::integrate_geodesic(&s, 1, (&pos, &vel), (0.0, 0.5), 1e-3).unwrap();
        let base = flow::integrate_geodesic(&s, 0, (&BundlePoint::base(&[0.1, 0.0]), &BundlePoint::base(&[1.0, 0.2])), (0.0, 0.5), 1e-3).unwrap();
        let projected = lifted.project(Projection::Pi).unwrap();
        for (a, b) in projected.pos.iter().zip(&base.pos) {
            prop_assert_eq!(a, b);
        }
    }
}
