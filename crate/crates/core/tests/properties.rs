use nalgebra::DMatrix;
use proptest::prelude::*;

use polarity_core::ctransform::{c_transform, cost_to_polarity_matrix, QuadraticCost};
use polarity_core::legendre::{conjugate_bruteforce, conjugate_fast_1d, Grid, SampledFunction};
use polarity_core::linalg::condition_number;
use polarity_core::polarity::{pairing, CostMatrix};
use polarity_core::projective::ProjectivePoint;
use polarity_core::transforms::{decompose_s, decompose_t, decomposition_report, relate_t_s};

fn matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d)
        .prop_map(move |v| DMatrix::from_row_slice(d, d, &v))
        .prop_filter("well conditioned", |m| condition_number(m) <= 1e4)
}

fn point(d: usize) -> impl Strategy<Value = ProjectivePoint> {
    prop::collection::vec(-3.0..3.0f64, d)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|v| ProjectivePoint::new(v).unwrap())
}

/// Samples of a convex piecewise-linear function on a sorted grid.
fn convex_samples() -> impl Strategy<Value = SampledFunction> {
    (3usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01..0.5f64, n - 1),
            prop::collection::vec(-4.0..4.0f64, n - 1),
            -3.0..0.0f64,
            -2.0..2.0f64,
        )
            .prop_map(|(steps, mut slopes, start, v0)| {
                slopes.sort_by(f64::total_cmp);
                let mut theta = vec![start];
                let mut values = vec![v0];
                for (h, s) in steps.iter().zip(&slopes) {
                    theta.push(theta.last().unwrap() + h);
                    values.push(values.last().unwrap() + s * h);
                }
                SampledFunction::from_1d(theta, values).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorizations_hold(m in prop_oneof![matrix(3), matrix(4)]) {
        let c = CostMatrix::from_matrix(m).unwrap();
        let r = decomposition_report(&c).unwrap();
        prop_assert!(r.residuals.t_factorization <= 1e-12);
        prop_assert!(r.residuals.s_factorization <= 1e-12);
        let rel = relate_t_s(&decompose_t(&c).unwrap(), &decompose_s(&c).unwrap()).unwrap();
        prop_assert!(rel.residual_t <= 1e-10 && rel.residual_s <= 1e-10);
    }

    #[test]
    fn pairing_is_bilinear(m in matrix(3), a in point(3), b in point(3), s in 0.1..5.0f64) {
        let c = CostMatrix::from_matrix(m).unwrap();
        let p = pairing(&c, &a, &b).unwrap();
        let scaled = pairing(&c, &a.scaled(s).unwrap(), &b).unwrap();
        prop_assert!((scaled - s * p).abs() <= 1e-12 * (1.0 + scaled.abs()));
        let t = pairing(&c.transpose(), &b, &a).unwrap();
        prop_assert!((t - p).abs() <= 1e-12 * (1.0 + p.abs()));
    }

    #[test]
    fn fast_matches_bruteforce(f in convex_samples(), lo in -6.0..0.0f64, width in 0.1..10.0f64) {
        let eta = Grid::linspace(lo, lo + width, 37).unwrap();
        let a = conjugate_bruteforce(&f, &eta).unwrap();
        let b = conjugate_fast_1d(&f, &eta).unwrap();
        for j in 0..eta.len() {
            let (x, y) = (a.dual.value(j), b.dual.value(j));
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn negative_inner_cost_is_minus_conjugate(f in convex_samples()) {
        let eta = Grid::linspace(-5.0, 5.0, 21).unwrap();
        let ct = c_transform(&f, &QuadraticCost::negative_inner(1), &eta).unwrap();
        let star = conjugate_bruteforce(&f, &eta).unwrap();
        for j in 0..eta.len() {
            prop_assert_eq!(ct.values.value(j), -star.dual.value(j));
        }
    }

    #[test]
    fn c_transform_is_monotone_in_f(f in convex_samples(), shift in 0.0..3.0f64) {
        let g = SampledFunction::from_1d(
            f.grid().points().map(|t| t[0]).collect(),
            f.values().iter().map(|v| v + shift).collect(),
        ).unwrap();
        let cost = QuadraticCost::new(DMatrix::from_element(1, 1, 0.3), 0.1, -1.0, vec![0.2], vec![0.0], 1.0).unwrap();
        let eta = Grid::linspace(-2.0, 2.0, 9).unwrap();
        let a = c_transform(&f, &cost, &eta).unwrap();
        let b = c_transform(&g, &cost, &eta).unwrap();
        for j in 0..eta.len() {
            prop_assert!((b.values.value(j) - a.values.value(j) - shift).abs() <= 1e-12 * (1.0 + a.values.value(j).abs()));
        }
    }

    #[test]
    fn block_embedding_keeps_cn(x in 0.1..4.0f64, y in -2.0..2.0f64) {
        let cn = DMatrix::from_row_slice(2, 2, &[x, y, -y, x]);
        let c = cost_to_polarity_matrix(&QuadraticCost::block(cn.clone()).unwrap()).unwrap();
        prop_assert_eq!(c.matrix().view((0, 0), (2, 2)).clone_owned(), cn);
        prop_assert_eq!(c.matrix()[(2, 3)], 1.0);
        prop_assert_eq!(c.matrix()[(3, 2)], 1.0);
        prop_assert_eq!(c.matrix()[(2, 2)], 0.0);
    }
}
