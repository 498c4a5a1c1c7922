use advice_learn_core::lasso::{
    constrained_least_squares, constrained_least_squares_with, lasso_sample_size, project_l1_ball,
    projected_gradient, L1BallConstraint,
};
use advice_learn_core::sampling::{empirical_mean, sample};
use advice_learn_core::{oracle, MeanVector, Seed};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn point_and_center(d: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    d.prop_flat_map(|d| {
        (
            prop::collection::vec(-0.5..1.5f64, d),
            prop::collection::vec(0.0..=1.0f64, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ball_projection_matches_face_enumeration((v, c) in point_and_center(1..8), r in 0.0..3.0f64) {
        let ball = L1BallConstraint::with_box(MeanVector::new(c.clone()).unwrap(), r, false).unwrap();
        let x = project_l1_ball(&v, &ball).unwrap();
        let oracle = oracle::project_ball_by_faces(&v, &c, r);
        prop_assert!(dist(&x, &oracle) <= 1e-9, "{:?} vs {:?}", x, oracle);
    }

    #[test]
    fn boxed_projection_matches_dykstra((v, c) in point_and_center(1..10), r in 0.0..3.0f64) {
        let ball = L1BallConstraint::new(MeanVector::new(c.clone()).unwrap(), r).unwrap();
        let x = project_l1_ball(&v, &ball).unwrap();
        prop_assert!(ball.contains(&x, 1e-9));
        let oracle = oracle::project_ball_box_dykstra(&v, &c, r, 100_000);
        prop_assert!(dist(&x, &oracle) <= 1e-6, "{:?} vs {:?}", x, oracle);
    }

    #[test]
    fn projection_is_optimal_against_feasible_points(
        (v, c) in point_and_center(2..10),
        r in 0.01..2.0f64,
        w in prop::collection::vec(-1.0..1.0f64, 10),
        t in 0.0..1.0f64,
    ) {
        let d = v.len();
        let ball = L1BallConstraint::new(MeanVector::new(c.clone()).unwrap(), r).unwrap();
        let x = project_l1_ball(&v, &ball).unwrap();
        // a feasible point: c moved along w, scaled into the ball, clipped to the box
        let norm: f64 = w[..d].iter().map(|a| a.abs()).sum::<f64>().max(1e-12);
        let y: Vec<f64> = (0..d).map(|i| (c[i] + t * r * w[i] / norm).clamp(0.0, 1.0)).collect();
        prop_assert!(ball.contains(&y, 1e-12));
        // variational inequality: <v - x, y - x> <= 0
        let ip: f64 = (0..d).map(|i| (v[i] - x[i]) * (y[i] - x[i])).sum();
        prop_assert!(ip <= 1e-9, "inner product {}", ip);
    }

    #[test]
    fn projection_is_non_expansive(
        (a, c) in point_and_center(1..10),
        noise in prop::collection::vec(-0.5..0.5f64, 10),
        r in 0.0..2.0f64,
        boxed in any::<bool>(),
    ) {
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, n)| x + n).collect();
        let ball = L1BallConstraint::with_box(MeanVector::new(c).unwrap(), r, boxed).unwrap();
        let pa = project_l1_ball(&a, &ball).unwrap();
        let pb = project_l1_ball(&b, &ball).unwrap();
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-12);
    }

    #[test]
    fn reduction_agrees_with_gradient_descent(
        p in prop::collection::vec(0.1..0.9f64, 2..12),
        r in 0.05..1.5f64,
        n in 20usize..400,
        seed in any::<u64>(),
    ) {
        let p = MeanVector::new(p).unwrap();
        let batch = sample(&p, n, Seed(seed));
        let q = MeanVector::constant(p.dim(), 0.5).unwrap();
        let ball = L1BallConstraint::new(q, r).unwrap();
        let x = constrained_least_squares_with(&batch, &ball).unwrap();
        let pg = projected_gradient(&batch, &ball, 500, 0.25).unwrap();
        prop_assert!(dist(&x, &pg) <= 1e-6);
    }

    #[test]
    fn basic_inequality_holds_on_every_run(
        p in prop::collection::vec(0.1..0.9f64, 2..20),
        slack in 0.0..1.0f64,
        n in 10usize..500,
        seed in any::<u64>(),
    ) {
        // with p feasible, ||p̂ - p||² <= (2/n) <Σ z_i, p̂ - p> where z_i = y_i - p
        let p = MeanVector::new(p).unwrap();
        let d = p.dim();
        let q = MeanVector::constant(d, 0.5).unwrap();
        let r = p.as_slice().iter().map(|x| (x - 0.5).abs()).sum::<f64>() + slack;
        let batch = sample(&p, n, Seed(seed));
        let est = constrained_least_squares(&batch, &q, r).unwrap();
        let zsum: Vec<f64> = (0..d)
            .map(|i| batch.column_ones(i) as f64 - n as f64 * p.get(i))
            .collect();
        let err: Vec<f64> = (0..d).map(|i| est.get(i) - p.get(i)).collect();
        let lhs: f64 = err.iter().map(|e| e * e).sum();
        let rhs: f64 = 2.0 / n as f64 * zsum.iter().zip(&err).map(|(z, e)| z * e).sum::<f64>();
        prop_assert!(lhs <= rhs + 1e-12, "{} > {}", lhs, rhs);
    }
}

#[test]
fn zero_radius_returns_the_advice() {
    let p = MeanVector::constant(5, 0.3).unwrap();
    let q = MeanVector::constant(5, 0.6).unwrap();
    let est = constrained_least_squares(&sample(&p, 100, Seed(1)), &q, 0.0).unwrap();
    assert_eq!(est, q);
}

#[test]
fn large_radius_returns_the_empirical_mean() {
    let p = MeanVector::constant(6, 0.4).unwrap();
    let batch = sample(&p, 300, Seed(2));
    let q = MeanVector::constant(6, 0.5).unwrap();
    let est = constrained_least_squares(&batch, &q, 10.0).unwrap();
    assert_eq!(est, empirical_mean(&batch).unwrap());
}

#[test]
fn sample_size_scales_as_documented() {
    let base = lasso_sample_size(1.0, 0.5, 0.1, 100).unwrap();
    let doubled_r = lasso_sample_size(2.0, 0.5, 0.1, 100).unwrap();
    let halved_eps = lasso_sample_size(1.0, 0.25, 0.1, 100).unwrap();
    // ceilings perturb the ratios slightly
    assert!((doubled_r as f64 / base as f64 - 4.0).abs() < 1e-2);
    assert!((halved_eps as f64 / base as f64 - 16.0).abs() < 1e-2);
    assert_eq!(lasso_sample_size(0.0, 0.5, 0.1, 100).unwrap(), 0);
}
