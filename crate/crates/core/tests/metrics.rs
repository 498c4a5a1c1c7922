use advice_learn_core::metrics::{kl_product, l2_distance, tv_bounds_with, tv_exact, Kl};
use advice_learn_core::{instances, oracle, MeanVector, Seed};
use proptest::prelude::*;

fn balanced_pair(d: usize, tau: f64) -> impl Strategy<Value = (MeanVector, MeanVector)> {
    let v = move || prop::collection::vec(tau..=1.0 - tau, d).prop_map(|x| MeanVector::new(x).unwrap());
    (v(), v())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kl_sandwich_at_d64((p, q) in balanced_pair(64, 0.2)) {
        let kl = kl_product(&p, &q).unwrap().value();
        let l2sq = l2_distance(&p, &q).unwrap().powi(2);
        prop_assert!(2.0 * l2sq <= kl);
        prop_assert!(kl <= 2.0 / 0.2 * l2sq);
    }

    #[test]
    fn tv_bracket_and_pinsker((p, q) in balanced_pair(10, 0.25)) {
        let tv = tv_exact(&p, &q).unwrap();
        let (lo, hi) = tv_bounds_with(&p, &q, 0.25, 0.1).unwrap();
        prop_assert!(lo <= tv && tv <= hi, "{} not in [{}, {}]", tv, lo, hi);
        let kl = kl_product(&p, &q).unwrap().value();
        prop_assert!(tv <= (kl / 2.0).sqrt() + 1e-12);
        prop_assert!((tv - oracle::tv_bruteforce(&p, &q).unwrap()).abs() <= 1e-12);
        prop_assert!((kl - oracle::kl_bruteforce(&p, &q).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn tv_is_symmetric((p, q) in balanced_pair(12, 0.1)) {
        prop_assert!((tv_exact(&p, &q).unwrap() - tv_exact(&q, &p).unwrap()).abs() <= 1e-14);
    }
}

#[test]
fn kl_is_not_symmetric() {
    let p = MeanVector::new(vec![0.1, 0.5]).unwrap();
    let q = MeanVector::new(vec![0.5, 0.5]).unwrap();
    let (a, b) = (kl_product(&p, &q).unwrap().value(), kl_product(&q, &p).unwrap().value());
    assert!((a - b).abs() > 0.05, "{a} vs {b}");
}

#[test]
fn support_mismatch_gives_infinite_kl() {
    let p = MeanVector::new(vec![0.5]).unwrap();
    let q = MeanVector::new(vec![0.0]).unwrap();
    assert_eq!(kl_product(&p, &q).unwrap(), Kl::Infinite);
    assert_eq!(kl_product(&q, &p).unwrap().value(), std::f64::consts::LN_2);
}

#[test]
fn tv_tends_to_one_for_far_pairs() {
    let p = instances::random_balanced(20, 0.4, Seed(1)).unwrap();
    let q = instances::farthest_corner(&p);
    assert!(tv_exact(&p, &q).unwrap() > 0.99);
}
