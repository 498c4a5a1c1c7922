use advice_learn_core::instances::{
    balanced_instance, balanced_subset_size, gv_code, perturb_l1, random_balanced, symmetric_difference,
    unbalanced_instance,
};
use advice_learn_core::metrics::{kl_product, l1_distance, l2_distance};
use advice_learn_core::Seed;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn codes_are_valid(d in 20usize..200, frac in 0.05..0.5f64, m in 1usize..20, seed in any::<u64>()) {
        let k = ((d as f64 * frac) as usize).max(2);
        let code = gv_code(d, k, k / 2, m, Seed(seed), 10_000).unwrap();
        prop_assert!(code.is_valid());
        prop_assert_eq!(code.len(), m);
        for s in &code.sets {
            prop_assert_eq!(s.len(), k);
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]) && *s.last().unwrap() < d);
        }
        for a in 0..m {
            for b in a + 1..m {
                prop_assert!(symmetric_difference(&code.sets[a], &code.sets[b]) >= k / 2);
            }
        }
    }

    #[test]
    fn unbalanced_l1_is_exact(d in 10usize..500, eps in 0.01..1.0f64, seed in any::<u64>()) {
        let k = d / 2;
        let s = gv_code(d, k, 0, 1, Seed(seed), 1).unwrap().sets.remove(0);
        let (p, q) = unbalanced_instance(d, eps, &s).unwrap();
        let l1 = l1_distance(&p, &q).unwrap();
        prop_assert!((l1 - k as f64 * eps / d as f64).abs() <= 1e-12);
    }

    #[test]
    fn perturbation_hits_the_requested_l1(d in 10usize..300, l1 in 0.0..2.0f64, seed in any::<u64>()) {
        let p = random_balanced(d, 0.2, Seed(seed)).unwrap();
        let support = d / 2;
        let q = perturb_l1(&p, l1, support, 0.1, Seed(seed).child(1)).unwrap();
        prop_assert!((l1_distance(&p, &q).unwrap() - l1).abs() <= 1e-9);
        prop_assert!(q.is_balanced(0.1));
    }
}

#[test]
fn balanced_family_identities() {
    let (d, eps, lambda) = (20_000, 0.01, 1.0);
    let k = balanced_subset_size(eps, lambda) as usize;
    assert_eq!(k, 10_000);
    let code = gv_code(d, k, k / 4, 4, Seed(9), 1000).unwrap();
    let shift = lambda / k as f64;
    let inst: Vec<_> = code
        .sets
        .iter()
        .map(|s| balanced_instance(d, eps, lambda, s).unwrap())
        .collect();
    for (p, q, kk) in &inst {
        assert_eq!(*kk, k);
        assert!((l1_distance(p, q).unwrap() - lambda).abs() <= 1e-12);
    }
    for a in 0..inst.len() {
        for b in a + 1..inst.len() {
            let sd = symmetric_difference(&code.sets[a], &code.sets[b]) as f64;
            let l2 = l2_distance(&inst[a].0, &inst[b].0).unwrap();
            assert!((l2 - shift * sd.sqrt()).abs() <= 1e-12);
            let kl = kl_product(&inst[a].0, &inst[b].0).unwrap().value();
            assert!(kl <= 8.0 * shift * shift * sd + 1e-12);
        }
    }
}

#[test]
fn balanced_family_rejects_small_lambda() {
    assert!(balanced_instance(100, 0.1, 1.0, &[0]).is_err());
}
