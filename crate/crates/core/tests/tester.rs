use advice_learn_core::oracle;
use advice_learn_core::pipeline::count_inversions;
use advice_learn_core::sampling::{poissonized_counts, PoissonMode};
use advice_learn_core::tester::{tmt, tmt_single, z_statistic, TesterConfig};
use advice_learn_core::{instances, MeanVector, Seed};
use rayon::prelude::*;

/// Mean of Z over 10^4 draws, its standard error and the sample variance.
fn z_draws(p: &MeanVector, q: &MeanVector, m: f64, seed: Seed) -> (f64, f64, f64) {
    let cap = (2.0 * std::f64::consts::E * m).ceil() as u64;
    let zs: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let c = poissonized_counts(p, m, cap, seed.child(i), PoissonMode::Thinning).unwrap();
            z_statistic(&c, q).unwrap()
        })
        .collect();
    let (mean, var) = oracle::mean_and_variance(&zs);
    (mean, (var / zs.len() as f64).sqrt(), var)
}

#[test]
fn z_is_unbiased_with_bounded_variance() {
    let mut within = 0;
    let mut total = 0;
    for (i, m) in [100.0, 1000.0].into_iter().enumerate() {
        for t in 0..10u64 {
            let s = Seed(1000 + 10 * i as u64 + t);
            let p = instances::random_balanced(50, 0.05, s.child(0)).unwrap();
            let q = instances::random_balanced(50, 0.05, s.child(1)).unwrap();
            let (mean, se, var) = z_draws(&p, &q, m, s.child(2));
            total += 1;
            if (mean - oracle::z_mean(&p, &q, m)).abs() <= 4.0 * se {
                within += 1;
            }
            assert!(var <= 1.5 * oracle::z_variance(&p, &q, m), "variance {var} at m = {m}");
        }
    }
    assert!(within * 100 >= 95 * total, "{within}/{total}");
}

#[test]
fn z_centres_at_zero_when_means_agree() {
    let p = instances::random_balanced(50, 0.1, Seed(3)).unwrap();
    let (mean, se, _) = z_draws(&p, &p, 1000.0, Seed(4));
    assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn accept_rate_falls_with_distance() {
    let (d, eps) = (256, 0.2);
    let cfg = TesterConfig::new(eps, 0.25).unwrap();
    let p = MeanVector::constant(d, 0.5).unwrap();
    let rates: Vec<f64> = [0.0, 0.75, 1.5, 2.25, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let accepts = (0..200u64)
                .into_par_iter()
                .filter(|&k| {
                    let s = Seed(77).path(&[i as u64, k]);
                    let shift = t * eps / 16.0;
                    let q = MeanVector::new(
                        (0..d).map(|j| if (j + k as usize) % 2 == 0 { 0.5 + shift } else { 0.5 - shift }).collect(),
                    )
                    .unwrap();
                    tmt_single(&p, &q, &cfg, s).unwrap().accepted()
                })
                .count();
            accepts as f64 / 200.0
        })
        .collect();
    let rejects: Vec<f64> = rates.iter().map(|r| 1.0 - r).collect();
    assert!(count_inversions(&rejects) <= 1, "{rates:?}");
    assert!(rates[0] > rates[4]);
}

#[test]
fn single_shot_quality_at_the_default_constant() {
    // q = p and a single coordinate 2ε away; both verdicts right >= 70% of 200
    let (d, eps) = (400, 0.25);
    let cfg = TesterConfig::new(eps, 0.25).unwrap();
    let p = instances::random_balanced(d, 0.25, Seed(8)).unwrap();
    let mut far = p.clone().into_inner();
    far[0] = if far[0] < 0.5 { far[0] + 2.0 * eps } else { far[0] - 2.0 * eps };
    let far = MeanVector::new(far).unwrap();
    let acc = (0..200).filter(|&t| tmt_single(&p, &p, &cfg, Seed(t)).unwrap().accepted()).count();
    let rej = (0..200).filter(|&t| !tmt_single(&p, &far, &cfg, Seed(t)).unwrap().accepted()).count();
    assert!(acc >= 140, "accepted {acc}");
    assert!(rej >= 140, "rejected {rej}");
}

#[test]
fn samples_used_respects_retry_budget() {
    let p = instances::random_balanced(30, 0.25, Seed(1)).unwrap();
    let q = instances::random_balanced(30, 0.25, Seed(2)).unwrap();
    for (eps, delta) in [(0.5, 0.3), (0.2, 0.05)] {
        let cfg = TesterConfig::new(eps, delta).unwrap();
        let v = tmt(&p, &q, eps, delta, Seed(3)).unwrap();
        assert_eq!(v.repetitions, cfg.repetitions());
        assert!(v.samples_used <= cfg.repetitions() as u64 * cfg.cap(30) * 2);
    }
}
