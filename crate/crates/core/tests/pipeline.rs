use advice_learn_core::lasso::L1BallConstraint;
use advice_learn_core::pipeline::{
    run_experiment, sample_budget_report, test_and_optimize_mean, Branch, PipelineConfig, Stage2Policy,
};
use advice_learn_core::sampling::Metered;
use advice_learn_core::{instances, MeanVector, Seed};

fn lasso_config(advice: MeanVector) -> PipelineConfig {
    PipelineConfig::new(0.5, 0.2, 0.0, 0.25, advice).unwrap()
}

#[test]
fn lasso_branch_only_below_threshold_and_inside_the_ball() {
    let p = instances::random_balanced(400, 0.3, Seed(1)).unwrap();
    let cfg = lasso_config(p.clone());
    let sched = cfg.schedule().unwrap();
    let mut lasso = 0;
    for t in 0..4 {
        let out = test_and_optimize_mean(&p, &cfg, Seed(t)).unwrap();
        match out.branch {
            Branch::AdviceLasso => {
                lasso += 1;
                let lambda = out.lambda.unwrap();
                assert!(lambda < sched.lasso_threshold);
                let ball = L1BallConstraint::new(cfg.advice.clone(), lambda).unwrap();
                assert!(ball.contains(out.estimate.as_slice(), 1e-9));
                assert!(out.samples_stage2 <= sched.baseline_samples);
            }
            Branch::Baseline => assert_eq!(out.samples_stage2, sched.baseline_samples),
        }
    }
    assert!(lasso >= 3, "{lasso}/4 runs took the lasso branch");
}

#[test]
fn fail_forces_baseline() {
    let p = instances::random_balanced(64, 0.3, Seed(2)).unwrap();
    let cfg = PipelineConfig::new(0.3, 0.2, 0.0, 0.25, instances::farthest_corner(&p)).unwrap();
    for t in 0..3 {
        let out = test_and_optimize_mean(&p, &cfg, Seed(t)).unwrap();
        if out.stage1.is_fail() {
            assert_eq!(out.branch, Branch::Baseline);
            assert!(out.lambda.is_none());
        }
    }
}

#[test]
fn metered_rows_match_reported_stages() {
    let p = instances::random_balanced(100, 0.3, Seed(3)).unwrap();
    for reuse in [false, true] {
        let mut cfg = lasso_config(p.clone());
        cfg.constants.reuse_stage1 = reuse;
        let meter = Metered::new(&p);
        let out = test_and_optimize_mean(&meter, &cfg, Seed(4)).unwrap();
        assert_eq!(meter.rows_drawn(), out.total_samples());
    }
}

#[test]
fn literal_policy_never_draws_fewer_rows() {
    let p = instances::random_balanced(400, 0.3, Seed(5)).unwrap();
    let capped = lasso_config(p.clone());
    let mut literal = capped.clone();
    literal.constants.stage2_policy = Stage2Policy::Literal;
    let a = test_and_optimize_mean(&p, &capped, Seed(6)).unwrap();
    let b = test_and_optimize_mean(&p, &literal, Seed(6)).unwrap();
    assert_eq!(a.lambda, b.lambda);
    assert!(b.samples_stage2 >= a.samples_stage2);
}

#[test]
fn experiments_replay_and_summarise() {
    let p = instances::random_balanced(64, 0.3, Seed(7)).unwrap();
    let cfg = PipelineConfig::new(0.4, 0.2, 0.0, 0.25, p.clone()).unwrap();
    let a = run_experiment(&p, &cfg, Seed(8)).unwrap();
    let b = run_experiment(&p, &cfg, Seed(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.true_l1, 0.0);
    let table = sample_budget_report(&[a, b]).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].trials, 2);
}

#[test]
fn invalid_configs_name_the_field() {
    let q = MeanVector::constant(16, 0.5).unwrap();
    let err = PipelineConfig::new(0.3, 0.2, 0.0, 0.7, q).unwrap_err();
    assert!(err.to_string().contains("tau"), "{err}");
}
