//! Statistical acceptance checks, grouped into named suites.
//!
//! Each check runs a seeded Monte Carlo experiment and compares a count or
//! a worst case against a fixed bar. Reports are plain data so the CLI can
//! print or serialize them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx_l1::{approx_l1, sandwich_upper, ApproxL1Params, L1Outcome};
use crate::error::Result;
use crate::instances::{
    balanced_instance, farthest_corner, gv_code, perturb_l1, random_balanced, symmetric_difference,
    unbalanced_instance,
};
use crate::lasso::{constrained_least_squares, project_l1_ball, L1BallConstraint};
use crate::metrics::{kl_product, l1_distance, l2, l2_distance, tv_exact};
use crate::oracle;
use crate::pipeline::{count_inversions, run_experiment, Branch, PipelineConfig};
use crate::sampling::{poissonized_counts, sample, MeanVector, PoissonMode};
use crate::seed::Seed;
use crate::tester::{spread_advice, tmt, z_statistic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String, started: Instant) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({:.1}s): {}", self.name, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Metrics,
    Tester,
    ApproxL1,
    Lasso,
    PipelineSmall,
    PipelineLarge,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Metrics,
        Suite::Tester,
        Suite::ApproxL1,
        Suite::Lasso,
        Suite::PipelineSmall,
        Suite::PipelineLarge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metrics => "metrics",
            Suite::Tester => "tester",
            Suite::ApproxL1 => "approxl1",
            Suite::Lasso => "lasso",
            Suite::PipelineSmall => "pipeline-small",
            Suite::PipelineLarge => "pipeline-large",
        }
    }

    pub fn run(self, seed: Seed) -> Result<SuiteReport> {
        let s = |i: u64| seed.child(i);
        let checks = match self {
            Suite::Metrics => vec![
                divergence_sandwich(s(0))?,
                enumeration_agreement(s(1))?,
                instance_exactness(s(2))?,
            ],
            Suite::Tester => vec![statistic_moments(s(0))?, tester_separation(s(1))?],
            Suite::ApproxL1 => vec![approx_l1_sandwich(s(0))?],
            Suite::Lasso => vec![projection_matches_oracle(s(0))?, lasso_error_bound(s(1))?],
            Suite::PipelineSmall => vec![end_to_end_small(s(0))?],
            Suite::PipelineLarge => vec![sublinear_budget(s(0))?],
        };
        Ok(SuiteReport {
            suite: self.name().to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        })
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite `{s}`; expected one of {}", names.join(", "))
            })
    }
}

fn trials<T: Send>(n: usize, seed: Seed, f: impl Fn(Seed) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n as u64)
        .into_par_iter()
        .map(|t| f(seed.trial(t)))
        .collect()
}

/// Mean of `Z` over 10^4 count draws at `d = 50`, `m = 1000`, against
/// `m² ||p - q||²`, for 20 random pairs. Passes at 19 within 4 standard
/// errors. The variance is reported against the closed form.
pub fn statistic_moments(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, m, draws, configs) = (50, 1000.0, 10_000, 20);
    let cap = (2.0 * std::f64::consts::E * m).ceil() as u64;
    let rows = trials(configs, seed, |s| {
        let p = random_balanced(d, 0.05, s.child(0))?;
        let q = random_balanced(d, 0.05, s.child(1))?;
        let zs = (0..draws as u64)
            .map(|i| {
                let c = poissonized_counts(&p, m, cap, s.child(2).child(i), PoissonMode::Thinning)?;
                z_statistic(&c, &q)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, var) = oracle::mean_and_variance(&zs);
        let target = oracle::z_mean(&p, &q, m);
        let se = (var / draws as f64).sqrt();
        Ok(((mean - target).abs() <= 4.0 * se, var / oracle::z_variance(&p, &q, m)))
    })?;
    let within = rows.iter().filter(|r| r.0).count();
    let max_ratio = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Check::new(
        "statistic-moments",
        within >= 19,
        format!("{within}/20 means within 4 SE (need 19); max var/closed-form {max_ratio:.3}"),
        t0,
    ))
}

/// Majority-vote tester at `d = 256`, `ε = 0.2`, `δ = 0.1`: at least 90 of
/// 100 Accepts with `p = q`, and 90 of 100 Rejects at distance 0.5.
pub fn tester_separation(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, eps, delta, n) = (256, 0.2, 0.1, 100);
    let p = MeanVector::constant(d, 0.5)?;
    let same = trials(n, seed.child(0), |s| Ok(tmt(&p, &p, eps, delta, s)?.accepted()))?;
    let far = trials(n, seed.child(1), |s| {
        let q = spread_advice(d, 0.5, s.child(0))?;
        Ok(!tmt(&p, &q, eps, delta, s.child(1))?.accepted())
    })?;
    let acc = same.iter().filter(|&&a| a).count();
    let rej = far.iter().filter(|&&r| r).count();
    Ok(Check::new(
        "tester-separation",
        acc >= 90 && rej >= 90,
        format!("accept {acc}/100 at p = q, reject {rej}/100 at distance 0.5 (need 90 each)"),
        t0,
    ))
}

/// `||p - q||_1 <= λ <= 2 sqrt(k)(⌈d/k⌉α + 2||p - q||_1)` at `d = 256`,
/// `k = 16`, `α = ε d^{(3η-1)/2}`, `ζ = 4ε sqrt(d)`, `ε = 0.25`, `η = 0.1`,
/// `δ = 0.1`, in at least 85 of 100 trials for each of `||p - q||_1 ∈ {0, 1, 4}`.
pub fn approx_l1_sandwich(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, k, eps, eta, delta) = (256usize, 16usize, 0.25, 0.1, 0.1);
    let alpha = eps * (d as f64).powf((3.0 * eta - 1.0) / 2.0);
    let zeta = 4.0 * eps * (d as f64).sqrt();
    let expected_rows = ApproxL1Params::new(k, alpha, zeta, delta)?.sample_size(d);
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, l1) in [0.0, 1.0, 4.0].into_iter().enumerate() {
        let outcomes = trials(100, seed.child(i as u64), |s| {
            let p = random_balanced(d, 0.25, s.child(0))?;
            let q = perturb_l1(&p, l1, d, 0.25, s.child(1))?;
            let true_l1 = l1_distance(&p, &q)?;
            let out = approx_l1(&p, &q, k, alpha, zeta, delta, s.child(2))?;
            let upper = sandwich_upper(d, k, alpha, true_l1);
            let ok = out.lambda.is_some_and(|lam| {
                lam >= true_l1 && lam <= upper * (1.0 + 1e-12)
            });
            let sound_fail = out.outcome != L1Outcome::Fail || l2_distance(&p, &q)? > zeta / 2.0;
            let one_draw = out.samples_used == expected_rows;
            Ok((ok, out.outcome == L1Outcome::Fail, sound_fail, one_draw))
        })?;
        let hold = outcomes.iter().filter(|o| o.0).count();
        let fails = outcomes.iter().filter(|o| o.1).count();
        let unsound = outcomes.iter().filter(|o| !o.2).count();
        let draws_ok = outcomes.iter().all(|o| o.3);
        passed &= hold >= 85 && draws_ok;
        parts.push(format!("l1={l1}: {hold}/100 (fails {fails}, unsound {unsound})"));
    }
    Ok(Check::new(
        "approx-l1-sandwich",
        passed,
        format!("{}; need 85 per distance", parts.join("; ")),
        t0,
    ))
}

/// `project_l1_ball` against face enumeration (plain ball) and Dykstra
/// (ball ∩ box) on 200 random instances with `d <= 10`; objective gap at
/// most 1e-6 and the fast result feasible.
pub fn projection_matches_oracle(seed: Seed) -> Result<Check> {
    use crate::sampling::uniform_in;
    use rand::Rng;
    let t0 = Instant::now();
    let gaps = trials(200, seed, |s| {
        let mut rng = s.rng();
        let d = rng.random_range(1..=10usize);
        let boxed = rng.random::<bool>();
        let v: Vec<f64> = (0..d).map(|_| uniform_in(&mut rng, -0.5, 1.5)).collect();
        let c = MeanVector::new((0..d).map(|_| rng.random::<f64>()).collect())?;
        let r = uniform_in(&mut rng, 0.0, 0.6 * d as f64);
        let ball = L1BallConstraint::with_box(c.clone(), r, boxed)?;
        let fast = project_l1_ball(&v, &ball)?;
        let slow = if boxed {
            oracle::project_ball_box_dykstra(&v, c.as_slice(), r, 200_000)
        } else {
            oracle::project_ball_by_faces(&v, c.as_slice(), r)
        };
        let obj = |x: &[f64]| l2(x, &v).powi(2);
        let feasible = ball.contains(&fast, 1e-9);
        Ok(if feasible { (obj(&fast) - obj(&slow)).abs() } else { f64::INFINITY })
    })?;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    let bad = gaps.iter().filter(|&&g| g > 1e-6).count();
    Ok(Check::new(
        "projection-oracle",
        bad == 0,
        format!("worst objective gap {worst:.2e} over 200 instances; {bad} above 1e-6"),
        t0,
    ))
}

/// `||p̂ - p||_2 <= 4r sqrt(2 ln(2d/δ)/n)` at `d = 8`, `n = 5000`,
/// `δ = 0.05`, with `r = ||p - q||_1 = 0.5`; at least 95 of 100 trials.
pub fn lasso_error_bound(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, n, delta, r) = (8usize, 5000usize, 0.05, 0.5);
    let bound = 4.0 * r * (2.0 * (2.0 * d as f64 / delta).ln() / n as f64).sqrt();
    let errs = trials(100, seed, |s| {
        let p = random_balanced(d, 0.25, s.child(0))?;
        let q = perturb_l1(&p, r, d, 0.25, s.child(1))?;
        let batch = sample(&p, n, s.child(2));
        let est = constrained_least_squares(&batch, &q, r)?;
        l2_distance(&est, &p)
    })?;
    let ok = errs.iter().filter(|&&e| e <= bound).count();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(Check::new(
        "lasso-error-bound",
        ok >= 95,
        format!("{ok}/100 within {bound:.4} (need 95); worst error {worst:.4}"),
        t0,
    ))
}

/// For 100 random 1/4-balanced pairs at `d = 12`:
/// `2||p-q||² <= KL <= (2/τ)||p-q||²` and `TV <= ||p-q||/sqrt(τ)`, always.
pub fn divergence_sandwich(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let tau = 0.25;
    let rows = trials(100, seed, |s| {
        let p = random_balanced(12, tau, s.child(0))?;
        let q = random_balanced(12, tau, s.child(1))?;
        let l2sq = l2_distance(&p, &q)?.powi(2);
        let kl = kl_product(&p, &q)?.value();
        let tv = tv_exact(&p, &q)?;
        Ok((
            2.0 * l2sq <= kl && kl <= 2.0 / tau * l2sq,
            tv <= l2sq.sqrt() / tau.sqrt(),
        ))
    })?;
    let kl_ok = rows.iter().filter(|r| r.0).count();
    let tv_ok = rows.iter().filter(|r| r.1).count();
    Ok(Check::new(
        "divergence-sandwich",
        kl_ok == 100 && tv_ok == 100,
        format!("KL bracket {kl_ok}/100, TV bound {tv_ok}/100 (need all)"),
        t0,
    ))
}

/// `tv_exact` and `kl_product` against direct cube enumeration.
pub fn enumeration_agreement(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let gaps = trials(40, seed, |s| {
        let d = 1 + (s.0 % 14) as usize;
        let p = random_balanced(d, 0.1, s.child(0))?;
        let q = random_balanced(d, 0.1, s.child(1))?;
        let tv = (tv_exact(&p, &q)? - oracle::tv_bruteforce(&p, &q)?).abs();
        let kl = (kl_product(&p, &q)?.value() - oracle::kl_bruteforce(&p, &q)?).abs();
        Ok(tv.max(kl))
    })?;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok(Check::new(
        "enumeration-agreement",
        worst <= 1e-12,
        format!("worst |fast - enumerated| {worst:.2e} over 40 pairs"),
        t0,
    ))
}

/// Closed forms of both lower-bound families to 1e-12: the unbalanced ℓ1
/// distance `|S| ε/d`, the balanced ℓ1 distance `λ`, the pairwise identity
/// `||p_S - p_T||_2 = (λ/k) sqrt(|S ⊕ T|)` and `KL <= 8 (λ/k)² |S ⊕ T|`.
pub fn instance_exactness(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let tol = 1e-12;
    let mut worst = 0.0f64;
    let mut kl_ok = true;

    let (d, eps) = (200, 0.4);
    let code = gv_code(d, 50, 25, 16, seed.child(0), 10_000)?;
    let mut valid = code.is_valid();
    for s in &code.sets {
        let (p, q) = unbalanced_instance(d, eps, s)?;
        worst = worst.max((l1_distance(&p, &q)? - s.len() as f64 * eps / d as f64).abs());
    }

    let (d, eps, lambda) = (12_000, 0.01, 1.0);
    let k = crate::instances::balanced_subset_size(eps, lambda) as usize;
    let code = gv_code(d, k, k / 4, 6, seed.child(1), 1000)?;
    valid &= code.is_valid();
    let shift = lambda / k as f64;
    let family = code
        .sets
        .iter()
        .map(|s| balanced_instance(d, eps, lambda, s).map(|(p, q, _)| (p, q)))
        .collect::<Result<Vec<_>>>()?;
    for (p, q) in &family {
        worst = worst.max((l1_distance(p, q)? - lambda).abs());
    }
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let sd = symmetric_difference(&code.sets[i], &code.sets[j]) as f64;
            let l2 = l2_distance(&family[i].0, &family[j].0)?;
            worst = worst.max((l2 - shift * sd.sqrt()).abs());
            let kl = kl_product(&family[i].0, &family[j].0)?.value();
            kl_ok &= kl <= 8.0 * shift * shift * sd + tol;
        }
    }
    Ok(Check::new(
        "instance-exactness",
        valid && kl_ok && worst <= tol,
        format!("worst closed-form gap {worst:.2e}; codes valid {valid}; KL bound {kl_ok}"),
        t0,
    ))
}

/// Full pipeline at `d = 16`, `ε = 0.3`, `τ = 0.25`, `η = 0.1`, `δ = 1/3`:
/// `tv_exact(p, p̂) <= ε` in at least 40 of 60 trials, both with `q = p` and
/// with the farthest corner as advice. At this size `λ >= 2 sqrt(16) α`
/// always exceeds `ε sqrt(d)`, so every trial must take the baseline branch.
pub fn end_to_end_small(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, eps, tau, eta, delta) = (16, 0.3, 0.25, 0.1, 1.0 / 3.0);
    let mut parts = Vec::new();
    let mut passed = true;
    for (i, adversarial) in [false, true].into_iter().enumerate() {
        let rows = trials(60, seed.child(i as u64), |s| {
            let p = random_balanced(d, tau, s.child(0))?;
            let q = if adversarial { farthest_corner(&p) } else { p.clone() };
            let cfg = PipelineConfig::new(eps, delta, eta, tau, q)?;
            let rec = run_experiment(&p, &cfg, s.child(1))?;
            let tv = rec.realized_tv.expect("d <= 24");
            Ok((tv <= eps, rec.branch == Branch::Baseline))
        })?;
        let good = rows.iter().filter(|r| r.0).count();
        let base = rows.iter().filter(|r| r.1).count();
        passed &= good >= 40 && base == 60;
        let label = if adversarial { "corner advice" } else { "q = p" };
        parts.push(format!("{label}: tv <= eps in {good}/60, baseline {base}/60"));
    }
    Ok(Check::new(
        "end-to-end-small",
        passed,
        format!("{} (need 40 and 60)", parts.join("; ")),
        t0,
    ))
}

/// At `d = 10^4`, `ε = 0.25`, `η = 0.1`, `τ = 0.25`, `δ = 1/3`: with `q = p`
/// the total sample count is at most half the baseline budget, and mean
/// totals over `||p - q||_1 ∈ {0, 1, 5, 25}` have at most one inversion.
pub fn sublinear_budget(seed: Seed) -> Result<Check> {
    let t0 = Instant::now();
    let (d, eps, tau, eta, delta) = (10_000, 0.25, 0.25, 0.1, 1.0 / 3.0);
    let reps = 3;
    let p = random_balanced(d, tau, seed.child(0))?;
    let mut means = Vec::new();
    let mut exact_ratio = 0.0;
    let mut baseline = 0;
    let mut worst_l2 = 0.0f64;
    let mut branches = Vec::new();
    for (i, l1) in [0.0, 1.0, 5.0, 25.0].into_iter().enumerate() {
        let q = perturb_l1(&p, l1, d, tau, seed.child(1).child(i as u64))?;
        let cfg = PipelineConfig::new(eps, delta, eta, tau, q)?;
        baseline = cfg.schedule()?.baseline_samples;
        let recs = (0..reps)
            .map(|t| run_experiment(&p, &cfg, seed.child(2).path(&[i as u64, t])))
            .collect::<Result<Vec<_>>>()?;
        let mean = recs.iter().map(|r| r.total_samples() as f64).sum::<f64>() / reps as f64;
        if i == 0 {
            exact_ratio = mean / baseline as f64;
        }
        worst_l2 = recs.iter().map(|r| r.realized_l2).fold(worst_l2, f64::max);
        let lasso = recs.iter().filter(|r| r.branch == Branch::AdviceLasso).count();
        branches.push(format!("{lasso}/{reps}"));
        means.push(mean);
    }
    let inversions = count_inversions(&means);
    let totals: Vec<String> = means.iter().map(|m| format!("{m:.3e}")).collect();
    Ok(Check::new(
        "sublinear-budget",
        exact_ratio <= 0.5 && inversions <= 1,
        format!(
            "q = p total/baseline = {exact_ratio:.3} (need <= 0.5, baseline {baseline}); \
             mean totals [{}] with {inversions} inversions; lasso branch [{}]; \
             worst l2 error {worst_l2:.4} vs eps sqrt(tau) = {:.4}",
            totals.join(", "),
            branches.join(", "),
            eps * tau.sqrt()
        ),
        t0,
    ))
}
