//! Learning with advice: estimate `||p - q||_1`, then either solve the
//! constrained least-squares problem around `q` or fall back to the empirical
//! mean.
//!
//! Schedule for dimension `d`:
//! `k = min(⌈d^{4η}/τ⁴⌉, d)`, `α = ε d^{(3η-1)/2}/τ`, `ζ = 4ε sqrt(d)`.
//! Stage 1 runs [`approx_l1`](crate::approx_l1) with these values. When it
//! returns `λ < ε sqrt(d)`, stage 2 projects the mean of fresh samples onto
//! the ℓ1 ball of radius `λ` around `q`; otherwise it returns the mean of
//! `⌈C (d + ln(2/δ)) / (τ ε²)⌉` fresh samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::approx_l1::{self, ApproxL1Outcome, ApproxL1Params, L1Outcome};
use crate::error::{Error, Result};
use crate::lasso::{lasso_sample_size_with, project_l1_ball, L1BallConstraint, DEFAULT_LASSO_CONSTANT};
use crate::metrics::{l1_distance, l2_distance, tv_exact, MAX_EXACT_TV_DIM};
use crate::sampling::{LazyBatch, MeanVector, Metered, ProductSampler};
use crate::seed::{label, Seed};
use crate::tester::{DEFAULT_C, DEFAULT_THRESHOLD_FACTOR};
use crate::util::ceil_count;

pub const DEFAULT_BASELINE_CONSTANT: f64 = 8.0;

/// What stage 2 does when the LASSO sample size exceeds the baseline's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage2Policy {
    /// Draw `min(n_lasso, n_baseline)` rows and still project. The projection
    /// onto a convex set containing `p` never moves the mean away from `p`.
    #[default]
    CapAtBaseline,
    /// Always draw `n_lasso` rows.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConstants {
    pub c: f64,
    pub threshold_factor: f64,
    pub lasso_constant: f64,
    pub baseline_constant: f64,
    pub sample_multiplier: f64,
    pub stage2_policy: Stage2Policy,
    /// Experimental: feed the stage-1 rows into the stage-2 mean.
    pub reuse_stage1: bool,
}

impl Default for PipelineConstants {
    fn default() -> Self {
        PipelineConstants {
            c: DEFAULT_C,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            lasso_constant: DEFAULT_LASSO_CONSTANT,
            baseline_constant: DEFAULT_BASELINE_CONSTANT,
            sample_multiplier: 1.0,
            stage2_policy: Stage2Policy::default(),
            reuse_stage1: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub advice: MeanVector,
    #[serde(default)]
    pub constants: PipelineConstants,
}

impl PipelineConfig {
    pub fn new(epsilon: f64, delta: f64, eta: f64, tau: f64, advice: MeanVector) -> Result<Self> {
        let cfg = PipelineConfig {
            epsilon,
            delta,
            eta,
            tau,
            advice,
            constants: PipelineConstants::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.advice.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", self.epsilon, "must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", self.delta, "must lie in (0, 1)"));
        }
        if !(0.0..=0.25).contains(&self.eta) {
            return Err(Error::param("eta", self.eta, "must lie in [0, 1/4]"));
        }
        if !(self.tau > 0.0 && self.tau <= 0.5) {
            return Err(Error::param("tau", self.tau, "must lie in (0, 1/2]"));
        }
        if self.dim() == 0 {
            return Err(Error::param("d", 0.0, "advice must be non-empty"));
        }
        let k = &self.constants;
        if !(k.lasso_constant > 0.0) {
            return Err(Error::param("lasso_constant", k.lasso_constant, "must be positive"));
        }
        if !(k.baseline_constant > 0.0) {
            return Err(Error::param("baseline_constant", k.baseline_constant, "must be positive"));
        }
        self.schedule()?.approx_params.validate()
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self)
    }
}

/// Derived quantities for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub w: usize,
    pub levels: usize,
    pub delta_prime: f64,
    pub repetitions: usize,
    pub stage1_samples: u64,
    /// Stage 2 uses the advice iff `λ` is below this.
    pub lasso_threshold: f64,
    pub baseline_samples: u64,
    pub approx_params: ApproxL1Params,
}

impl Schedule {
    fn new(cfg: &PipelineConfig) -> Result<Self> {
        let d = cfg.dim();
        let df = d as f64;
        let k = (ceil_count(df.powf(4.0 * cfg.eta) / cfg.tau.powi(4)) as usize).clamp(1, d);
        let alpha = cfg.epsilon * df.powf((3.0 * cfg.eta - 1.0) / 2.0) / cfg.tau;
        let zeta = 4.0 * cfg.epsilon * df.sqrt();
        let approx_params = ApproxL1Params {
            k,
            alpha,
            zeta,
            delta: cfg.delta,
            c: cfg.constants.c,
            threshold_factor: cfg.constants.threshold_factor,
            sample_multiplier: cfg.constants.sample_multiplier,
        };
        approx_params.validate()?;
        Ok(Schedule {
            d,
            k,
            alpha,
            zeta,
            w: d.div_ceil(k),
            levels: approx_params.level_count(),
            delta_prime: approx_params.delta_prime(d),
            repetitions: approx_params.repetitions(d),
            stage1_samples: approx_params.sample_size(d),
            lasso_threshold: cfg.epsilon * df.sqrt(),
            baseline_samples: baseline_sample_size_with(
                d,
                cfg.epsilon,
                cfg.delta,
                cfg.tau,
                cfg.constants.baseline_constant,
            ),
            approx_params,
        })
    }
}

/// `⌈8 (d + ln(2/δ)) / (τ ε²)⌉`.
pub fn baseline_sample_size(d: usize, epsilon: f64, delta: f64, tau: f64) -> u64 {
    baseline_sample_size_with(d, epsilon, delta, tau, DEFAULT_BASELINE_CONSTANT)
}

pub fn baseline_sample_size_with(d: usize, epsilon: f64, delta: f64, tau: f64, constant: f64) -> u64 {
    ceil_count(constant * (d as f64 + (2.0 / delta).ln()) / (tau * epsilon * epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    AdviceLasso,
    Baseline,
}

/// Result of one pipeline run, without reference to the true means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub branch: Branch,
    pub lambda: Option<f64>,
    pub stage1: ApproxL1Outcome,
    pub samples_stage1: u64,
    pub samples_stage2: u64,
    pub estimate: MeanVector,
}

impl PipelineOutcome {
    pub fn total_samples(&self) -> u64 {
        self.samples_stage1 + self.samples_stage2
    }
}

/// Runs both stages. Every row drawn from `source` is metered, and a
/// mismatch with the reported stage sizes is an [`Error::Audit`].
pub fn test_and_optimize_mean<S: ProductSampler + ?Sized>(
    source: &S,
    cfg: &PipelineConfig,
    seed: Seed,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let q = &cfg.advice;
    q.check_dim(source.dim())?;
    let sched = cfg.schedule()?;
    let meter = Metered::new(source);
    let reuse = cfg.constants.reuse_stage1;

    let stage1 = approx_l1::approx_l1_inner(
        &meter,
        q,
        &sched.approx_params,
        seed.child(label::STAGE1),
        reuse,
    )?;
    let samples_stage1 = stage1.samples_used;

    let lambda = stage1.lambda;
    let use_lasso = stage1.outcome == L1Outcome::Estimate
        && lambda.is_some_and(|l| l < sched.lasso_threshold);
    let (branch, wanted) = if use_lasso {
        let l = lambda.expect("estimate carries lambda");
        let n = lasso_sample_size_with(
            l,
            cfg.epsilon * cfg.tau.sqrt() / 2.0,
            cfg.delta,
            sched.d,
            cfg.constants.lasso_constant,
        )?;
        let n = match cfg.constants.stage2_policy {
            Stage2Policy::CapAtBaseline => n.min(sched.baseline_samples),
            Stage2Policy::Literal => n,
        };
        (Branch::AdviceLasso, n)
    } else {
        (Branch::Baseline, sched.baseline_samples)
    };

    let reused = if reuse { samples_stage1.min(wanted) } else { 0 };
    let fresh = wanted - reused;
    let rows = usize::try_from(fresh)
        .map_err(|_| Error::param("stage-2 sample size", fresh as f64, "exceeds usize"))?;
    let batch = LazyBatch::draw(&meter, rows, seed.child(label::STAGE2));

    let mean = if reused > 0 {
        // stage-1 ones cover all of S; extra S rows beyond `wanted` are kept
        let s_ones = stage1.column_ones.as_ref().expect("kept when reusing");
        let total = (samples_stage1 + fresh) as f64;
        let means = (0..sched.d)
            .map(|i| Ok((s_ones[i] + batch.column_ones(i)?) as f64 / total))
            .collect::<Result<Vec<_>>>()?;
        MeanVector::new(means)?
    } else {
        batch.column_means()?
    };

    let estimate = match branch {
        Branch::AdviceLasso => {
            let ball = L1BallConstraint::new(q.clone(), lambda.expect("lasso branch"))?;
            MeanVector::new(project_l1_ball(mean.as_slice(), &ball)?)?
        }
        Branch::Baseline => mean,
    };

    let samples_stage2 = fresh;
    let drawn = meter.rows_drawn();
    if drawn != samples_stage1 + samples_stage2 {
        return Err(Error::Audit(format!(
            "sampler served {drawn} rows, stages report {samples_stage1} + {samples_stage2}"
        )));
    }
    Ok(PipelineOutcome {
        branch,
        lambda,
        stage1,
        samples_stage1,
        samples_stage2,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: PipelineConfig,
    pub branch: Branch,
    pub stage1_outcome: L1Outcome,
    pub lambda: Option<f64>,
    pub samples_stage1: u64,
    pub samples_stage2: u64,
    pub estimate: MeanVector,
    pub true_l1: f64,
    pub realized_l2: f64,
    /// Exact when `d <= 24`.
    pub realized_tv: Option<f64>,
}

impl ExperimentRecord {
    pub fn total_samples(&self) -> u64 {
        self.samples_stage1 + self.samples_stage2
    }
}

/// Runs the pipeline against known means and scores the estimate.
pub fn run_experiment(p: &MeanVector, cfg: &PipelineConfig, seed: Seed) -> Result<ExperimentRecord> {
    let out = test_and_optimize_mean(p, cfg, seed)?;
    let realized_tv = if p.dim() <= MAX_EXACT_TV_DIM {
        Some(tv_exact(p, &out.estimate)?)
    } else {
        None
    };
    Ok(ExperimentRecord {
        config: cfg.clone(),
        branch: out.branch,
        stage1_outcome: out.stage1.outcome,
        lambda: out.lambda,
        samples_stage1: out.samples_stage1,
        samples_stage2: out.samples_stage2,
        true_l1: l1_distance(p, &cfg.advice)?,
        realized_l2: l2_distance(p, &out.estimate)?,
        realized_tv,
        estimate: out.estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub l1: f64,
    pub trials: usize,
    pub mean_total: f64,
    pub mean_stage1: f64,
    pub mean_stage2: f64,
    pub lasso_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetTable {
    pub rows: Vec<BudgetRow>,
    pub baseline_cost: u64,
}

/// Mean sample use per ℓ1 distance, with the plain empirical-mean cost.
/// Records must share `(d, ε, δ, τ, η)`.
pub fn sample_budget_report(records: &[ExperimentRecord]) -> Result<BudgetTable> {
    let first = records
        .first()
        .ok_or_else(|| Error::param("records", 0.0, "must not be empty"))?;
    let key = |r: &ExperimentRecord| {
        let c = &r.config;
        (c.dim(), c.epsilon, c.delta, c.tau, c.eta)
    };
    if records.iter().any(|r| key(r) != key(first)) {
        return Err(Error::HeterogeneousRecords);
    }
    // bucket on ℓ1 rounded to 1e-9
    let mut buckets: BTreeMap<i64, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        buckets.entry((r.true_l1 * 1e9).round() as i64).or_default().push(r);
    }
    let rows = buckets
        .into_iter()
        .map(|(b, rs)| {
            let n = rs.len() as f64;
            let mean = |f: fn(&ExperimentRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            BudgetRow {
                l1: b as f64 * 1e-9,
                trials: rs.len(),
                mean_total: mean(|r| r.total_samples() as f64),
                mean_stage1: mean(|r| r.samples_stage1 as f64),
                mean_stage2: mean(|r| r.samples_stage2 as f64),
                lasso_fraction: mean(|r| (r.branch == Branch::AdviceLasso) as u8 as f64),
            }
        })
        .collect();
    let c = &first.config;
    Ok(BudgetTable {
        rows,
        baseline_cost: baseline_sample_size_with(
            c.dim(),
            c.epsilon,
            c.delta,
            c.tau,
            c.constants.baseline_constant,
        ),
    })
}

/// Number of adjacent decreases.
pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, eta: f64) -> PipelineConfig {
        PipelineConfig::new(0.3, 1.0 / 3.0, eta, 0.25, MeanVector::constant(d, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn eta_zero_schedule() {
        let s = cfg(400, 0.0).schedule().unwrap();
        assert_eq!(s.k, 256);
        assert!((s.alpha - 0.3 / 20.0 / 0.25).abs() < 1e-15);
        assert!((s.zeta - 24.0).abs() < 1e-12);
        assert!((s.lasso_threshold - 6.0).abs() < 1e-12);
    }

    #[test]
    fn block_size_capped_at_d() {
        let s = cfg(16, 0.1).schedule().unwrap();
        assert_eq!(s.k, 16);
        assert_eq!(s.w, 1);
        assert_eq!(s.levels, 4);
    }

    #[test]
    fn config_validation() {
        let q = MeanVector::constant(8, 0.5).unwrap();
        assert!(PipelineConfig::new(0.3, 0.1, 0.3, 0.25, q.clone()).is_err());
        assert!(PipelineConfig::new(0.3, 0.1, 0.1, 0.7, q.clone()).is_err());
        assert!(PipelineConfig::new(0.0, 0.1, 0.1, 0.25, q.clone()).is_err());
        assert!(PipelineConfig::new(0.3, 1.5, 0.1, 0.25, q).is_err());
    }

    #[test]
    fn baseline_size() {
        // 8 (100 + ln 20) / (0.25 · 0.01)
        assert_eq!(baseline_sample_size(100, 0.1, 0.1, 0.25), 329_587);
    }

    #[test]
    fn small_dimension_audit_and_branch() {
        let p = MeanVector::new((0..16).map(|i| 0.3 + 0.025 * i as f64).collect()).unwrap();
        let c = PipelineConfig::new(0.3, 1.0 / 3.0, 0.1, 0.25, p.clone()).unwrap();
        let rec = run_experiment(&p, &c, Seed(1)).unwrap();
        let s = c.schedule().unwrap();
        assert_eq!(rec.samples_stage1, s.stage1_samples);
        // λ >= 2 sqrt(16) α > ε sqrt(16) here
        assert_eq!(rec.branch, Branch::Baseline);
        assert_eq!(rec.samples_stage2, s.baseline_samples);
        assert!(rec.realized_tv.is_some());
    }

    #[test]
    fn lasso_branch_is_sound_and_audited() {
        let d = 400;
        let p = MeanVector::new((0..d).map(|i| 0.3 + 0.001 * i as f64).collect()).unwrap();
        let mut c = PipelineConfig::new(0.5, 0.2, 0.0, 0.25, p.clone()).unwrap();
        for policy in [Stage2Policy::CapAtBaseline, Stage2Policy::Literal] {
            c.constants.stage2_policy = policy;
            let out = test_and_optimize_mean(&p, &c, Seed(3)).unwrap();
            let s = c.schedule().unwrap();
            assert_eq!(out.branch, Branch::AdviceLasso);
            let l = out.lambda.unwrap();
            assert!(l < s.lasso_threshold);
            assert!(l1_distance(&out.estimate, &p).unwrap() <= l + 1e-9);
            if policy == Stage2Policy::CapAtBaseline {
                assert!(out.samples_stage2 <= s.baseline_samples);
            }
        }
    }

    #[test]
    fn reuse_counts_only_fresh_rows() {
        let p = MeanVector::constant(16, 0.5).unwrap();
        let mut c = PipelineConfig::new(0.3, 1.0 / 3.0, 0.1, 0.25, p.clone()).unwrap();
        c.constants.reuse_stage1 = true;
        let out = test_and_optimize_mean(&p, &c, Seed(2)).unwrap();
        let s = c.schedule().unwrap();
        assert_eq!(
            out.samples_stage2,
            s.baseline_samples.saturating_sub(s.stage1_samples)
        );
    }

    #[test]
    fn budget_report_shapes() {
        let p = MeanVector::constant(16, 0.5).unwrap();
        let c = PipelineConfig::new(0.3, 1.0 / 3.0, 0.1, 0.25, p.clone()).unwrap();
        let r = run_experiment(&p, &c, Seed(9)).unwrap();
        let t = sample_budget_report(std::slice::from_ref(&r)).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].trials, 1);
        let mut other = r.clone();
        other.config.epsilon = 0.2;
        assert_eq!(sample_budget_report(&[r, other]), Err(Error::HeterogeneousRecords));
        assert!(sample_budget_report(&[]).is_err());
    }

    #[test]
    fn inversions() {
        assert_eq!(count_inversions(&[1.0, 2.0, 2.0, 3.0]), 0);
        assert_eq!(count_inversions(&[1.0, 0.5, 2.0, 1.0]), 2);
        assert_eq!(count_inversions(&[]), 0);
    }
}
