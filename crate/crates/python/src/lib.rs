//! Python bindings: lists of floats in, plain values and small result
//! classes out. Long-running calls release the GIL.

use advice_learn_core::approx_l1::L1Outcome;
use advice_learn_core::instances;
use advice_learn_core::lasso::{self, L1BallConstraint};
use advice_learn_core::metrics;
use advice_learn_core::pipeline::{self, Branch, PipelineConfig, PipelineConstants, Stage2Policy};
use advice_learn_core::sampling::{self, SampleBatch};
use advice_learn_core::tester;
use advice_learn_core::{MeanVector, Seed};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(advice_learn, AdviceLearnError, PyValueError);

fn err(e: advice_learn_core::Error) -> PyErr {
    AdviceLearnError::new_err(e.to_string())
}

fn means(v: Vec<f64>) -> PyResult<MeanVector> {
    MeanVector::new(v).map_err(err)
}

#[pyclass(frozen, get_all)]
struct TesterVerdict {
    accepted: bool,
    statistic: f64,
    samples_used: u64,
    accepts: usize,
    repetitions: usize,
}

#[pymethods]
impl TesterVerdict {
    fn __repr__(&self) -> String {
        format!(
            "TesterVerdict(accepted={}, statistic={}, samples_used={}, accepts={}/{})",
            self.accepted, self.statistic, self.samples_used, self.accepts, self.repetitions
        )
    }
}

#[pyclass(frozen, get_all)]
struct L1Estimate {
    failed: bool,
    lambda_: Option<f64>,
    block_levels: Vec<Option<f64>>,
    samples_used: u64,
}

#[pymethods]
impl L1Estimate {
    fn __repr__(&self) -> String {
        format!(
            "L1Estimate(failed={}, lambda_={:?}, samples_used={})",
            self.failed, self.lambda_, self.samples_used
        )
    }
}

#[pyclass(frozen, get_all)]
struct LearnResult {
    branch: String,
    lambda_: Option<f64>,
    samples_stage1: u64,
    samples_stage2: u64,
    estimate: Vec<f64>,
    true_l1: f64,
    realized_l2: f64,
    realized_tv: Option<f64>,
}

#[pymethods]
impl LearnResult {
    #[getter]
    fn total_samples(&self) -> u64 {
        self.samples_stage1 + self.samples_stage2
    }

    fn __repr__(&self) -> String {
        format!(
            "LearnResult(branch={:?}, lambda_={:?}, samples={}+{}, realized_l2={})",
            self.branch, self.lambda_, self.samples_stage1, self.samples_stage2, self.realized_l2
        )
    }
}

/// Draws `n` rows from the product distribution with means `p`.
#[pyfunction]
#[pyo3(signature = (p, n, seed=0))]
fn sample(py: Python<'_>, p: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<Vec<u8>>> {
    let p = means(p)?;
    Ok(py.detach(|| {
        let batch = sampling::sample(&p, n, Seed(seed));
        (0..batch.rows()).map(|r| batch.row(r)).collect()
    }))
}

#[pyfunction]
#[pyo3(signature = (p, q, epsilon, delta, seed=0))]
fn tolerant_test(py: Python<'_>, p: Vec<f64>, q: Vec<f64>, epsilon: f64, delta: f64, seed: u64) -> PyResult<TesterVerdict> {
    let (p, q) = (means(p)?, means(q)?);
    let v = py.detach(|| tester::tmt(&p, &q, epsilon, delta, Seed(seed))).map_err(err)?;
    Ok(TesterVerdict {
        accepted: v.accepted(),
        statistic: v.statistic,
        samples_used: v.samples_used,
        accepts: v.accepts,
        repetitions: v.repetitions,
    })
}

#[pyfunction]
#[pyo3(signature = (p, q, k, alpha, zeta, delta, seed=0))]
#[allow(clippy::too_many_arguments)]
fn approx_l1(
    py: Python<'_>,
    p: Vec<f64>,
    q: Vec<f64>,
    k: usize,
    alpha: f64,
    zeta: f64,
    delta: f64,
    seed: u64,
) -> PyResult<L1Estimate> {
    let (p, q) = (means(p)?, means(q)?);
    let out = py
        .detach(|| advice_learn_core::approx_l1::approx_l1(&p, &q, k, alpha, zeta, delta, Seed(seed)))
        .map_err(err)?;
    Ok(L1Estimate {
        failed: out.outcome == L1Outcome::Fail,
        lambda_: out.lambda,
        block_levels: out.block_levels,
        samples_used: out.samples_used,
    })
}

/// Euclidean projection onto `{x : ||x - center||_1 <= radius}`, intersected
/// with the unit box unless `box_clamp` is false.
#[pyfunction]
#[pyo3(signature = (v, center, radius, box_clamp=true))]
fn project_l1_ball(v: Vec<f64>, center: Vec<f64>, radius: f64, box_clamp: bool) -> PyResult<Vec<f64>> {
    let ball = L1BallConstraint::with_box(means(center)?, radius, box_clamp).map_err(err)?;
    lasso::project_l1_ball(&v, &ball).map_err(err)
}

#[pyfunction]
fn constrained_least_squares(rows: Vec<Vec<u8>>, q: Vec<f64>, r: f64) -> PyResult<Vec<f64>> {
    let q = means(q)?;
    let batch = SampleBatch::from_rows(q.dim(), &rows).map_err(err)?;
    Ok(lasso::constrained_least_squares(&batch, &q, r).map_err(err)?.into_inner())
}

#[pyfunction]
fn lasso_sample_size(r: f64, epsilon: f64, delta: f64, d: usize) -> PyResult<u64> {
    lasso::lasso_sample_size(r, epsilon, delta, d).map_err(err)
}

#[pyfunction]
fn tv_exact(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    metrics::tv_exact(&means(p)?, &means(q)?).map_err(err)
}

#[pyfunction]
fn tv_bounds(p: Vec<f64>, q: Vec<f64>, tau: f64) -> PyResult<(f64, f64)> {
    metrics::tv_bounds(&means(p)?, &means(q)?, tau).map_err(err)
}

/// Product KL divergence; `inf` when the supports differ.
#[pyfunction]
fn kl_product(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    Ok(metrics::kl_product(&means(p)?, &means(q)?).map_err(err)?.value())
}

#[pyfunction]
fn unbalanced_instance(d: usize, epsilon: f64, subset: Vec<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (p, q) = instances::unbalanced_instance(d, epsilon, &subset).map_err(err)?;
    Ok((p.into_inner(), q.into_inner()))
}

#[pyfunction]
fn balanced_instance(d: usize, epsilon: f64, lambda_: f64, subset: Vec<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (p, q, _) = instances::balanced_instance(d, epsilon, lambda_, &subset).map_err(err)?;
    Ok((p.into_inner(), q.into_inner()))
}

#[pyfunction]
#[pyo3(signature = (d, k, min_symdiff, m, seed=0, max_attempts=10_000))]
fn gv_code(d: usize, k: usize, min_symdiff: usize, m: usize, seed: u64, max_attempts: usize) -> PyResult<Vec<Vec<usize>>> {
    Ok(instances::gv_code(d, k, min_symdiff, m, Seed(seed), max_attempts).map_err(err)?.sets)
}

/// Runs the two-stage learner against known means `p` with advice `q`.
#[pyfunction]
#[pyo3(signature = (p, q, epsilon, delta, eta, tau, seed=0, literal_stage2=false))]
#[allow(clippy::too_many_arguments)]
fn learn(
    py: Python<'_>,
    p: Vec<f64>,
    q: Vec<f64>,
    epsilon: f64,
    delta: f64,
    eta: f64,
    tau: f64,
    seed: u64,
    literal_stage2: bool,
) -> PyResult<LearnResult> {
    let p = means(p)?;
    let mut cfg = PipelineConfig::new(epsilon, delta, eta, tau, means(q)?).map_err(err)?;
    if literal_stage2 {
        cfg.constants = PipelineConstants {
            stage2_policy: Stage2Policy::Literal,
            ..cfg.constants
        };
    }
    let rec = py.detach(|| pipeline::run_experiment(&p, &cfg, Seed(seed))).map_err(err)?;
    Ok(LearnResult {
        branch: match rec.branch {
            Branch::AdviceLasso => "advice-lasso".into(),
            Branch::Baseline => "baseline".into(),
        },
        lambda_: rec.lambda,
        samples_stage1: rec.samples_stage1,
        samples_stage2: rec.samples_stage2,
        true_l1: rec.true_l1,
        realized_l2: rec.realized_l2,
        realized_tv: rec.realized_tv,
        estimate: rec.estimate.into_inner(),
    })
}

#[pymodule]
fn advice_learn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AdviceLearnError", m.py().get_type::<AdviceLearnError>())?;
    m.add_class::<TesterVerdict>()?;
    m.add_class::<L1Estimate>()?;
    m.add_class::<LearnResult>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(tolerant_test, m)?)?;
    m.add_function(wrap_pyfunction!(approx_l1, m)?)?;
    m.add_function(wrap_pyfunction!(project_l1_ball, m)?)?;
    m.add_function(wrap_pyfunction!(constrained_least_squares, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(tv_exact, m)?)?;
    m.add_function(wrap_pyfunction!(tv_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(kl_product, m)?)?;
    m.add_function(wrap_pyfunction!(unbalanced_instance, m)?)?;
    m.add_function(wrap_pyfunction!(balanced_instance, m)?)?;
    m.add_function(wrap_pyfunction!(gv_code, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    Ok(())
}
