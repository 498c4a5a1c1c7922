//! Least squares over an ℓ1 ball centred at the advice.
//!
//! `(1/n) Σ ||y_i - b||^2 = ||b - ȳ||^2 + const`, so the constrained minimiser
//! is the Euclidean projection of the empirical mean onto the feasible set.
//! The projection is exact: a sort-based soft threshold for the plain ball,
//! and a breakpoint search on the clipped soft threshold when the box
//! `[0,1]^d` is intersected in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{empirical_mean, MeanVector, SampleBatch};
use crate::util::ceil_count;

/// Multiplier in [`lasso_sample_size`].
pub const DEFAULT_LASSO_CONSTANT: f64 = 32.0;

/// `{ b : ||b - center||_1 <= radius }`, optionally intersected with `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1BallConstraint {
    pub center: MeanVector,
    pub radius: f64,
    pub box_clamp: bool,
}

impl L1BallConstraint {
    pub fn new(center: MeanVector, radius: f64) -> Result<Self> {
        Self::with_box(center, radius, true)
    }

    pub fn with_box(center: MeanVector, radius: f64, box_clamp: bool) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", radius, "must be finite and >= 0"));
        }
        Ok(L1BallConstraint {
            center,
            radius,
            box_clamp,
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let c = self.center.as_slice();
        let in_ball = crate::metrics::l1(x, c) <= self.radius + tol;
        let in_box = !self.box_clamp || x.iter().all(|&v| (-tol..=1.0 + tol).contains(&v));
        in_ball && in_box
    }
}

/// Euclidean projection of `v` onto the constraint set.
pub fn project_l1_ball(v: &[f64], constraint: &L1BallConstraint) -> Result<Vec<f64>> {
    let c = constraint.center.as_slice();
    if v.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: v.len(),
        });
    }
    if constraint.radius == 0.0 {
        return Ok(c.to_vec());
    }
    Ok(if constraint.box_clamp {
        project_ball_box(v, c, constraint.radius)
    } else {
        project_ball(v, c, constraint.radius)
    })
}

fn project_ball(v: &[f64], c: &[f64], radius: f64) -> Vec<f64> {
    let diff: Vec<f64> = v.iter().zip(c).map(|(x, y)| x - y).collect();
    let total: f64 = diff.iter().map(|x| x.abs()).sum();
    if total <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = diff.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    // largest rho with mags[rho-1] > (cumsum_rho - radius) / rho
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (j + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    diff.iter()
        .zip(c)
        .map(|(&dv, &cv)| cv + dv.signum() * (dv.abs() - theta).max(0.0))
        .collect()
}

/// Projection onto the ball intersected with the box. For a threshold `mu`
/// each coordinate solves a one-dimensional convex problem whose minimiser is
/// the soft-thresholded value clipped to `[0,1]`; the total ℓ1 displacement
/// `g(mu) = Σ min((a_i - mu)+, u_i)` is piecewise linear and nonincreasing, and
/// `mu` is the smallest root of `g(mu) = radius`.
fn project_ball_box(v: &[f64], c: &[f64], radius: f64) -> Vec<f64> {
    let d = v.len();
    let mut a = Vec::with_capacity(d);
    let mut room = Vec::with_capacity(d);
    let mut sign = Vec::with_capacity(d);
    for (&x, &cv) in v.iter().zip(c) {
        let dv = x - cv;
        a.push(dv.abs());
        if dv >= 0.0 {
            room.push(1.0 - cv);
            sign.push(1.0);
        } else {
            room.push(cv);
            sign.push(-1.0);
        }
    }
    let g = |mu: f64| -> f64 {
        a.iter()
            .zip(&room)
            .map(|(&ai, &ui)| (ai - mu).max(0.0).min(ui))
            .sum()
    };
    let mu = if g(0.0) <= radius {
        0.0
    } else {
        let mut bps: Vec<f64> = Vec::with_capacity(2 * d + 1);
        bps.push(0.0);
        for (&ai, &ui) in a.iter().zip(&room) {
            bps.push(ai);
            if ai - ui > 0.0 {
                bps.push(ai - ui);
            }
        }
        bps.sort_unstable_by(f64::total_cmp);
        bps.dedup();
        // first breakpoint with g <= radius; g(bps[0]) > radius and g(max a) = 0
        let (mut lo, mut hi) = (0usize, bps.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if g(bps[mid]) <= radius {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (b0, b1) = (bps[lo], bps[hi]);
        let (g0, g1) = (g(b0), g(b1));
        if g0 == g1 {
            b1
        } else {
            b0 + (g0 - radius) * (b1 - b0) / (g0 - g1)
        }
    };
    (0..d)
        .map(|i| c[i] + sign[i] * (a[i] - mu).max(0.0).min(room[i]))
        .collect()
}

/// `argmin_{||b - q||_1 <= r, b in [0,1]^d} (1/n) Σ ||y_i - b||^2`.
pub fn constrained_least_squares(batch: &SampleBatch, q: &MeanVector, r: f64) -> Result<MeanVector> {
    let constraint = L1BallConstraint::new(q.clone(), r)?;
    let x = constrained_least_squares_with(batch, &constraint)?;
    // the box keeps every entry in [0,1] up to rounding
    MeanVector::new(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Same as [`constrained_least_squares`] with an explicit constraint; without
/// the box the minimiser may leave `[0,1]^d`.
pub fn constrained_least_squares_with(
    batch: &SampleBatch,
    constraint: &L1BallConstraint,
) -> Result<Vec<f64>> {
    constraint.center.check_dim(batch.dim())?;
    let mean = empirical_mean(batch)?;
    let x = project_l1_ball(mean.as_slice(), constraint)?;
    if cfg!(debug_assertions) && batch.rows() * batch.dim() <= 1 << 16 {
        let pg = projected_gradient(batch, constraint, 500, 0.25)?;
        let gap = crate::metrics::l2(&x, &pg);
        debug_assert!(gap <= 1e-6, "projected gradient disagrees by {gap}");
    }
    Ok(x)
}

/// Projected gradient descent on the sample objective `(1/n) Σ ||y_i - b||^2`,
/// started at the center. Used as a cross-check of the closed-form reduction.
pub fn projected_gradient(
    batch: &SampleBatch,
    constraint: &L1BallConstraint,
    iterations: usize,
    step: f64,
) -> Result<Vec<f64>> {
    if batch.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    constraint.center.check_dim(batch.dim())?;
    let n = batch.rows() as f64;
    let sums: Vec<f64> = (0..batch.dim()).map(|i| batch.column_ones(i) as f64).collect();
    let mut b = constraint.center.as_slice().to_vec();
    for _ in 0..iterations {
        // gradient: (2/n) Σ_i (b - y_i) = 2 b - (2/n) Σ_i y_i
        let stepped: Vec<f64> = b
            .iter()
            .zip(&sums)
            .map(|(&bj, &sj)| bj - step * (2.0 * bj - 2.0 * sj / n))
            .collect();
        b = project_l1_ball(&stepped, constraint)?;
    }
    Ok(b)
}

/// `⌈32 r² / ε⁴ · ln(2d/δ)⌉`: enough samples for `4r·sqrt(2 ln(2d/δ)/n) <= ε`.
pub fn lasso_sample_size(r: f64, epsilon: f64, delta: f64, d: usize) -> Result<u64> {
    lasso_sample_size_with(r, epsilon, delta, d, DEFAULT_LASSO_CONSTANT)
}

pub fn lasso_sample_size_with(r: f64, epsilon: f64, delta: f64, d: usize, constant: f64) -> Result<u64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param("r", r, "must be finite and >= 0"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", epsilon, "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1)"));
    }
    if d == 0 {
        return Err(Error::param("d", 0.0, "must be positive"));
    }
    if !(constant > 0.0) {
        return Err(Error::param("lasso constant", constant, "must be positive"));
    }
    if r == 0.0 {
        return Ok(0);
    }
    let n = constant * r * r / epsilon.powi(4) * (2.0 * d as f64 / delta).ln();
    Ok(ceil_count(n))
}

/// High-probability bound on `||p̂ - p||_2`. The squared error is at most
/// `4r·sqrt(2 ln(2d/δ)/n)`.
pub fn lasso_error_bound(r: f64, n: u64, delta: f64, d: usize) -> f64 {
    (4.0 * r * (2.0 * (2.0 * d as f64 / delta).ln() / n as f64).sqrt()).sqrt()
}
