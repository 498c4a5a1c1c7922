//! Certified upper estimate of `||p - q||_1` from block-wise tolerant tests.
//!
//! Coordinates are cut into `w = ⌈d/k⌉` contiguous blocks. On each block the
//! tester runs a doubling ladder `α, 2α, 4α, …` until the first Accept at
//! level `o_j`; then `λ = 2 Σ_j sqrt(|B_j|) o_j`. A block that rejects every
//! level makes the whole call return `Fail`.
//!
//! All tests read one shared sample set `S` of `r · chunk` rows, split into
//! `r` chunks of `chunk = ⌈16 sqrt(k)/(3α²)⌉` rows. Repetition `t` of every
//! tester call takes its Poissonized counts from prefixes of chunk `t`, so
//! the pool cap of each call is `chunk`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{draw_budgets, LazyBatch, MeanVector, ProductSampler};
use crate::seed::{label, Seed};
use crate::tester::{self, majority, Verdict, DEFAULT_C, DEFAULT_THRESHOLD_FACTOR};
use crate::util::ceil_count;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub blocks: Vec<Range<usize>>,
    pub k: usize,
    pub w: usize,
}

impl BlockPartition {
    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }
}

pub fn partition_blocks(d: usize, k: usize) -> Result<BlockPartition> {
    if k < 1 || k > d {
        return Err(Error::param("k", k as f64, "block size must lie in [1, d]"));
    }
    let blocks: Vec<_> = (0..d).step_by(k).map(|s| s..(s + k).min(d)).collect();
    Ok(BlockPartition {
        w: blocks.len(),
        blocks,
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxL1Params {
    pub k: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub delta: f64,
    pub c: f64,
    pub threshold_factor: f64,
    /// Scales the per-chunk sample count; 1 gives the stated formula.
    pub sample_multiplier: f64,
}

impl ApproxL1Params {
    pub fn new(k: usize, alpha: f64, zeta: f64, delta: f64) -> Result<Self> {
        let p = ApproxL1Params {
            k,
            alpha,
            zeta,
            delta,
            c: DEFAULT_C,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            sample_multiplier: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::param("k", self.k as f64, "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", self.alpha, "must be positive"));
        }
        if !(self.zeta > 2.0 * self.alpha && self.zeta.is_finite()) {
            return Err(Error::param("zeta", self.zeta, "must exceed 2 alpha"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", self.delta, "must lie in (0, 1)"));
        }
        if !(self.sample_multiplier >= 1.0 && self.sample_multiplier.is_finite()) {
            return Err(Error::param(
                "sample_multiplier",
                self.sample_multiplier,
                "must be at least 1",
            ));
        }
        // reuse the tester's checks on c and threshold_factor
        tester::TesterConfig::with_constants(self.alpha, 0.5, self.c, self.threshold_factor)?;
        Ok(())
    }

    /// `⌈log2(ζ/α)⌉`.
    pub fn level_count(&self) -> usize {
        ceil_count((self.zeta / self.alpha).log2()) as usize
    }

    /// `l_i = 2^{i-1} α` for `i = 1..=L`.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.level_count())
            .map(|i| self.alpha * 2f64.powi(i as i32))
            .collect()
    }

    /// `δ' = δ / (w L)`.
    pub fn delta_prime(&self, d: usize) -> f64 {
        self.delta / (d.div_ceil(self.k) * self.level_count()) as f64
    }

    pub fn repetitions(&self, d: usize) -> usize {
        tester::repetitions(self.delta_prime(d))
    }

    /// Rows per chunk: `⌈multiplier · 16 sqrt(k) / (3α²)⌉`.
    pub fn chunk(&self) -> u64 {
        ceil_count(
            self.sample_multiplier * 16.0 * (self.k as f64).sqrt() / (3.0 * self.alpha * self.alpha),
        )
    }

    /// `|S| = chunk · (1 + ⌈ln(12 w L / δ)⌉)`.
    pub fn sample_size(&self, d: usize) -> u64 {
        self.chunk() * self.repetitions(d) as u64
    }

    fn rate(&self, block_len: usize, level: f64) -> f64 {
        self.c * (block_len as f64).sqrt() / (level * level)
    }

    fn threshold(&self, block_len: usize, level: f64) -> f64 {
        self.threshold_factor * self.c * self.c * block_len as f64 / (level * level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum L1Outcome {
    Fail,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    /// Zero-based ladder index.
    pub level: usize,
    pub epsilon: f64,
    pub accepts: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTrace {
    pub block: Range<usize>,
    pub levels: Vec<LevelTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxL1Outcome {
    pub outcome: L1Outcome,
    pub lambda: Option<f64>,
    /// Accepted level per block; `None` where the ladder ran out.
    pub block_levels: Vec<Option<f64>>,
    pub samples_used: u64,
    pub trace: Vec<BlockTrace>,
    /// Ones per coordinate over all of `S`; only kept on request.
    #[serde(skip)]
    pub(crate) column_ones: Option<Vec<u64>>,
}

impl ApproxL1Outcome {
    pub fn is_fail(&self) -> bool {
        self.outcome == L1Outcome::Fail
    }
}

/// `2 Σ_j sqrt(|B_j|) o_j`.
pub fn lambda_from_levels(partition: &BlockPartition, levels: &[f64]) -> f64 {
    2.0 * partition
        .blocks
        .iter()
        .zip(levels)
        .map(|(b, o)| (b.len() as f64).sqrt() * o)
        .sum::<f64>()
}

/// Upper end of the sandwich: `2 sqrt(k) (⌈d/k⌉ α + 2 ||p - q||_1)`.
pub fn sandwich_upper(d: usize, k: usize, alpha: f64, l1: f64) -> f64 {
    2.0 * (k as f64).sqrt() * (d.div_ceil(k) as f64 * alpha + 2.0 * l1)
}

/// Runs the estimator with default tester constants.
pub fn approx_l1<S: ProductSampler + ?Sized>(
    source: &S,
    q: &MeanVector,
    k: usize,
    alpha: f64,
    zeta: f64,
    delta: f64,
    seed: Seed,
) -> Result<ApproxL1Outcome> {
    approx_l1_with(source, q, &ApproxL1Params::new(k, alpha, zeta, delta)?, seed)
}

pub fn approx_l1_with<S: ProductSampler + ?Sized>(
    source: &S,
    q: &MeanVector,
    params: &ApproxL1Params,
    seed: Seed,
) -> Result<ApproxL1Outcome> {
    approx_l1_inner(source, q, params, seed, false)
}

pub(crate) fn approx_l1_inner<S: ProductSampler + ?Sized>(
    source: &S,
    q: &MeanVector,
    params: &ApproxL1Params,
    seed: Seed,
    keep_ones: bool,
) -> Result<ApproxL1Outcome> {
    params.validate()?;
    q.check_dim(source.dim())?;
    let d = q.dim();
    let partition = partition_blocks(d, params.k)?;
    let r = params.repetitions(d);
    let chunk = params.chunk();
    let rows = usize::try_from(chunk * r as u64)
        .map_err(|_| Error::param("sample size", (chunk * r as u64) as f64, "exceeds usize"))?;
    let s = LazyBatch::draw_segmented(source, rows, chunk as usize, seed.child(label::POOL));
    let budget_seed = seed.child(label::BUDGETS);

    let trace = partition
        .blocks
        .par_iter()
        .enumerate()
        .map(|(j, block)| {
            run_block(&s, q.as_slice(), block.clone(), j, params, r, budget_seed, keep_ones)
        })
        .collect::<Result<Vec<_>>>()?;
    let (trace, ones): (Vec<_>, Vec<_>) = trace.into_iter().unzip();

    let block_levels: Vec<Option<f64>> = trace
        .iter()
        .map(|t| {
            t.levels
                .last()
                .filter(|l| l.verdict == Verdict::Accept)
                .map(|l| l.epsilon)
        })
        .collect();
    let levels: Option<Vec<f64>> = block_levels.iter().copied().collect();
    let (outcome, lambda) = match levels {
        Some(o) => (L1Outcome::Estimate, Some(lambda_from_levels(&partition, &o))),
        None => (L1Outcome::Fail, None),
    };
    Ok(ApproxL1Outcome {
        outcome,
        lambda,
        block_levels,
        samples_used: s.rows() as u64,
        trace,
        column_ones: keep_ones.then(|| ones.concat()),
    })
}

const ATTEMPTS: usize = 2;

/// Runs the ladder on one block.
///
/// Budgets for every (level, repetition, attempt) are drawn up front. For
/// each coordinate and chunk, the counts at all those budgets come from one
/// call, so they are nested prefixes of the same rows. Statistics are summed
/// in coordinate order so the result does not depend on scheduling. With
/// `keep_ones`, the full chunk length joins each prefix list and the block's
/// per-coordinate totals over `S` are returned as well.
#[allow(clippy::too_many_arguments)]
fn run_block<S: ProductSampler + ?Sized>(
    s: &LazyBatch<'_, S>,
    q: &[f64],
    block: Range<usize>,
    j: usize,
    params: &ApproxL1Params,
    r: usize,
    budget_seed: Seed,
    keep_ones: bool,
) -> Result<(BlockTrace, Vec<u64>)> {
    let b = block.len();
    let levels = params.levels();
    let n_levels = levels.len();
    let chunk = params.chunk();
    let slot = |i: usize, t: usize, a: usize| (i * r + t) * ATTEMPTS + a;
    let n_slots = n_levels * r * ATTEMPTS;

    let mut budgets = Vec::with_capacity(n_slots);
    for (i, &l) in levels.iter().enumerate() {
        for t in 0..r {
            for a in 0..ATTEMPTS {
                let seed = budget_seed.path(&[j as u64, i as u64, t as u64, a as u64]);
                let m = draw_budgets(b, params.rate(b, l), seed);
                debug_assert_eq!(budgets.len(), slot(i, t, a));
                budgets.push(m);
            }
        }
    }
    let usable: Vec<bool> = budgets
        .iter()
        .map(|m| m.iter().all(|&x| x <= chunk))
        .collect();

    let per_coord = block
        .clone()
        .into_par_iter()
        .map(|coord| -> Result<(Vec<f64>, u64)> {
            let off = coord - block.start;
            let mut z = vec![0.0; n_slots];
            let mut total = 0;
            let mut order: Vec<(usize, usize)> = Vec::with_capacity(n_levels * ATTEMPTS);
            for t in 0..r {
                order.clear();
                for i in 0..n_levels {
                    for a in 0..ATTEMPTS {
                        let k = slot(i, t, a);
                        if usable[k] {
                            order.push((budgets[k][off] as usize, k));
                        }
                    }
                }
                order.sort_unstable();
                let mut lens: Vec<usize> = order.iter().map(|&(l, _)| l).collect();
                if keep_ones {
                    lens.push(s.segment_len(t));
                }
                let ones = s.segment_prefix_counts(coord, t, &lens)?;
                for (&(_, k), &x) in order.iter().zip(&ones) {
                    let level = levels[k / (r * ATTEMPTS)];
                    z[k] = tester::z_term(x, q[coord], params.rate(b, level));
                }
                if keep_ones {
                    total += ones.last().copied().unwrap_or(0);
                }
            }
            Ok((z, total))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut z = vec![0.0; n_slots];
    let mut block_ones = Vec::with_capacity(if keep_ones { b } else { 0 });
    for (zc, ones) in &per_coord {
        if keep_ones {
            block_ones.push(*ones);
        }
        for (acc, v) in z.iter_mut().zip(zc) {
            *acc += v;
        }
    }

    let mut trace = Vec::new();
    for (i, &l) in levels.iter().enumerate() {
        let threshold = params.threshold(b, l);
        let accepts = (0..r)
            .filter(|&t| {
                (0..ATTEMPTS)
                    .map(|a| slot(i, t, a))
                    .find(|&k| usable[k])
                    .is_some_and(|k| z[k] <= threshold)
            })
            .count();
        let verdict = majority(accepts, r);
        trace.push(LevelTrace {
            level: i,
            epsilon: l,
            accepts,
            verdict,
        });
        if verdict == Verdict::Accept {
            break;
        }
    }
    Ok((BlockTrace { block, levels: trace }, block_ones))
}
