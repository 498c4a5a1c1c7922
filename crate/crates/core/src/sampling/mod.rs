//! Seeded sampling from product Bernoulli distributions.
//!
//! Samples are stored column-major and bit-packed: coordinate `i` of a batch is
//! a run of `n` bits. Because the coordinates of a product distribution are
//! independent, a batch never has to be generated row by row, and operations
//! that only look at a few coordinates (a block of the partition) or a prefix
//! of a column (a Poisson budget) only pay for those bits.

mod bits;
pub mod poisson;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{label, Seed};

pub use bits::prefix_ones;
pub use poisson::sample_poisson;

/// A point of `[0, 1]^d`: the mean vector of a product distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MeanVector(Vec<f64>);

impl MeanVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidMean { index, value });
            }
        }
        Ok(MeanVector(values))
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Restriction to a contiguous index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.0[range]
    }

    pub fn is_balanced(&self, tau: f64) -> bool {
        self.check_balanced(tau).is_ok()
    }

    /// Errors with the first coordinate outside `[tau, 1 - tau]`.
    pub fn check_balanced(&self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 0.5) {
            return Err(Error::param("tau", tau, "must lie in (0, 1/2]"));
        }
        match self
            .0
            .iter()
            .position(|&v| v < tau || v > 1.0 - tau)
        {
            Some(index) => Err(Error::Unbalanced {
                index,
                value: self.0[index],
                tau,
            }),
            None => Ok(()),
        }
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for MeanVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MeanVector::new(v)
    }
}

impl From<MeanVector> for Vec<f64> {
    fn from(m: MeanVector) -> Vec<f64> {
        m.0
    }
}

impl AsRef<[f64]> for MeanVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Sample access to a product distribution on `{0,1}^d`.
///
/// A stream is identified by a [`Seed`]; `fill_column` must be deterministic
/// in `(coord, stream)` and shorter requests must be prefixes of longer ones.
pub trait ProductSampler: Sync {
    fn dim(&self) -> usize;

    fn fill_column(&self, coord: usize, stream: Seed, len: usize, out: &mut Vec<u64>) -> Result<()>;

    /// Number of ones among `len` draws of `coord`. Equal in distribution to
    /// counting the bits of `fill_column`, but implementations may take a
    /// shortcut that does not reproduce the same sample path.
    fn count_ones(&self, coord: usize, stream: Seed, len: usize) -> Result<u64> {
        let mut buf = Vec::new();
        self.fill_column(coord, stream, len, &mut buf)?;
        Ok(prefix_ones(&buf, len))
    }

    /// Ones within each of the nested prefixes `lens` (non-decreasing) of one
    /// stream. Same distributional contract as `count_ones`.
    fn prefix_counts(&self, coord: usize, stream: Seed, lens: &[usize]) -> Result<Vec<u64>> {
        let Some(&max) = lens.last() else {
            return Ok(Vec::new());
        };
        debug_assert!(lens.windows(2).all(|w| w[0] <= w[1]));
        let mut buf = Vec::new();
        self.fill_column(coord, stream, max, &mut buf)?;
        Ok(lens.iter().map(|&l| prefix_ones(&buf, l)).collect())
    }

    /// Called once per batch with the number of rows drawn.
    fn on_draw(&self, _rows: u64) {}
}

impl<T: ProductSampler + ?Sized> ProductSampler for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn fill_column(&self, coord: usize, stream: Seed, len: usize, out: &mut Vec<u64>) -> Result<()> {
        (**self).fill_column(coord, stream, len, out)
    }
    fn count_ones(&self, coord: usize, stream: Seed, len: usize) -> Result<u64> {
        (**self).count_ones(coord, stream, len)
    }
    fn prefix_counts(&self, coord: usize, stream: Seed, lens: &[usize]) -> Result<Vec<u64>> {
        (**self).prefix_counts(coord, stream, lens)
    }
    fn on_draw(&self, rows: u64) {
        (**self).on_draw(rows)
    }
}

impl ProductSampler for MeanVector {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn fill_column(&self, coord: usize, stream: Seed, len: usize, out: &mut Vec<u64>) -> Result<()> {
        bits::fill_bernoulli(&mut stream.rng(), self.0[coord], len, out);
        Ok(())
    }

    fn count_ones(&self, coord: usize, stream: Seed, len: usize) -> Result<u64> {
        binomial(&mut stream.rng(), len, self.0[coord])
    }

    // Increments over disjoint row ranges are independent binomials.
    fn prefix_counts(&self, coord: usize, stream: Seed, lens: &[usize]) -> Result<Vec<u64>> {
        let mut rng = stream.rng();
        let mut out = Vec::with_capacity(lens.len());
        let (mut at, mut ones) = (0usize, 0u64);
        for &l in lens {
            if l < at {
                return Err(Error::param("prefix length", l as f64, "must be non-decreasing"));
            }
            ones += binomial(&mut rng, l - at, self.0[coord])?;
            at = l;
            out.push(ones);
        }
        Ok(out)
    }
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    let binom = Binomial::new(n as u64, p).map_err(|e| Error::Sampler(e.to_string()))?;
    Ok(binom.sample(rng))
}

/// Counts every row drawn through it.
#[derive(Debug)]
pub struct Metered<S> {
    inner: S,
    rows: AtomicU64,
}

impl<S: ProductSampler> Metered<S> {
    pub fn new(inner: S) -> Self {
        Metered {
            inner,
            rows: AtomicU64::new(0),
        }
    }

    pub fn rows_drawn(&self) -> u64 {
        self.rows.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: ProductSampler> ProductSampler for Metered<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn fill_column(&self, coord: usize, stream: Seed, len: usize, out: &mut Vec<u64>) -> Result<()> {
        self.inner.fill_column(coord, stream, len, out)
    }
    fn count_ones(&self, coord: usize, stream: Seed, len: usize) -> Result<u64> {
        self.inner.count_ones(coord, stream, len)
    }
    fn prefix_counts(&self, coord: usize, stream: Seed, lens: &[usize]) -> Result<Vec<u64>> {
        self.inner.prefix_counts(coord, stream, lens)
    }
    fn on_draw(&self, rows: u64) {
        self.rows.fetch_add(rows, Ordering::SeqCst);
        self.inner.on_draw(rows);
    }
}

/// A drawn batch whose bits are generated on demand.
///
/// Rows are split into consecutive segments of `segment_len` rows; each
/// (coordinate, segment) pair is an independent stream. Drawing the handle
/// registers its rows with the sampler exactly once.
pub struct LazyBatch<'a, S: ProductSampler + ?Sized> {
    sampler: &'a S,
    seed: Seed,
    rows: usize,
    segment_len: usize,
}

impl<'a, S: ProductSampler + ?Sized> LazyBatch<'a, S> {
    pub fn draw(sampler: &'a S, rows: usize, seed: Seed) -> Self {
        Self::draw_segmented(sampler, rows, rows.max(1), seed)
    }

    pub fn draw_segmented(sampler: &'a S, rows: usize, segment_len: usize, seed: Seed) -> Self {
        assert!(segment_len > 0, "segment length must be positive");
        sampler.on_draw(rows as u64);
        LazyBatch {
            sampler,
            seed,
            rows,
            segment_len,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn segments(&self) -> usize {
        self.rows.div_ceil(self.segment_len)
    }

    pub fn segment_len(&self, segment: usize) -> usize {
        let start = segment * self.segment_len;
        self.segment_len.min(self.rows.saturating_sub(start))
    }

    fn stream(&self, coord: usize, segment: usize) -> Seed {
        self.seed.path(&[label::COLUMN, coord as u64, segment as u64])
    }

    /// The first `len` bits of `coord` within `segment`.
    pub fn fill_segment_prefix(
        &self,
        coord: usize,
        segment: usize,
        len: usize,
        out: &mut Vec<u64>,
    ) -> Result<()> {
        debug_assert!(len <= self.segment_len(segment));
        self.sampler.fill_column(coord, self.stream(coord, segment), len, out)
    }

    /// Ones in the first `len` rows of `segment`, read from the bits.
    pub fn segment_prefix_ones(&self, coord: usize, segment: usize, len: usize) -> Result<u64> {
        let mut buf = Vec::new();
        self.fill_segment_prefix(coord, segment, len, &mut buf)?;
        Ok(prefix_ones(&buf, len))
    }

    /// Ones in nested prefixes of `segment`. May use the sampler's shortcut.
    pub fn segment_prefix_counts(&self, coord: usize, segment: usize, lens: &[usize]) -> Result<Vec<u64>> {
        debug_assert!(lens.last().is_none_or(|&l| l <= self.segment_len(segment)));
        self.sampler.prefix_counts(coord, self.stream(coord, segment), lens)
    }

    /// Ones in the whole column. May use the sampler's counting shortcut.
    pub fn column_ones(&self, coord: usize) -> Result<u64> {
        (0..self.segments())
            .map(|s| {
                self.sampler
                    .count_ones(coord, self.stream(coord, s), self.segment_len(s))
            })
            .sum()
    }

    /// Per-coordinate empirical means from column counts.
    pub fn column_means(&self) -> Result<MeanVector> {
        if self.rows == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = self.rows as f64;
        let means = (0..self.dim())
            .into_par_iter()
            .map(|i| self.column_ones(i).map(|c| c as f64 / n))
            .collect::<Result<Vec<_>>>()?;
        MeanVector::new(means)
    }

    /// Generates every bit. Memory is `rows * dim / 8` bytes.
    pub fn materialize(&self) -> Result<SampleBatch> {
        let d = self.dim();
        let wpc = bits::words_for(self.rows);
        let mut data = vec![0u64; wpc * d];
        if wpc > 0 {
            data.par_chunks_mut(wpc)
                .enumerate()
                .try_for_each(|(coord, col)| -> Result<()> {
                    let mut buf = Vec::new();
                    let mut offset = 0;
                    for s in 0..self.segments() {
                        let len = self.segment_len(s);
                        self.fill_segment_prefix(coord, s, len, &mut buf)?;
                        if offset % 64 == 0 {
                            let w0 = offset / 64;
                            col[w0..w0 + buf.len()].copy_from_slice(&buf);
                        } else {
                            for b in 0..len {
                                if bits::get_bit(&buf, b) {
                                    bits::set_bit(col, offset + b);
                                }
                            }
                        }
                        offset += len;
                    }
                    Ok(())
                })?;
        }
        Ok(SampleBatch {
            rows: self.rows,
            dim: d,
            seed: self.seed,
            words_per_column: wpc,
            data,
        })
    }
}

/// `n` binary vectors of dimension `d`, bit-packed by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    rows: usize,
    dim: usize,
    seed: Seed,
    words_per_column: usize,
    data: Vec<u64>,
}

impl SampleBatch {
    /// Builds a batch from explicit 0/1 rows (seed 0).
    pub fn from_rows<R: AsRef<[u8]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let wpc = bits::words_for(n);
        let mut data = vec![0u64; wpc * dim];
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (i, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => bits::set_bit(&mut data[i * wpc..(i + 1) * wpc], r),
                    _ => return Err(Error::param("sample entry", x as f64, "must be 0 or 1")),
                }
            }
        }
        Ok(SampleBatch {
            rows: n,
            dim,
            seed: Seed(0),
            words_per_column: wpc,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn column(&self, coord: usize) -> &[u64] {
        &self.data[coord * self.words_per_column..(coord + 1) * self.words_per_column]
    }

    pub fn get(&self, row: usize, coord: usize) -> u8 {
        bits::get_bit(self.column(coord), row) as u8
    }

    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.dim).map(|i| self.get(row, i)).collect()
    }

    pub fn column_ones(&self, coord: usize) -> u64 {
        prefix_ones(self.column(coord), self.rows)
    }
}

/// Draws `n` samples of `Ber(p)`.
pub fn sample(p: &MeanVector, n: usize, seed: Seed) -> SampleBatch {
    LazyBatch::draw(p, n, seed)
        .materialize()
        .expect("mean-vector sampler is infallible")
}

/// Coordinate-wise fraction of ones.
pub fn empirical_mean(batch: &SampleBatch) -> Result<MeanVector> {
    if batch.rows == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = batch.rows as f64;
    MeanVector::new(
        (0..batch.dim)
            .map(|i| batch.column_ones(i) as f64 / n)
            .collect(),
    )
}

/// How Poissonized counts are realised from the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonMode {
    /// `X_i` is the number of ones among `m_i` fresh draws of coordinate `i`.
    #[default]
    Thinning,
    /// `X_i` counts ones in the first `m_i` rows of a pool of `cap` rows.
    Pool,
}

/// Per-coordinate Poisson budgets and the ones counted within them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonCounts {
    pub counts: Vec<u64>,
    pub budgets: Vec<u64>,
    pub rate: f64,
}

impl PoissonCounts {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }
}

pub(crate) fn draw_budgets(dim: usize, rate: f64, seed: Seed) -> Vec<u64> {
    let mut rng = seed.rng();
    (0..dim).map(|_| sample_poisson(&mut rng, rate)).collect()
}

/// Draws `m_i ~ Poi(rate)` per coordinate and counts ones among `m_i` draws.
///
/// Returns [`Error::CapExceeded`] when some `m_i > cap`; no samples are drawn
/// in that case. Otherwise `cap` rows are charged to the sampler.
pub fn poissonized_counts<S: ProductSampler + ?Sized>(
    source: &S,
    rate: f64,
    cap: u64,
    seed: Seed,
    mode: PoissonMode,
) -> Result<PoissonCounts> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::param("rate", rate, "must be positive and finite"));
    }
    let d = source.dim();
    let budgets = draw_budgets(d, rate, seed.child(label::BUDGETS));
    if let Some((coordinate, &budget)) = budgets.iter().enumerate().find(|(_, &b)| b > cap) {
        return Err(Error::CapExceeded {
            coordinate,
            budget,
            cap,
        });
    }
    let pool = LazyBatch::draw(source, cap as usize, seed.child(label::POOL));
    let counts = budgets
        .par_iter()
        .enumerate()
        .map(|(i, &m)| match mode {
            PoissonMode::Thinning => source.count_ones(i, pool.stream(i, 0), m as usize),
            PoissonMode::Pool => pool.segment_prefix_ones(i, 0, m as usize),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoissonCounts {
        counts,
        budgets,
        rate,
    })
}

/// Uniform draw helper used by instance generators.
pub(crate) fn uniform_in<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
