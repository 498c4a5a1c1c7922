//! Divergences between product distributions.
//!
//! KL tensorizes over coordinates, so it is computed exactly at any dimension.
//! Total variation does not; it is computed exactly by enumerating `{0,1}^d`
//! for `d <= 24` and otherwise bracketed by the two-sided ℓ2 bounds that hold
//! for τ-balanced pairs.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sampling::MeanVector;

/// Largest dimension accepted by [`tv_exact`].
pub const MAX_EXACT_TV_DIM: usize = 24;

/// Default constant of the TV lower bound `c0 * min(1, ||p - q||_2)`.
pub const DEFAULT_TV_LOWER_CONSTANT: f64 = 0.1;

/// A KL divergence in nats. Infinite when the first argument puts mass
/// outside the support of the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kl {
    Finite(f64),
    Infinite,
}

impl Kl {
    pub fn value(self) -> f64 {
        match self {
            Kl::Finite(v) => v,
            Kl::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Kl::Finite(_))
    }
}

impl std::ops::Add for Kl {
    type Output = Kl;
    fn add(self, rhs: Kl) -> Kl {
        match (self, rhs) {
            (Kl::Finite(a), Kl::Finite(b)) => Kl::Finite(a + b),
            _ => Kl::Infinite,
        }
    }
}

impl Serialize for Kl {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Kl::Finite(v) => s.serialize_f64(*v),
            Kl::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Kl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Kl::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(Kl::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("unexpected KL value {s:?}"))),
        }
    }
}

fn xlogy_ratio(x: f64, y: f64) -> Kl {
    if x == 0.0 {
        Kl::Finite(0.0)
    } else if y == 0.0 {
        Kl::Infinite
    } else {
        Kl::Finite(x * (x / y).ln())
    }
}

/// `kl(a, b) = a ln(a/b) + (1-a) ln((1-a)/(1-b))`, with `0 ln 0 = 0`.
pub fn kl_bernoulli(a: f64, b: f64) -> Kl {
    assert!(
        (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b),
        "kl_bernoulli arguments must be probabilities, got ({a}, {b})"
    );
    xlogy_ratio(a, b) + xlogy_ratio(1.0 - a, 1.0 - b)
}

/// KL divergence between `Ber(p)` and `Ber(q)`.
pub fn kl_product(p: &MeanVector, q: &MeanVector) -> Result<Kl> {
    q.check_dim(p.dim())?;
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(&a, &b)| kl_bernoulli(a, b))
        .fold(Kl::Finite(0.0), |acc, t| acc + t))
}

pub fn l1_distance(p: &MeanVector, q: &MeanVector) -> Result<f64> {
    q.check_dim(p.dim())?;
    Ok(l1(p.as_slice(), q.as_slice()))
}

pub fn l2_distance(p: &MeanVector, q: &MeanVector) -> Result<f64> {
    q.check_dim(p.dim())?;
    Ok(l2(p.as_slice(), q.as_slice()))
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Probability of every point of `{0,1}^k` under `Ber(p)`; bit `j` of the
/// index is coordinate `j`.
fn point_masses(p: &[f64]) -> Vec<f64> {
    let mut table = vec![1.0];
    for &pj in p {
        let mut next = Vec::with_capacity(table.len() * 2);
        next.extend(table.iter().map(|t| t * (1.0 - pj)));
        next.extend(table.iter().map(|t| t * pj));
        table = next;
    }
    table
}

/// Exact `d_TV(Ber(p), Ber(q))` by enumeration of the hypercube.
///
/// The cube is split into a low and a high half; each point mass is the
/// product of two precomputed half-cube masses, so every term is formed from
/// at most `d` exact factors and the `2^d` terms are summed with compensation.
pub fn tv_exact(p: &MeanVector, q: &MeanVector) -> Result<f64> {
    q.check_dim(p.dim())?;
    let d = p.dim();
    if d > MAX_EXACT_TV_DIM {
        return Err(Error::EnumerationTooLarge {
            dim: d,
            max: MAX_EXACT_TV_DIM,
        });
    }
    let lo = d / 2;
    let (p_lo, p_hi) = (point_masses(&p.as_slice()[..lo]), point_masses(&p.as_slice()[lo..]));
    let (q_lo, q_hi) = (point_masses(&q.as_slice()[..lo]), point_masses(&q.as_slice()[lo..]));
    let partials: Vec<f64> = p_hi
        .par_iter()
        .zip(q_hi.par_iter())
        .map(|(&ph, &qh)| {
            let mut acc = CompensatedSum::default();
            for (&pl, &ql) in p_lo.iter().zip(&q_lo) {
                acc.add((ph * pl - qh * ql).abs());
            }
            acc.value()
        })
        .collect();
    let mut total = CompensatedSum::default();
    for x in partials {
        total.add(x);
    }
    Ok(0.5 * total.value())
}

/// `(c0 * min(1, ||p-q||_2), min(1, ||p-q||_2 / sqrt(tau)))` with the default `c0`.
pub fn tv_bounds(p: &MeanVector, q: &MeanVector, tau: f64) -> Result<(f64, f64)> {
    tv_bounds_with(p, q, tau, DEFAULT_TV_LOWER_CONSTANT)
}

/// TV bracket for τ-balanced pairs. The lower constant is heuristic; only the
/// upper bound is a proven inequality for every balanced pair.
pub fn tv_bounds_with(p: &MeanVector, q: &MeanVector, tau: f64, c0: f64) -> Result<(f64, f64)> {
    if !(c0 > 0.0 && c0 <= 0.2) {
        return Err(Error::param("c0", c0, "must lie in (0, 0.2]"));
    }
    q.check_dim(p.dim())?;
    p.check_balanced(tau)?;
    q.check_balanced(tau)?;
    let dist = l2(p.as_slice(), q.as_slice());
    Ok((c0 * dist.min(1.0), (dist / tau.sqrt()).min(1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub tv_exact: Option<f64>,
    pub tv_lower: f64,
    pub tv_upper: f64,
    pub kl: Kl,
    pub l1: f64,
    pub l2: f64,
    pub tau_used: f64,
}

pub fn divergence_report(p: &MeanVector, q: &MeanVector, tau: f64) -> Result<DivergenceReport> {
    let (tv_lower, tv_upper) = tv_bounds(p, q, tau)?;
    let tv = if p.dim() <= MAX_EXACT_TV_DIM {
        Some(tv_exact(p, q)?)
    } else {
        None
    };
    Ok(DivergenceReport {
        tv_exact: tv,
        tv_lower,
        tv_upper,
        kl: kl_product(p, q)?,
        l1: l1(p.as_slice(), q.as_slice()),
        l2: l2(p.as_slice(), q.as_slice()),
        tau_used: tau,
    })
}
