//! Hard instance families and random workloads.
//!
//! The two lower-bound families index `p_S` by a subset `S` drawn from a code
//! with large pairwise symmetric difference; advice is the common centre `q`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{uniform_in, MeanVector};
use crate::seed::Seed;
use crate::util::ceil_count;

/// `M` equal-size subsets of `{0, …, d-1}` with pairwise symmetric difference
/// at least `min_symdiff`. Each set is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCode {
    pub sets: Vec<Vec<usize>>,
    pub subset_size: usize,
    pub min_symdiff: usize,
}

impl SubsetCode {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Checks every size and every pair.
    pub fn is_valid(&self) -> bool {
        self.sets.iter().all(|s| s.len() == self.subset_size)
            && self.sets.iter().enumerate().all(|(i, a)| {
                self.sets[i + 1..]
                    .iter()
                    .all(|b| symmetric_difference(a, b) >= self.min_symdiff)
            })
    }
}

/// `|A ⊕ B|` for sorted index lists.
pub fn symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * common
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn from_indices(d: usize, idx: &[usize]) -> Self {
        let mut w = vec![0u64; d.div_ceil(64)];
        for &i in idx {
            w[i / 64] |= 1 << (i % 64);
        }
        BitSet(w)
    }

    fn symdiff(&self, other: &BitSet) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Rejection-sampled code: random `k`-subsets are kept when they are far
/// from every kept set. Gives up after `max_attempts` consecutive rejections.
pub fn gv_code(
    d: usize,
    k: usize,
    min_symdiff: usize,
    m: usize,
    seed: Seed,
    max_attempts: usize,
) -> Result<SubsetCode> {
    if k > d {
        return Err(Error::param("k", k as f64, "subset size must not exceed d"));
    }
    if min_symdiff > 2 * k {
        return Err(Error::param(
            "min_symdiff",
            min_symdiff as f64,
            "two k-subsets differ in at most 2k elements",
        ));
    }
    if m < 1 {
        return Err(Error::param("M", 0.0, "must be at least 1"));
    }
    let mut rng = seed.rng();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut bits: Vec<BitSet> = Vec::with_capacity(m);
    let mut misses = 0;
    while sets.len() < m {
        let mut s = index::sample(&mut rng, d, k).into_vec();
        s.sort_unstable();
        let b = BitSet::from_indices(d, &s);
        if bits.iter().all(|o| o.symdiff(&b) >= min_symdiff) {
            sets.push(s);
            bits.push(b);
            misses = 0;
        } else {
            misses += 1;
            if misses >= max_attempts {
                return Err(Error::CodeBudgetExhausted {
                    achieved: sets.len(),
                    requested: m,
                });
            }
        }
    }
    Ok(SubsetCode {
        sets,
        subset_size: k,
        min_symdiff,
    })
}

fn check_subset(d: usize, s: &[usize]) -> Result<()> {
    let mut seen = vec![false; d];
    for &e in s {
        if e >= d || seen[e] {
            return Err(Error::SubsetElement { element: e, dim: d });
        }
        seen[e] = true;
    }
    Ok(())
}

/// `p_S[i] = 2ε/d` on `S`, `ε/d` elsewhere; advice `q = ε/d` everywhere.
pub fn unbalanced_instance(d: usize, epsilon: f64, s: &[usize]) -> Result<(MeanVector, MeanVector)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param("epsilon", epsilon, "must lie in (0, 1]"));
    }
    if d < 10 {
        return Err(Error::param("d", d as f64, "must be at least 10"));
    }
    check_subset(d, s)?;
    let base = epsilon / d as f64;
    let mut p = vec![base; d];
    for &i in s {
        p[i] = 2.0 * base;
    }
    Ok((MeanVector::new(p)?, MeanVector::constant(d, base)?))
}

/// `k = ⌈λ²/ε²⌉` for the balanced family.
pub fn balanced_subset_size(epsilon: f64, lambda: f64) -> u64 {
    ceil_count(lambda * lambda / (epsilon * epsilon))
}

/// `p_S[i] = 1/2 + λ/k` on `S`, `1/2` elsewhere; advice `q = 1/2`.
pub fn balanced_instance(
    d: usize,
    epsilon: f64,
    lambda: f64,
    s: &[usize],
) -> Result<(MeanVector, MeanVector, usize)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", epsilon, "must be positive"));
    }
    if !(lambda >= 100.0 * epsilon && lambda.is_finite()) {
        return Err(Error::param("lambda", lambda, "must be at least 100 epsilon"));
    }
    let k = balanced_subset_size(epsilon, lambda) as usize;
    if s.len() != k {
        return Err(Error::SubsetSize {
            expected: k,
            found: s.len(),
        });
    }
    let shift = lambda / k as f64;
    if shift >= 0.25 {
        return Err(Error::param("lambda / k", shift, "must be below 1/4"));
    }
    check_subset(d, s)?;
    let mut p = vec![0.5; d];
    for &i in s {
        p[i] = 0.5 + shift;
    }
    Ok((MeanVector::new(p)?, MeanVector::constant(d, 0.5)?, k))
}

/// Independent uniform means on `[tau, 1 - tau]`.
pub fn random_balanced(d: usize, tau: f64, seed: Seed) -> Result<MeanVector> {
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(Error::param("tau", tau, "must lie in (0, 1/2]"));
    }
    let mut rng = seed.rng();
    MeanVector::new((0..d).map(|_| uniform_in(&mut rng, tau, 1.0 - tau)).collect())
}

/// Moves `support` random coordinates of `p` by `l1/support` each, choosing
/// a direction that stays inside `[tau, 1 - tau]`. The result is at ℓ1
/// distance `l1` from `p`.
pub fn perturb_l1(p: &MeanVector, l1: f64, support: usize, tau: f64, seed: Seed) -> Result<MeanVector> {
    let d = p.dim();
    if !(l1 >= 0.0 && l1.is_finite()) {
        return Err(Error::param("l1", l1, "must be finite and >= 0"));
    }
    if support < 1 || support > d {
        return Err(Error::param("support", support as f64, "must lie in [1, d]"));
    }
    let shift = l1 / support as f64;
    let mut rng = seed.rng();
    let mut q = p.as_slice().to_vec();
    for i in index::sample(&mut rng, d, support) {
        let up = q[i] + shift <= 1.0 - tau;
        let down = q[i] - shift >= tau;
        q[i] = match (up, down) {
            (true, true) if rng.random::<bool>() => q[i] + shift,
            (true, true) | (false, true) => q[i] - shift,
            (true, false) => q[i] + shift,
            (false, false) => {
                return Err(Error::param("l1", l1, "per-coordinate shift leaves the balanced range"))
            }
        };
    }
    MeanVector::new(q)
}

/// The vertex of `[0,1]^d` farthest from `p`.
pub fn farthest_corner(p: &MeanVector) -> MeanVector {
    MeanVector::new(
        p.as_slice()
            .iter()
            .map(|&x| if x < 0.5 { 1.0 } else { 0.0 })
            .collect(),
    )
    .expect("corners are valid means")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{kl_product, l1_distance, l2_distance};

    #[test]
    fn single_set_code() {
        let c = gv_code(10, 4, 8, 1, Seed(1), 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sets[0].len(), 4);
        assert!(c.sets[0].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn code_d40() {
        let c = gv_code(40, 20, 5, 16, Seed(2), 10_000).unwrap();
        assert_eq!(c.len(), 16);
        assert!(c.is_valid());
    }

    #[test]
    fn impossible_codes() {
        assert!(gv_code(10, 3, 7, 2, Seed(0), 100).is_err());
        assert!(gv_code(5, 6, 0, 1, Seed(0), 100).is_err());
        // a 4-set holds at most two disjoint pairs
        let e = gv_code(4, 2, 4, 3, Seed(0), 200).unwrap_err();
        assert!(matches!(e, Error::CodeBudgetExhausted { achieved: 2, requested: 3 }));
    }

    #[test]
    fn symmetric_difference_counts() {
        assert_eq!(symmetric_difference(&[0, 1, 2], &[1, 2, 3]), 2);
        assert_eq!(symmetric_difference(&[], &[4]), 1);
        assert_eq!(symmetric_difference(&[5, 9], &[5, 9]), 0);
    }

    #[test]
    fn unbalanced_examples() {
        let (p, q) = unbalanced_instance(20, 0.5, &[]).unwrap();
        assert_eq!(p, q);
        let (p, q) = unbalanced_instance(20, 0.5, &[1, 5, 7, 11]).unwrap();
        assert!((l1_distance(&p, &q).unwrap() - 0.1).abs() < 1e-12);
        assert!(p.as_slice().iter().all(|&x| x == 0.025 || x == 0.05));
        assert!(unbalanced_instance(9, 0.5, &[]).is_err());
        assert!(unbalanced_instance(20, 0.5, &[20]).is_err());
        assert!(unbalanced_instance(20, 0.5, &[3, 3]).is_err());
    }

    #[test]
    fn balanced_subset_size_example() {
        assert_eq!(balanced_subset_size(0.01, 1.0), 10_000);
    }

    #[test]
    fn balanced_examples() {
        let (eps, lambda) = (0.01, 1.0);
        let d = 12_000;
        let code = gv_code(d, 10_000, 100, 3, Seed(4), 100).unwrap();
        let (p, q, k) = balanced_instance(d, eps, lambda, &code.sets[0]).unwrap();
        assert_eq!(k, 10_000);
        assert!((l1_distance(&p, &q).unwrap() - lambda).abs() < 1e-12);
        assert!(p.is_balanced(0.25));
        let (pt, _, _) = balanced_instance(d, eps, lambda, &code.sets[1]).unwrap();
        let sd = symmetric_difference(&code.sets[0], &code.sets[1]) as f64;
        let shift = lambda / k as f64;
        assert!((l2_distance(&p, &pt).unwrap() - shift * sd.sqrt()).abs() < 1e-12);
        assert!(kl_product(&p, &pt).unwrap().value() <= 8.0 * shift * shift * sd);
        assert!(matches!(
            balanced_instance(d, eps, lambda, &[]),
            Err(Error::SubsetSize { expected: 10_000, found: 0 })
        ));
        assert!(balanced_instance(d, eps, 0.5, &code.sets[0]).is_err());
    }

    #[test]
    fn perturbation_hits_target_distance() {
        let p = random_balanced(200, 0.25, Seed(1)).unwrap();
        assert!(p.is_balanced(0.25));
        for (l1, support) in [(0.0, 200), (1.0, 200), (4.0, 50), (0.2, 1)] {
            let q = perturb_l1(&p, l1, support, 0.25, Seed(2)).unwrap();
            assert!((l1_distance(&p, &q).unwrap() - l1).abs() < 1e-9);
            assert!(q.is_balanced(0.25));
        }
        assert!(perturb_l1(&p, 100.0, 1, 0.25, Seed(2)).is_err());
    }

    #[test]
    fn corner_is_far() {
        let p = MeanVector::new(vec![0.3, 0.7, 0.5]).unwrap();
        assert_eq!(farthest_corner(&p).as_slice(), &[1.0, 0.0, 0.0]);
    }
}
