//! Bit-packed Bernoulli generation.
//!
//! 64 Bernoulli(p) lanes are produced at once by comparing 64 uniform fractions
//! against the binary expansion of `p`, most significant bit first. A lane is
//! settled as soon as its uniform bit differs from the bit of `p`, so about
//! `log2(64) + 2` random words are consumed per 64 draws regardless of `p`,
//! and the result is exact to 64 bits of `p`.

use rand::RngCore;

/// `p` as a 64-bit binary fraction. `None` means `p == 1`.
#[inline]
pub(crate) fn fixed_point(p: f64) -> Option<u64> {
    if p >= 1.0 {
        None
    } else if p <= 0.0 {
        Some(0)
    } else {
        // exact: scaling by a power of two, p < 1
        Some((p * 18_446_744_073_709_551_616.0) as u64)
    }
}

#[inline]
pub(crate) fn bernoulli_word<R: RngCore + ?Sized>(rng: &mut R, threshold: Option<u64>) -> u64 {
    let Some(t) = threshold else {
        return !0;
    };
    let mut ones = 0u64;
    let mut undecided = !0u64;
    for b in (0..64u32).rev() {
        let rest = if b == 63 { t } else { t & ((1u64 << (b + 1)) - 1) };
        if rest == 0 {
            // remaining bits of p are zero: every undecided uniform is >= p
            break;
        }
        let r = rng.next_u64();
        if (t >> b) & 1 == 1 {
            ones |= undecided & !r;
            undecided &= r;
        } else {
            undecided &= !r;
        }
        if undecided == 0 {
            break;
        }
    }
    ones
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Fills `out` with `len` Bernoulli(p) bits, LSB first. Unused high bits of the
/// last word are cleared. Shorter requests on the same stream are prefixes of
/// longer ones.
pub(crate) fn fill_bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64, len: usize, out: &mut Vec<u64>) {
    let t = fixed_point(p);
    let nw = words_for(len);
    out.clear();
    out.reserve(nw);
    for _ in 0..nw {
        out.push(bernoulli_word(rng, t));
    }
    mask_tail(out, len);
}

#[inline]
pub(crate) fn mask_tail(words: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// Number of ones among the first `len` bits.
#[inline]
pub fn prefix_ones(words: &[u64], len: usize) -> u64 {
    let full = len / 64;
    let mut c: u64 = words[..full].iter().map(|w| w.count_ones() as u64).sum();
    let rem = len % 64;
    if rem != 0 {
        c += (words[full] & ((1u64 << rem) - 1)).count_ones() as u64;
    }
    c
}

#[inline]
pub(crate) fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], i: usize) {
    words[i / 64] |= 1u64 << (i % 64);
}
