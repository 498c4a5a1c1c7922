//! Poisson variates: sequential inversion below rate 30, Hörmann's PTRS
//! transformed rejection at and above it.

use rand::Rng;

const INVERSION_LIMIT: f64 = 30.0;

pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    debug_assert!(rate >= 0.0 && rate.is_finite());
    if rate <= 0.0 {
        0
    } else if rate < INVERSION_LIMIT {
        inversion(rng, rate)
    } else {
        ptrs(rng, rate)
    }
}

fn inversion<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= rate / k as f64;
        let next = cdf + p;
        if next == cdf {
            // tail mass below double precision
            break;
        }
        cdf = next;
    }
    k
}

fn ptrs<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact summation below 16, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 16 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let x = k as f64;
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}
