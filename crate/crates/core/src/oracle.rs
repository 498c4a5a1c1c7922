//! Slow reference implementations used to check the fast paths.
//!
//! Nothing here shares code with the routines it checks: projections come
//! from KKT face enumeration and Dykstra's alternating scheme with a
//! bisection ball step, divergences from direct enumeration of the cube, and
//! Poisson counts from `rand_distr`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::sampling::MeanVector;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projection onto `{x : ||x - c||_1 <= r}` by enumerating the `3^d` sign
/// patterns of `x - c` and solving each face in closed form. For `d <= 12`.
pub fn project_ball_by_faces(v: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let d = v.len();
    assert!(d <= 12, "face enumeration is exponential in d");
    let dist: f64 = v.iter().zip(c).map(|(a, b)| (a - b).abs()).sum();
    if dist <= r {
        return v.to_vec();
    }
    let tol = 1e-12 * (1.0 + r);
    let mut best = c.to_vec();
    let mut best_obj = sq_dist(v, c);
    let mut signs = vec![0i8; d];
    let mut x = vec![0.0; d];
    for code in 0..3usize.pow(d as u32) {
        let mut t = code;
        for s in signs.iter_mut() {
            *s = (t % 3) as i8 - 1;
            t /= 3;
        }
        let support = signs.iter().filter(|&&s| s != 0).count();
        if support == 0 {
            continue;
        }
        let proj: f64 = (0..d).map(|i| signs[i] as f64 * (v[i] - c[i])).sum();
        let mu = (proj - r) / support as f64;
        if mu < 0.0 {
            continue;
        }
        let mut feasible = true;
        for i in 0..d {
            let s = signs[i] as f64;
            x[i] = if signs[i] == 0 { c[i] } else { v[i] - mu * s };
            if s * (x[i] - c[i]) < -tol {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let obj = sq_dist(v, &x);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
    }
    best
}

/// Ball projection by bisection on the soft threshold.
fn project_ball_bisect(v: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let diff: Vec<f64> = v.iter().zip(c).map(|(a, b)| a - b).collect();
    let mass = |t: f64| diff.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
    if mass(0.0) <= r {
        return v.to_vec();
    }
    let (mut lo, mut hi) = (0.0, diff.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    diff.iter()
        .zip(c)
        .map(|(&dv, &cv)| cv + dv.signum() * (dv.abs() - hi).max(0.0))
        .collect()
}

/// Projection onto the ℓ1 ball intersected with `[0,1]^d` by Dykstra's
/// algorithm. Stops when neither the iterates nor the correction terms move
/// by `1e-15` in a round, or after `max_iter` rounds.
pub fn project_ball_box_dykstra(v: &[f64], c: &[f64], r: f64, max_iter: usize) -> Vec<f64> {
    let d = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    for _ in 0..max_iter {
        let shifted: Vec<f64> = (0..d).map(|i| x[i] + p[i]).collect();
        let y = project_ball_bisect(&shifted, c, r);
        let mut moved = 0.0f64;
        for i in 0..d {
            let next = shifted[i] - y[i];
            moved = moved.max((next - p[i]).abs());
            p[i] = next;
        }
        for i in 0..d {
            let z = (y[i] + q[i]).clamp(0.0, 1.0);
            let next = y[i] + q[i] - z;
            moved = moved.max((z - x[i]).abs()).max((next - q[i]).abs());
            q[i] = next;
            x[i] = z;
        }
        if moved < 1e-15 {
            break;
        }
    }
    x
}

/// `(1/2) Σ_x |P(x) - Q(x)|` with each mass formed directly. For `d <= 20`.
pub fn tv_bruteforce(p: &MeanVector, q: &MeanVector) -> Result<f64> {
    q.check_dim(p.dim())?;
    let d = p.dim();
    if d > 20 {
        return Err(Error::EnumerationTooLarge { dim: d, max: 20 });
    }
    let mut total = 0.0;
    for x in 0..1usize << d {
        let (mut pm, mut qm) = (1.0, 1.0);
        for i in 0..d {
            if x >> i & 1 == 1 {
                pm *= p.get(i);
                qm *= q.get(i);
            } else {
                pm *= 1.0 - p.get(i);
                qm *= 1.0 - q.get(i);
            }
        }
        total += (pm - qm).abs();
    }
    Ok(0.5 * total)
}

/// `Σ_x P(x) ln(P(x)/Q(x))` by enumeration, for interior means and `d <= 20`.
pub fn kl_bruteforce(p: &MeanVector, q: &MeanVector) -> Result<f64> {
    q.check_dim(p.dim())?;
    let d = p.dim();
    if d > 20 {
        return Err(Error::EnumerationTooLarge { dim: d, max: 20 });
    }
    let mut total = 0.0;
    for x in 0..1usize << d {
        let (mut pm, mut qm) = (1.0, 1.0);
        for i in 0..d {
            let bit = x >> i & 1 == 1;
            pm *= if bit { p.get(i) } else { 1.0 - p.get(i) };
            qm *= if bit { q.get(i) } else { 1.0 - q.get(i) };
        }
        if pm > 0.0 {
            total += pm * (pm / qm).ln();
        }
    }
    Ok(total)
}

/// Independent `X_i ~ Poi(m p_i)`.
pub fn poisson_counts<R: Rng + ?Sized>(rng: &mut R, p: &MeanVector, m: f64) -> Vec<u64> {
    p.as_slice()
        .iter()
        .map(|&pi| {
            let rate = m * pi;
            if rate == 0.0 {
                0
            } else {
                Poisson::new(rate).expect("positive rate").sample(rng) as u64
            }
        })
        .collect()
}

/// `E[Z] = m² ||p - q||²`.
pub fn z_mean(p: &MeanVector, q: &MeanVector, m: f64) -> f64 {
    m * m * sq_dist(p.as_slice(), q.as_slice())
}

/// `Var[Z] = 4m³ Σ p_i (p_i - q_i)² + 2m² Σ p_i²`.
pub fn z_variance(p: &MeanVector, q: &MeanVector, m: f64) -> f64 {
    let (a, b) = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .fold((0.0, 0.0), |(a, b), (&pi, &qi)| {
            (a + pi * (pi - qi) * (pi - qi), b + pi * pi)
        });
    4.0 * m.powi(3) * a + 2.0 * m * m * b
}

/// Sample mean and unbiased sample variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
