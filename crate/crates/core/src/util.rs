/// Ceiling that ignores floating-point noise just above an integer, so that
/// e.g. `32 * ln(e)` maps to 32 and not 33.
pub(crate) fn ceil_count(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let snapped = x.round();
    if (x - snapped).abs() <= 1e-9 * x.max(1.0) {
        snapped as u64
    } else {
        x.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snaps_near_integers() {
        assert_eq!(ceil_count(32.000_000_000_000_7), 32);
        assert_eq!(ceil_count(31.999_999_999_999_9), 32);
        assert_eq!(ceil_count(32.01), 33);
        assert_eq!(ceil_count(0.0), 0);
        assert_eq!(ceil_count(-3.0), 0);
        assert_eq!(ceil_count(0.2), 1);
    }
}
