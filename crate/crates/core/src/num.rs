const TOL: f64 = 1e-9;

/// Ceiling that ignores floating error just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= TOL * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Floor that ignores floating error just below an integer.
pub(crate) fn floor_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= TOL * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerant_rounding() {
        assert_eq!(ceil_tol(0.1 * 500.0), 50.0);
        assert_eq!(ceil_tol(50.000_000_000_1), 50.0);
        assert_eq!(ceil_tol(50.2), 51.0);
        assert_eq!(floor_tol(49.999_999_999_99), 50.0);
        assert_eq!(floor_tol(49.5), 49.0);
    }
}
