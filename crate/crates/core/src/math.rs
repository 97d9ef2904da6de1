use std::f64::consts::PI;

/// Unnormalized sinc, `sin(x)/x`, with the removable point at zero.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Wrap an angle into (-π, π].
pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// (-1)^k for a non-negative integer.
pub(crate) fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_series_matches_direct_at_switch() {
        let x = 1e-4;
        assert!((sinc(x) - x.sin() / x).abs() < 1e-16);
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn wrap_is_half_open() {
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.3 + 4.0 * PI) - 0.3).abs() < 1e-12);
    }
}
