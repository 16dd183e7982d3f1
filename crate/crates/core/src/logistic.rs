//! Overflow-free logistic function.

/// Magnitude beyond which `exp` overflows (or underflows to a subnormal) in
/// `f64`, so the logistic is already saturated to 0 or 1.
const SATURATION: f64 = 709.0;

/// `1 / (1 + e^(-x))`, evaluated without ever forming a huge exponential.
///
/// Non-negative arguments use `1/(1+e^-x)`, negative ones `e^x/(1+e^x)`;
/// arguments past ±709 short-circuit to exactly 1 or 0.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x > SATURATION {
        1.0
    } else if x < -SATURATION {
        0.0
    } else if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_one_half() {
        assert_eq!(logistic(0.0), 0.5);
    }

    #[test]
    fn saturates_without_overflow() {
        assert_eq!(logistic(1e300), 1.0);
        assert_eq!(logistic(-1e300), 0.0);
        assert_eq!(logistic(f64::INFINITY), 1.0);
        assert_eq!(logistic(f64::NEG_INFINITY), 0.0);
        assert!(logistic(-700.0) > 0.0);
    }

    #[test]
    fn symmetric() {
        for &x in &[0.1, 1.0, 3.7, 25.0, 400.0] {
            let s = logistic(x) + logistic(-x);
            assert!((s - 1.0).abs() < 1e-15, "x = {x}: {s}");
        }
    }
}
