//! Logistic reparameterisation that maps a box `[min, max]` onto the real
//! line, so an unconstrained optimiser can never leave the box.

use crate::error::{Error, Result};
use crate::logistic::logistic;

/// Fraction of the box width kept clear of each bound.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

fn check_box(min: f64, max: f64) -> Result<()> {
    if min.is_finite() && max.is_finite() && min < max {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "bounds must be finite with min < max, got [{min}, {max}]"
        )))
    }
}

fn interior(p: f64, min: f64, max: f64) -> f64 {
    let eps = BOUNDARY_MARGIN * (max - min);
    p.clamp(min + eps, max - eps)
}

/// `ln((p - min) / (max - p))`. Values on a bound are first pulled inside by
/// [`BOUNDARY_MARGIN`] of the width.
pub fn to_unbounded(p: f64, min: f64, max: f64) -> Result<f64> {
    check_box(min, max)?;
    if !(min..=max).contains(&p) {
        return Err(Error::InvalidParameter(format!("{p} lies outside [{min}, {max}]")));
    }
    let p = interior(p, min, max);
    Ok(((p - min) / (max - p)).ln())
}

/// `min + (max - min) * logistic(u)`, kept strictly inside the box.
pub fn from_unbounded(u: f64, min: f64, max: f64) -> f64 {
    interior(min + (max - min) * logistic(u), min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_maps_to_zero() {
        assert_eq!(to_unbounded(3.5, 2.0, 5.0).unwrap(), 0.0);
        assert_eq!(from_unbounded(0.0, 2.0, 5.0), 3.5);
    }

    #[test]
    fn saturation_stays_inside() {
        let hi = from_unbounded(1e6, 2.0, 5.0);
        assert!(hi < 5.0 && 5.0 - hi <= 3.0 * BOUNDARY_MARGIN * 1.01);
        let lo = from_unbounded(-1e6, 2.0, 5.0);
        assert!(lo > 2.0);
    }

    #[test]
    fn closed_form_round_trip() {
        let u = to_unbounded(0.4597, 0.3, 3.5).unwrap();
        let expect = (0.1597f64 / 3.0403).ln();
        assert!((u - expect).abs() < 1e-12);
        assert!((u + 2.946_414).abs() < 1e-6);
        assert!((from_unbounded(u, 0.3, 3.5) - 0.4597).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_box() {
        assert!(to_unbounded(5.1, 2.0, 5.0).is_err());
        assert!(to_unbounded(1.0, 2.0, 2.0).is_err());
        assert!(to_unbounded(2.0, 2.0, 5.0).unwrap().is_finite());
        assert!(to_unbounded(5.0, 2.0, 5.0).unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn round_trip(min in -1e3f64..1e3, width in 1e-3f64..1e3, q in 1e-6f64..(1.0 - 1e-6)) {
            let max = min + width;
            let p = min + q * width;
            let back = from_unbounded(to_unbounded(p, min, max).unwrap(), min, max);
            prop_assert!((back - p).abs() <= 1e-12 * width.max(p.abs()).max(1.0), "{p} -> {back}");
        }

        #[test]
        fn any_real_lands_strictly_inside(u in proptest::num::f64::ANY, min in -10.0f64..10.0, width in 1e-6f64..100.0) {
            prop_assume!(!u.is_nan());
            let p = from_unbounded(u, min, min + width);
            prop_assert!(p > min && p < min + width);
        }
    }
}
