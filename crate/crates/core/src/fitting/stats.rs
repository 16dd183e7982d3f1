//! Least-squares information criteria.
//!
//! Both use the Gaussian-likelihood form with the residual variance profiled
//! out: `n ln(χ²/n)` plus a parameter penalty.

use crate::error::{Error, Result};

fn log_likelihood_term(n_data: usize, chi_square: f64) -> Result<f64> {
    if n_data == 0 {
        return Err(Error::InvalidInput(
            "information criteria need at least one data point".into(),
        ));
    }
    if !(chi_square.is_finite() && chi_square >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "chi-square must be finite and >= 0, got {chi_square}"
        )));
    }
    let n = n_data as f64;
    // ln(0) = -inf: an exact fit has an unbounded likelihood.
    Ok(n * (chi_square / n).ln())
}

/// `n ln(χ²/n) + 2k`. Returns `-inf` when `χ² = 0`.
pub fn aic(n_data: usize, chi_square: f64, n_varys: usize) -> Result<f64> {
    Ok(log_likelihood_term(n_data, chi_square)? + 2.0 * n_varys as f64)
}

/// `n ln(χ²/n) + ln(n) k`. Returns `-inf` when `χ² = 0`.
pub fn bic(n_data: usize, chi_square: f64, n_varys: usize) -> Result<f64> {
    Ok(log_likelihood_term(n_data, chi_square)? + (n_data as f64).ln() * n_varys as f64)
}

/// `χ² / (n - k)`.
pub fn reduced_chi_square(n_data: usize, chi_square: f64, n_varys: usize) -> Result<f64> {
    if n_data <= n_varys {
        return Err(Error::InvalidInput(format!(
            "{n_data} data points cannot constrain {n_varys} varying parameters"
        )));
    }
    Ok(chi_square / (n_data - n_varys) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_statistics() {
        let aic = aic(585, 1.3049e10, 10).unwrap();
        let bic = bic(585, 1.3049e10, 10).unwrap();
        assert!((aic - 9918.6).abs() <= 0.5, "{aic}");
        assert!((bic - 9962.3).abs() <= 0.5, "{bic}");
        let red = reduced_chi_square(585, 1.3049e10, 10).unwrap();
        assert!((red / 22694231.4 - 1.0).abs() < 1e-4, "{red}");
    }

    #[test]
    fn unit_variance_zeroes_the_likelihood_term() {
        assert_eq!(aic(100, 100.0, 0).unwrap(), 0.0);
        assert_eq!(bic(100, 100.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(aic(10, 0.0, 2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(bic(10, 0.0, 2).unwrap(), f64::NEG_INFINITY);
        assert!(aic(0, 1.0, 0).is_err());
        assert!(bic(10, -1.0, 0).is_err());
        assert!(reduced_chi_square(10, 1.0, 10).is_err());
    }

    proptest! {
        #[test]
        fn bic_minus_aic(n in 1usize..5000, chi in 1e-3f64..1e12, k in 0usize..30) {
            let diff = bic(n, chi, k).unwrap() - aic(n, chi, k).unwrap();
            let expect = ((n as f64).ln() - 2.0) * k as f64;
            prop_assert!((diff - expect).abs() <= 1e-9 * aic(n, chi, k).unwrap().abs().max(1.0));
        }
    }
}
