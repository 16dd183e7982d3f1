//! Goodness-of-fit report for an (observed, predicted) pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::stats::aic;

/// The ten evaluation metrics, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r2: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub explained_variance: f64,
    pub max_error: f64,
    pub msle: f64,
    pub median_absolute_error: f64,
    /// In percent; points with a zero true value are left out.
    pub median_absolute_percentage_error: f64,
    pub aic: f64,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 10] = [
        "r2",
        "mae",
        "mse",
        "rmse",
        "explained_variance",
        "max_error",
        "msle",
        "median_absolute_error",
        "median_absolute_percentage_error",
        "aic",
    ];

    pub fn entries(&self) -> [(&'static str, f64); 10] {
        let v = [
            self.r2,
            self.mae,
            self.mse,
            self.rmse,
            self.explained_variance,
            self.max_error,
            self.msle,
            self.median_absolute_error,
            self.median_absolute_percentage_error,
            self.aic,
        ];
        std::array::from_fn(|k| (Self::NAMES[k], v[k]))
    }
}

/// Computes every metric. `n_varys` only enters the AIC term.
pub fn evaluate(y_true: &[f64], y_pred: &[f64], n_varys: usize) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least two points, got {n}")));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contain non-finite values".into()));
    }
    if let Some(v) = y_true.iter().chain(y_pred).find(|&&v| v <= -1.0) {
        return Err(Error::InvalidInput(format!("msle needs every value > -1, found {v}")));
    }
    let nf = n as f64;
    let residuals: Vec<f64> = y_true.iter().zip(y_pred).map(|(t, p)| t - p).collect();
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();

    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let mean_true = y_true.iter().sum::<f64>() / nf;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean_true).powi(2)).sum();
    let mean_res = residuals.iter().sum::<f64>() / nf;
    let var_res = residuals.iter().map(|r| (r - mean_res).powi(2)).sum::<f64>() / nf;

    let mse = ss_res / nf;
    let pct: Vec<f64> = y_true
        .iter()
        .zip(&abs)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, a)| a / t.abs() * 100.0)
        .collect();

    Ok(MetricsReport {
        r2: one_minus_ratio(ss_res, ss_tot),
        mae: abs.iter().sum::<f64>() / nf,
        mse,
        rmse: mse.sqrt(),
        explained_variance: one_minus_ratio(var_res, ss_tot / nf),
        max_error: abs.iter().copied().fold(0.0, f64::max),
        msle: y_true
            .iter()
            .zip(y_pred)
            .map(|(t, p)| (t.ln_1p() - p.ln_1p()).powi(2))
            .sum::<f64>()
            / nf,
        median_absolute_error: median(abs),
        median_absolute_percentage_error: median(pct),
        aic: aic(n, ss_res, n_varys)?,
    })
}

/// `1 - num/den`; a constant truth scores 1 when matched exactly, else 0.
fn one_minus_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - num / den
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
