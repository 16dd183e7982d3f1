//! Bounded least-squares calibration of the model against an observed series.

pub mod lm;
pub mod stats;
pub mod transform;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{simulate, ModelContext, Trajectory};
use crate::model::FitParameters;

pub use lm::{ConvergenceStatus, LmSettings};

/// Bounds and starting value of one calibrated quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(alias = "value")]
    pub initial_value: f64,
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_vary")]
    pub vary: bool,
}

fn default_vary() -> bool {
    true
}

impl ParamSpec {
    pub fn new(name: &str, initial_value: f64, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            initial_value,
            min,
            max,
            vary: true,
        }
    }

    pub fn fixed(mut self) -> Self {
        self.vary = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidParameter(format!(
                "{}: need finite min < max, got [{}, {}]",
                self.name, self.min, self.max
            )));
        }
        if !(self.min..=self.max).contains(&self.initial_value) {
            return Err(Error::InvalidParameter(format!(
                "{}: initial value {} outside [{}, {}]",
                self.name, self.initial_value, self.min, self.max
            )));
        }
        Ok(())
    }

    /// The ten two-wave parameters with the published starting values and
    /// bounds, in canonical order.
    pub fn india_defaults() -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("r0_start", 3.0, 2.0, 5.0),
            ParamSpec::new("k", 2.5, 0.01, 5.0),
            ParamSpec::new("a1", 90.0, 0.0, 350.0),
            ParamSpec::new("b1", 90.0, 0.0, 350.0),
            ParamSpec::new("a2", 90.0, 0.0, 350.0),
            ParamSpec::new("b2", 90.0, 0.0, 350.0),
            ParamSpec::new("r0_end", 0.9, 0.3, 3.5),
            ParamSpec::new("prob_i_to_c", 0.05, 0.01, 0.1),
            ParamSpec::new("prob_c_to_d", 0.5, 0.05, 0.8),
            ParamSpec::new("s", 0.003, 1e-3, 0.01),
        ]
    }

    /// Same bounds as [`ParamSpec::india_defaults`], starting from `params`.
    pub fn india_bounds_at(params: &FitParameters) -> Result<Vec<ParamSpec>> {
        Self::india_defaults()
            .into_iter()
            .map(|mut s| {
                s.initial_value = params
                    .get(&s.name)
                    .ok_or_else(|| Error::InvalidParameter(format!("parameters lack {}", s.name)))?;
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}

/// Which model output an observed series is compared with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    CumulativeDeaths,
    DailyDeaths,
    CumulativeConfirmed,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::CumulativeDeaths => "cumulative_deaths",
            SeriesKind::DailyDeaths => "daily_deaths",
            SeriesKind::CumulativeConfirmed => "cumulative_confirmed",
        }
    }

    pub fn is_cumulative(self) -> bool {
        !matches!(self, SeriesKind::DailyDeaths)
    }

    /// The matching model series, one value per trajectory point.
    pub fn extract(self, traj: &Trajectory) -> Vec<f64> {
        match self {
            SeriesKind::CumulativeDeaths => traj.cumulative_deaths(),
            SeriesKind::DailyDeaths => traj.daily_deaths.clone(),
            SeriesKind::CumulativeConfirmed => traj.cumulative_infections.clone(),
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative_deaths" => Ok(SeriesKind::CumulativeDeaths),
            "daily_deaths" => Ok(SeriesKind::DailyDeaths),
            "cumulative_confirmed" => Ok(SeriesKind::CumulativeConfirmed),
            other => Err(Error::InvalidInput(format!(
                "unknown series kind {other:?}; expected cumulative_deaths, daily_deaths or cumulative_confirmed"
            ))),
        }
    }
}

/// Daily observations starting at model day 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl ObservedSeries {
    pub fn new(start_date: NaiveDate, values: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "observed counts must be finite and >= 0, found {v}"
            )));
        }
        if kind.is_cumulative() && values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!(
                "{kind} series must be non-decreasing; clean it first"
            )));
        }
        Ok(Self {
            start_date,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `model - observed` on the observed days (unweighted).
pub fn residuals(params: &FitParameters, observed: &ObservedSeries, ctx: &ModelContext) -> Result<Vec<f64>> {
    let traj = simulate(params, ctx, observed.len())?;
    Ok(residuals_from(&traj, observed))
}

fn residuals_from(traj: &Trajectory, observed: &ObservedSeries) -> Vec<f64> {
    observed
        .kind
        .extract(traj)
        .iter()
        .zip(&observed.values)
        .map(|(m, o)| m - o)
        .collect()
}

/// Final state of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    pub initial_value: f64,
    pub min: f64,
    pub max: f64,
    pub vary: bool,
}

/// Optimiser outcome and least-squares statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: String,
    pub convergence_status: ConvergenceStatus,
    pub success: bool,
    pub n_function_evals: usize,
    pub n_iterations: usize,
    pub n_data: usize,
    pub n_varys: usize,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub aic: f64,
    pub bic: f64,
    pub params: Vec<FittedParam>,
    pub best_params: FitParameters,
    /// Cost at the start and after every accepted step.
    pub accepted_costs: Vec<f64>,
    pub settings: LmSettings,
}

/// Fits with default optimiser settings.
pub fn fit(specs: &[ParamSpec], observed: &ObservedSeries, ctx: &ModelContext) -> Result<FitResult> {
    fit_with(specs, observed, ctx, &LmSettings::default())
}

pub fn fit_with(
    specs: &[ParamSpec],
    observed: &ObservedSeries,
    ctx: &ModelContext,
    settings: &LmSettings,
) -> Result<FitResult> {
    if observed.is_empty() {
        return Err(Error::InvalidInput("observed series is empty".into()));
    }
    ctx.validate()?;
    calibrate(specs, observed.len(), |p| residuals(p, observed, ctx), settings)
}

/// Generic bounded calibration: minimises the squared norm of
/// `residual_fn(params)` over the varying specs. `residual_fn` must return
/// `n_data` values.
pub fn calibrate<F>(specs: &[ParamSpec], n_data: usize, residual_fn: F, settings: &LmSettings) -> Result<FitResult>
where
    F: Fn(&FitParameters) -> Result<Vec<f64>> + Sync,
{
    for s in specs {
        s.validate()?;
    }
    let base = FitParameters::from_named(specs.iter().map(|s| (s.name.as_str(), s.initial_value)))?;
    let free: Vec<&ParamSpec> = specs.iter().filter(|s| s.vary).collect();
    let n_varys = free.len();
    if n_data <= n_varys {
        return Err(Error::InvalidInput(format!(
            "{n_data} data points cannot constrain {n_varys} varying parameters"
        )));
    }
    let x0 = free
        .iter()
        .map(|s| transform::to_unbounded(s.initial_value, s.min, s.max))
        .collect::<Result<Vec<_>>>()?;

    // Coordinates still at their start map back to the exact initial value
    // rather than a rounded round trip through the transform.
    let assemble = |x: &[f64]| -> FitParameters {
        let mut p = base.clone();
        for ((s, u), u0) in free.iter().zip(x).zip(&x0) {
            let v = if u == u0 {
                s.initial_value
            } else {
                transform::from_unbounded(*u, s.min, s.max)
            };
            p.set(&s.name, v).expect("validated name");
        }
        p
    };
    let objective = |x: &[f64]| -> Result<Vec<f64>> {
        let p = assemble(x);
        let r = residual_fn(&p).map_err(|e| Error::Simulation {
            params: p.named_values(),
            source: Box::new(e),
        })?;
        if r.len() != n_data {
            return Err(Error::LengthMismatch {
                expected: n_data,
                actual: r.len(),
            });
        }
        Ok(r)
    };

    let report = lm::minimize(&objective, &x0, settings)?;
    let best = assemble(&report.x);
    let chi_square = report.cost;
    let params = specs
        .iter()
        .map(|s| FittedParam {
            name: s.name.clone(),
            value: best.get(&s.name).expect("validated name"),
            initial_value: s.initial_value,
            min: s.min,
            max: s.max,
            vary: s.vary,
        })
        .collect();

    Ok(FitResult {
        method: "least_squares".into(),
        convergence_status: report.status,
        success: report.status.converged(),
        n_function_evals: report.n_evaluations,
        n_iterations: report.n_iterations,
        n_data,
        n_varys,
        chi_square,
        reduced_chi_square: stats::reduced_chi_square(n_data, chi_square, n_varys)?,
        aic: stats::aic(n_data, chi_square, n_varys)?,
        bic: stats::bic(n_data, chi_square, n_varys)?,
        params,
        best_params: best,
        accepted_costs: report.accepted_costs,
        settings: *settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PopulationConfig;
    use std::sync::Mutex;

    fn ctx() -> ModelContext {
        ModelContext::new(PopulationConfig::with_default_beds(5e7))
    }

    fn observed_from(params: &FitParameters, ctx: &ModelContext, n: usize, kind: SeriesKind) -> ObservedSeries {
        let traj = simulate(params, ctx, n).unwrap();
        ObservedSeries {
            start_date: NaiveDate::from_ymd_opt(2020, 1, 22).unwrap(),
            values: kind.extract(&traj),
            kind,
        }
    }

    #[test]
    fn self_generated_series_has_zero_residuals() {
        let c = ctx();
        let p = FitParameters::india_reference();
        for kind in [
            SeriesKind::CumulativeDeaths,
            SeriesKind::DailyDeaths,
            SeriesKind::CumulativeConfirmed,
        ] {
            let obs = observed_from(&p, &c, 300, kind);
            assert!(residuals(&p, &obs, &c).unwrap().iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn residual_length_and_offset() {
        let c = ctx();
        let p = FitParameters::india_reference();
        let mut obs = observed_from(&p, &c, 585, SeriesKind::CumulativeDeaths);
        assert_eq!(residuals(&p, &obs, &c).unwrap().len(), 585);
        obs.values.iter_mut().for_each(|v| *v += 10.0);
        assert!(residuals(&p, &obs, &c)
            .unwrap()
            .iter()
            .all(|&r| (r + 10.0).abs() < 1e-6));
    }

    #[test]
    fn observed_series_validation() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        assert!(ObservedSeries::new(d, vec![0.0, 2.0, 1.0], SeriesKind::CumulativeDeaths).is_err());
        assert!(ObservedSeries::new(d, vec![0.0, 2.0, 1.0], SeriesKind::DailyDeaths).is_ok());
        assert!(ObservedSeries::new(d, vec![-1.0], SeriesKind::DailyDeaths).is_err());
        assert_eq!("daily_deaths".parse::<SeriesKind>().unwrap(), SeriesKind::DailyDeaths);
        assert!("weekly".parse::<SeriesKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ParamSpec::new("k", 6.0, 0.01, 5.0).validate().is_err());
        assert!(ParamSpec::new("k", 1.0, 5.0, 0.01).validate().is_err());
        assert!(ParamSpec::india_defaults().iter().all(|s| s.validate().is_ok()));
        let mut specs = ParamSpec::india_defaults();
        specs.pop();
        let err = calibrate(&specs, 100, |_| Ok(vec![0.0; 100]), &LmSettings::default());
        assert!(err.is_err());
    }

    #[test]
    fn evaluated_points_stay_in_bounds() {
        let specs = ParamSpec::india_defaults();
        let seen = Mutex::new(Vec::new());
        // Residual pulls every parameter hard towards (and beyond) its upper bound.
        let result = calibrate(
            &specs,
            20,
            |p| {
                seen.lock().unwrap().push(p.clone());
                Ok(p.named_values()
                    .iter()
                    .map(|(_, v)| 1e6 - v)
                    .chain(std::iter::repeat_n(0.0, 10))
                    .collect())
            },
            &LmSettings::default(),
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), result.n_function_evals);
        for p in &seen {
            for s in &specs {
                let v = p.get(&s.name).unwrap();
                assert!(
                    v > s.min && v < s.max,
                    "{} = {v} escaped [{}, {}]",
                    s.name,
                    s.min,
                    s.max
                );
            }
        }
        assert!(result.accepted_costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fixed_parameters_do_not_move() {
        let c = ctx();
        let truth = FitParameters::india_reference();
        let obs = observed_from(&truth, &c, 120, SeriesKind::CumulativeDeaths);
        let mut specs = ParamSpec::india_bounds_at(&truth).unwrap();
        for s in specs.iter_mut() {
            if s.name != "prob_c_to_d" {
                s.vary = false;
            }
        }
        specs[8].initial_value = 0.3;
        let res = fit(&specs, &obs, &c).unwrap();
        assert_eq!(res.n_varys, 1);
        for (fp, s) in res.params.iter().zip(&specs) {
            if !s.vary {
                assert_eq!(fp.value, s.initial_value);
            }
        }
        assert!((res.best_params.prob_c_to_d - truth.prob_c_to_d).abs() < 1e-6);
        assert!((res.reduced_chi_square * (res.n_data - res.n_varys) as f64 / res.chi_square - 1.0).abs() < 1e-9);
    }
}
