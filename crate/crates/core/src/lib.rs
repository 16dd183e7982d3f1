//! Modified SEIR epidemic model with critical-care and death compartments,
//! a multi-wave "rectangle" reproduction number, vaccination and
//! reinfection, together with a box-constrained Levenberg–Marquardt
//! calibrator, fit statistics and evaluation metrics.
//!
//! ```
//! use seirfit_core::{simulate, FitParameters, ModelContext, PopulationConfig};
//!
//! let ctx = ModelContext::new(PopulationConfig::with_default_beds(1.38e9));
//! let traj = simulate(&FitParameters::india_reference(), &ctx, 585).unwrap();
//! assert_eq!(traj.len(), 585);
//! ```

pub mod error;
pub mod exec;
pub mod fitting;
pub mod ingest;
pub mod integrator;
pub mod logistic;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fitting::{
    calibrate, fit, fit_with, residuals, ConvergenceStatus, FitResult, FittedParam, LmSettings, ObservedSeries,
    ParamSpec, SeriesKind,
};
pub use ingest::{
    clean_cumulative, parse_jhu_timeseries, parse_vaccination_csv, weekly_to_daily_vaccination, CountrySeries,
    VaccinationSchedule, WeeklyDoses,
};
pub use integrator::{integrate, simulate, simulate_batch, simulate_with_profile, ModelContext, Trajectory};
pub use metrics::{evaluate, MetricsReport};
pub use model::{
    beds_at, derivatives, r0_logistic, r0_rectangle, CompartmentState, DerivativeVector, FitParameters, FixedRates,
    LogisticR0Params, PopulationConfig, R0Profile, RectangleR0Params, Wave,
};
