//! Fixed-step classic Runge–Kutta integration onto a daily grid, and the
//! model simulation built on top of it.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::VaccinationSchedule;
use crate::model::{
    beds_at, check_inputs, CompartmentState, FitParameters, FixedRates, PopulationConfig, Progression, R0Profile,
};

pub const DEFAULT_SUBSTEPS_PER_DAY: u32 = 4;

/// Integrates `y' = rhs(day, t, y)` with classic RK4 from `t0` to `t_end`
/// using `substeps_per_day` equal steps per day, returning the state at
/// `t0, t0 + 1, ...`.
///
/// `day` is the index of the one-day interval being stepped through, so a
/// right-hand side can hold day-level inputs constant over the whole
/// interval (every stage of every substep in `[t0 + day, t0 + day + 1]`
/// sees the same `day`).
pub fn integrate<const D: usize, F>(
    mut rhs: F,
    y0: [f64; D],
    t0: f64,
    t_end: f64,
    substeps_per_day: u32,
) -> Result<Vec<[f64; D]>>
where
    F: FnMut(usize, f64, &[f64; D]) -> [f64; D],
{
    if !(t0.is_finite() && t_end.is_finite()) || t_end < t0 {
        return Err(Error::InvalidParameter(format!(
            "need finite t0 <= t_end, got [{t0}, {t_end}]"
        )));
    }
    if substeps_per_day == 0 {
        return Err(Error::InvalidParameter("substeps_per_day must be at least 1".into()));
    }
    let n_days = (t_end - t0 + 1e-9).floor() as usize;
    let h = 1.0 / f64::from(substeps_per_day);

    let mut eval = |day: usize, t: f64, y: &[f64; D]| -> Result<[f64; D]> {
        let dy = rhs(day, t, y);
        if dy.iter().all(|v| v.is_finite()) {
            Ok(dy)
        } else {
            Err(Error::NonFiniteDerivative { t, state: y.to_vec() })
        }
    };

    let mut out = Vec::with_capacity(n_days + 1);
    let mut y = y0;
    out.push(y);
    for day in 0..n_days {
        for sub in 0..substeps_per_day {
            let t = t0 + day as f64 + f64::from(sub) * h;
            let k1 = eval(day, t, &y)?;
            let k2 = eval(day, t + 0.5 * h, &axpy(&y, 0.5 * h, &k1))?;
            let k3 = eval(day, t + 0.5 * h, &axpy(&y, 0.5 * h, &k2))?;
            let k4 = eval(day, t + h, &axpy(&y, h, &k3))?;
            for j in 0..D {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[inline]
fn axpy<const D: usize>(y: &[f64; D], a: f64, k: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|j| y[j] + a * k[j])
}

/// Simulated model output on a daily grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_date: Option<NaiveDate>,
    pub t: Vec<f64>,
    pub states: Vec<CompartmentState>,
    /// Running total of people who have entered I.
    pub cumulative_infections: Vec<f64>,
    pub r0: Vec<f64>,
    pub beta: Vec<f64>,
    pub beds: Vec<f64>,
    /// Vaccine-immunization rate applied over the day starting at each point.
    pub vaccination: Vec<f64>,
    /// `d[k] - d[k-1]`, with `daily_deaths[0] = d[0]`.
    pub daily_deaths: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn cumulative_deaths(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.d).collect()
    }

    pub fn date_at(&self, k: usize) -> Option<NaiveDate> {
        self.start_date
            .and_then(|d| d.checked_add_days(chrono::Days::new(k as u64)))
    }

    /// Largest `|Σ compartments − n|` over the grid.
    pub fn max_closure_error(&self, n: f64) -> f64 {
        self.states.iter().map(|s| (s.total() - n).abs()).fold(0.0, f64::max)
    }
}

/// Everything besides the fitted parameters that a simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContext {
    pub rates: FixedRates,
    pub population: PopulationConfig,
    pub vaccination: VaccinationSchedule,
    /// Initial exposed count when `initial_state` is not given. `None` means
    /// one per million of the population, at least one person.
    pub seed_exposed: Option<f64>,
    pub initial_state: Option<CompartmentState>,
    pub substeps_per_day: u32,
    /// Calendar date of day 0, carried into the trajectory.
    pub start_date: Option<NaiveDate>,
}

impl ModelContext {
    pub fn new(population: PopulationConfig) -> Self {
        Self {
            rates: FixedRates::default(),
            population,
            vaccination: VaccinationSchedule::none(FixedRates::default().immunity_lag_days),
            seed_exposed: None,
            initial_state: None,
            substeps_per_day: DEFAULT_SUBSTEPS_PER_DAY,
            start_date: None,
        }
    }

    pub fn default_seed(n: f64) -> f64 {
        (n / 1e6).ceil().max(1.0)
    }

    pub fn resolved_seed_exposed(&self) -> f64 {
        self.seed_exposed
            .unwrap_or_else(|| Self::default_seed(self.population.n))
    }

    pub fn initial_condition(&self) -> CompartmentState {
        self.initial_state.unwrap_or_else(|| {
            let e = self.resolved_seed_exposed();
            CompartmentState::new(self.population.n - e, e, 0.0, 0.0, 0.0, 0.0)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.population.validate()?;
        if self.substeps_per_day == 0 {
            return Err(Error::InvalidParameter("substeps_per_day must be at least 1".into()));
        }
        if let Some(e) = self.seed_exposed {
            if !(e.is_finite() && e >= 0.0 && e <= self.population.n) {
                return Err(Error::InvalidParameter(format!(
                    "seed_exposed must lie in [0, N], got {e}"
                )));
            }
        }
        let y0 = self.initial_condition();
        check_inputs(0.0, &y0, &self.population)?;
        let n = self.population.n;
        if (y0.total() - n).abs() > 1e-6 * n {
            return Err(Error::InvalidParameter(format!(
                "initial compartments sum to {} but N = {n}",
                y0.total()
            )));
        }
        Ok(())
    }
}

/// Simulates the rectangle-R₀ model for `horizon_days` grid points
/// (days `0..horizon_days`).
pub fn simulate(fit: &FitParameters, ctx: &ModelContext, horizon_days: usize) -> Result<Trajectory> {
    run(&|t| fit.r0.value_at(t), fit, ctx, horizon_days)
}

/// Like [`simulate`] but with R₀ taken from `profile`; the rectangle stored
/// in `fit.r0` is ignored, only its probabilities and bed growth are used.
pub fn simulate_with_profile(
    profile: &R0Profile,
    fit: &FitParameters,
    ctx: &ModelContext,
    horizon_days: usize,
) -> Result<Trajectory> {
    run(&|t| profile.value_at(t), fit, ctx, horizon_days)
}

/// Simulates every parameter set; order of results follows `params`.
pub fn simulate_batch(
    params: &[FitParameters],
    ctx: &ModelContext,
    horizon_days: usize,
    exec: Execution,
) -> Vec<Result<Trajectory>> {
    exec.map(params, |p| simulate(p, ctx, horizon_days))
}

fn run(r0: &dyn Fn(f64) -> f64, fit: &FitParameters, ctx: &ModelContext, horizon_days: usize) -> Result<Trajectory> {
    if horizon_days == 0 {
        return Err(Error::InvalidParameter("horizon_days must be at least 1".into()));
    }
    ctx.validate()?;
    let progression = Progression::new(fit, &ctx.rates, &ctx.population);
    let y0 = ctx.initial_condition();
    let mut start = [0.0; 7];
    start[..6].copy_from_slice(&y0.to_array());

    let sigma = ctx.rates.sigma;
    let rhs = |day: usize, t: f64, y: &[f64; 7]| -> [f64; 7] {
        let state = CompartmentState::new(y[0], y[1], y[2], y[3], y[4], y[5]);
        let v = ctx.vaccination.effective_rate(day as i64);
        let d = progression.flows(r0(t), t, &state, v);
        [d.ds, d.de, d.di, d.dc, d.dr, d.dd, sigma * y[1]]
    };
    let grid = integrate(rhs, start, 0.0, (horizon_days - 1) as f64, ctx.substeps_per_day)?;

    let n = grid.len();
    let mut traj = Trajectory {
        start_date: ctx.start_date,
        t: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        cumulative_infections: Vec::with_capacity(n),
        r0: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        beds: Vec::with_capacity(n),
        vaccination: Vec::with_capacity(n),
        daily_deaths: Vec::with_capacity(n),
    };
    let mut prev_d = 0.0;
    for (k, y) in grid.iter().enumerate() {
        let t = k as f64;
        let r = r0(t);
        traj.t.push(t);
        traj.states
            .push(CompartmentState::new(y[0], y[1], y[2], y[3], y[4], y[5]));
        traj.cumulative_infections.push(y[6]);
        traj.r0.push(r);
        traj.beta.push(ctx.rates.gamma * r);
        traj.beds.push(beds_at(t, &ctx.population, fit.bed_growth));
        traj.vaccination.push(ctx.vaccination.effective_rate(k as i64));
        traj.daily_deaths.push(if k == 0 { y[5] } else { y[5] - prev_d });
        prev_d = y[5];
    }
    Ok(traj)
}
