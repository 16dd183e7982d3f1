//! Domain types and right-hand side of the modified SEIR system.
//!
//! Compartments are absolute person counts: susceptible, exposed, infected,
//! critical, recovered and dead. The transmission rate follows a
//! time-varying reproduction number built from one or more smooth
//! "rectangle" pulses, ICU capacity grows linearly in time, vaccinated
//! people move straight from S into the recovery flow, and a fixed fraction
//! of that recovery flow returns to S (reinfection).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::logistic;

/// The six compartments at one instant, in persons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub c: f64,
    pub r: f64,
    pub d: f64,
}

impl CompartmentState {
    pub fn new(s: f64, e: f64, i: f64, c: f64, r: f64, d: f64) -> Self {
        Self { s, e, i, c, r, d }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.s, self.e, self.i, self.c, self.r, self.d]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.c + self.r + self.d
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// One pulse of elevated transmission: starts at `start` (day offset) and
/// lasts `duration` days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub start: f64,
    pub duration: f64,
}

/// Multi-wave rectangle reproduction number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleR0Params {
    pub r0_start: f64,
    pub r0_end: f64,
    /// Edge sharpness, 1/day².
    pub k: f64,
    pub waves: Vec<Wave>,
}

impl RectangleR0Params {
    /// Checks the structural constraints. `r0_start == r0_end` is accepted so
    /// that a flat (or zero) reproduction number can be expressed.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.r0_start, self.r0_end, self.k]
            .iter()
            .chain(self.waves.iter().flat_map(|w| [&w.start, &w.duration]))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("rectangle R0 values must be finite".into()));
        }
        if self.r0_end < 0.0 || self.r0_start < self.r0_end {
            return Err(Error::InvalidParameter(format!(
                "need r0_start >= r0_end >= 0, got r0_start = {}, r0_end = {}",
                self.r0_start, self.r0_end
            )));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidParameter(format!("k must be positive, got {}", self.k)));
        }
        if self.waves.is_empty() {
            return Err(Error::InvalidParameter("at least one wave is required".into()));
        }
        if let Some((n, w)) = self.waves.iter().enumerate().find(|(_, w)| w.duration <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wave {} duration must be positive, got {}",
                n + 1,
                w.duration
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        r0_rectangle(t, self)
    }
}

/// Single smooth step from `r0_start` down to `r0_end` around `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticR0Params {
    pub r0_start: f64,
    pub r0_end: f64,
    /// Steepness, 1/day.
    pub k: f64,
    /// Inflection day.
    pub t0: f64,
}

impl LogisticR0Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0_start.is_finite() && self.r0_end.is_finite() && self.k.is_finite() && self.t0.is_finite()) {
            return Err(Error::InvalidParameter("logistic R0 values must be finite".into()));
        }
        if self.r0_end < 0.0 || self.r0_start < self.r0_end {
            return Err(Error::InvalidParameter(format!(
                "need r0_start >= r0_end >= 0, got r0_start = {}, r0_end = {}",
                self.r0_start, self.r0_end
            )));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidParameter(format!("k must be positive, got {}", self.k)));
        }
        Ok(())
    }
}

/// Rectangle R₀: for every wave `(a, b)` adds
/// `(r0_start - r0_end) * logistic(-k (a - t)(a + b - t)) + r0_end`.
///
/// Waves are summed literally, so away from every pulse the value is
/// `waves.len() * r0_end`.
pub fn r0_rectangle(t: f64, p: &RectangleR0Params) -> f64 {
    let amplitude = p.r0_start - p.r0_end;
    p.waves
        .iter()
        .map(|w| amplitude * logistic(-p.k * (w.start - t) * (w.start + w.duration - t)) + p.r0_end)
        .sum()
}

/// Logistic R₀ step: `(r0_start - r0_end) / (1 + e^(-k (t0 - t))) + r0_end`.
pub fn r0_logistic(t: f64, p: &LogisticR0Params) -> f64 {
    (p.r0_start - p.r0_end) * logistic(p.k * (p.t0 - t)) + p.r0_end
}

/// Time-varying R₀ used by the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum R0Profile {
    Rectangle(RectangleR0Params),
    Logistic(LogisticR0Params),
}

impl R0Profile {
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            R0Profile::Rectangle(p) => r0_rectangle(t, p),
            R0Profile::Logistic(p) => r0_logistic(t, p),
        }
    }
}

/// Model constants that are not calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedRates {
    /// Exit rate from the exposed compartment, 1/day.
    pub sigma: f64,
    /// Recovery rate of infected, 1/day.
    pub gamma: f64,
    pub days_i_to_c: f64,
    pub days_c_to_d: f64,
    pub days_c_to_r: f64,
    /// Fraction of the recovery flow that returns to S.
    pub rsus: f64,
    /// Days between a first dose and immunity.
    pub immunity_lag_days: u32,
}

impl Default for FixedRates {
    fn default() -> Self {
        Self {
            sigma: 1.0 / 5.0,
            gamma: 1.0 / 9.0,
            days_i_to_c: 12.0,
            days_c_to_d: 7.5,
            days_c_to_r: 6.5,
            rsus: 0.01,
            immunity_lag_days: 30,
        }
    }
}

impl FixedRates {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("days_i_to_c", self.days_i_to_c),
            ("days_c_to_d", self.days_c_to_d),
            ("days_c_to_r", self.days_c_to_r),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rsus) {
            return Err(Error::InvalidParameter(format!(
                "rsus must lie in [0, 1], got {}",
                self.rsus
            )));
        }
        Ok(())
    }
}

/// Calibrated quantities: the R₀ pulse shape, two transition probabilities
/// and the bed-capacity growth rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameters {
    pub r0: RectangleR0Params,
    pub prob_i_to_c: f64,
    pub prob_c_to_d: f64,
    /// Relative ICU capacity growth, 1/day.
    pub bed_growth: f64,
}

impl FitParameters {
    /// Best-fit values reported for India (two waves).
    pub fn india_reference() -> Self {
        Self {
            r0: RectangleR0Params {
                r0_start: 2.13470497,
                r0_end: 0.45969314,
                k: 2.06340457,
                waves: vec![
                    Wave {
                        start: 60.4533838,
                        duration: 146.800862,
                    },
                    Wave {
                        start: 252.861166,
                        duration: 32.678741,
                    },
                ],
            },
            prob_i_to_c: 0.02359074,
            prob_c_to_d: 0.21900041,
            bed_growth: 0.00767634,
        }
    }

    /// Parameter names in canonical order: `r0_start, k, a1, b1, ..., an, bn,
    /// r0_end, prob_i_to_c, prob_c_to_d, s`.
    pub fn names(n_waves: usize) -> Vec<String> {
        let mut names = vec!["r0_start".to_string(), "k".to_string()];
        for w in 1..=n_waves {
            names.push(format!("a{w}"));
            names.push(format!("b{w}"));
        }
        names.extend(["r0_end", "prob_i_to_c", "prob_c_to_d", "s"].map(String::from));
        names
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "r0_start" => Some(self.r0.r0_start),
            "r0_end" => Some(self.r0.r0_end),
            "k" => Some(self.r0.k),
            "prob_i_to_c" => Some(self.prob_i_to_c),
            "prob_c_to_d" => Some(self.prob_c_to_d),
            "s" => Some(self.bed_growth),
            _ => {
                let (slot, idx) = wave_slot(name)?;
                let w = self.r0.waves.get(idx)?;
                Some(if slot == 'a' { w.start } else { w.duration })
            }
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "r0_start" => self.r0.r0_start = value,
            "r0_end" => self.r0.r0_end = value,
            "k" => self.r0.k = value,
            "prob_i_to_c" => self.prob_i_to_c = value,
            "prob_c_to_d" => self.prob_c_to_d = value,
            "s" => self.bed_growth = value,
            _ => {
                let w = wave_slot(name)
                    .and_then(|(slot, idx)| self.r0.waves.get_mut(idx).map(|w| (slot, w)))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown parameter {name:?}")))?;
                match w {
                    ('a', w) => w.start = value,
                    (_, w) => w.duration = value,
                }
            }
        }
        Ok(())
    }

    /// Builds a parameter set from `(name, value)` pairs. Wave count is
    /// inferred from the highest `aN`/`bN` index; every canonical name must
    /// be present exactly once.
    pub fn from_named<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let pairs: Vec<(&str, f64)> = pairs.into_iter().collect();
        let n_waves = pairs
            .iter()
            .filter_map(|(n, _)| wave_slot(n).map(|(_, i)| i + 1))
            .max()
            .unwrap_or(0);
        let mut expected = Self::names(n_waves);
        expected.sort();
        let mut given: Vec<&str> = pairs.iter().map(|(n, _)| *n).collect();
        given.sort_unstable();
        if given != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!(
                "parameter names {given:?} do not match the expected set {expected:?}"
            )));
        }
        let mut p = Self {
            r0: RectangleR0Params {
                r0_start: 0.0,
                r0_end: 0.0,
                k: 0.0,
                waves: vec![
                    Wave {
                        start: 0.0,
                        duration: 0.0
                    };
                    n_waves
                ],
            },
            prob_i_to_c: 0.0,
            prob_c_to_d: 0.0,
            bed_growth: 0.0,
        };
        for (name, value) in pairs {
            p.set(name, value)?;
        }
        Ok(p)
    }

    pub fn named_values(&self) -> Vec<(String, f64)> {
        Self::names(self.r0.waves.len())
            .into_iter()
            .map(|n| {
                let v = self.get(&n).expect("canonical name");
                (n, v)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.r0.validate()?;
        for (name, p) in [("prob_i_to_c", self.prob_i_to_c), ("prob_c_to_d", self.prob_c_to_d)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !self.bed_growth.is_finite() {
            return Err(Error::InvalidParameter("s must be finite".into()));
        }
        Ok(())
    }
}

/// Parses `a3` into `('a', 2)`.
fn wave_slot(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let slot = chars.next().filter(|c| *c == 'a' || *c == 'b')?;
    let idx: usize = chars.as_str().parse().ok()?;
    (idx >= 1 && !chars.as_str().starts_with('0')).then_some((slot, idx - 1))
}

/// Total population and baseline ICU capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n: f64,
    pub beds_0: f64,
}

impl PopulationConfig {
    /// Baseline ICU beds per person used when none is supplied (5 per 100k).
    pub const DEFAULT_BEDS_PER_CAPITA: f64 = 5e-5;

    pub fn new(n: f64, beds_0: f64) -> Self {
        Self { n, beds_0 }
    }

    pub fn with_default_beds(n: f64) -> Self {
        Self::new(n, n * Self::DEFAULT_BEDS_PER_CAPITA)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n > 0.0) {
            return Err(Error::NonPositivePopulation(self.n));
        }
        if !(self.beds_0.is_finite() && self.beds_0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beds_0 must be >= 0, got {}",
                self.beds_0
            )));
        }
        Ok(())
    }
}

/// ICU capacity at day `t`: `beds_0 * (1 + s t)`, floored at zero.
#[inline]
pub fn beds_at(t: f64, pop: &PopulationConfig, s: f64) -> f64 {
    (pop.beds_0 * (1.0 + s * t)).max(0.0)
}

/// Time derivatives of the compartments plus two intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerivativeVector {
    pub ds: f64,
    pub de: f64,
    pub di: f64,
    pub dc: f64,
    pub dr: f64,
    pub dd: f64,
    /// Combined recovery and vaccination flow before the reinfection split.
    pub drec: f64,
    pub beta: f64,
}

impl DerivativeVector {
    pub fn to_array(&self) -> [f64; 6] {
        [self.ds, self.de, self.di, self.dc, self.dr, self.dd]
    }

    pub fn sum(&self) -> f64 {
        self.to_array().iter().sum()
    }
}

/// Disease-progression parameters shared by every R₀ profile.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Progression<'a> {
    pub prob_i_to_c: f64,
    pub prob_c_to_d: f64,
    pub bed_growth: f64,
    pub rates: &'a FixedRates,
    pub pop: &'a PopulationConfig,
}

impl<'a> Progression<'a> {
    pub fn new(fit: &FitParameters, rates: &'a FixedRates, pop: &'a PopulationConfig) -> Self {
        Self {
            prob_i_to_c: fit.prob_i_to_c,
            prob_c_to_d: fit.prob_c_to_d,
            bed_growth: fit.bed_growth,
            rates,
            pop,
        }
    }

    /// Right-hand side for a given R₀ value. Inputs are assumed checked.
    #[inline]
    pub fn flows(&self, r0: f64, t: f64, y: &CompartmentState, v_rate: f64) -> DerivativeVector {
        let rates = self.rates;
        let n = self.pop.n;
        let beta = rates.gamma * r0;
        let beds = beds_at(t, self.pop, self.bed_growth);
        let v_eff = v_rate.min(y.s.max(0.0)).max(0.0);

        let treated = beds.min(y.c);
        let overflow = (y.c - beds).max(0.0);
        let infection = beta * y.i * y.s / n;
        let exposed_out = rates.sigma * y.e;
        let to_critical = self.prob_i_to_c * y.i / rates.days_i_to_c;
        let infected_recover = rates.gamma * (1.0 - self.prob_i_to_c) * y.i;
        let critical_die = self.prob_c_to_d * treated / rates.days_c_to_d + overflow;
        let critical_recover = (1.0 - self.prob_c_to_d) * treated / rates.days_c_to_r;

        let drec = infected_recover + critical_recover + v_eff;
        DerivativeVector {
            ds: -infection - v_eff + rates.rsus * drec,
            de: infection - exposed_out,
            di: exposed_out - to_critical - infected_recover,
            dc: to_critical - critical_die - critical_recover,
            dr: (1.0 - rates.rsus) * drec,
            dd: critical_die,
            drec,
            beta,
        }
    }
}

/// Right-hand side of the modified SEIR system at day `t`.
///
/// `v_rate` is the number of people becoming vaccine-immune per day; it is
/// clamped to the available susceptibles so S is never pushed negative by
/// vaccination.
pub fn derivatives(
    t: f64,
    y: &CompartmentState,
    fit: &FitParameters,
    rates: &FixedRates,
    pop: &PopulationConfig,
    v_rate: f64,
) -> Result<DerivativeVector> {
    check_inputs(t, y, pop)?;
    let r0 = r0_rectangle(t, &fit.r0);
    Ok(Progression::new(fit, rates, pop).flows(r0, t, y, v_rate))
}

pub(crate) fn check_inputs(t: f64, y: &CompartmentState, pop: &PopulationConfig) -> Result<()> {
    if !(pop.n.is_finite() && pop.n > 0.0) {
        return Err(Error::NonPositivePopulation(pop.n));
    }
    if !y.is_finite() || !t.is_finite() {
        return Err(Error::NonFiniteState {
            t,
            state: y.to_array().to_vec(),
        });
    }
    Ok(())
}
