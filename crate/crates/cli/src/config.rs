use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use seirfit_core::ingest::{clean_cumulative, daily_from_cumulative, weekly_to_daily_vaccination_until};
use seirfit_core::{
    parse_jhu_timeseries, parse_vaccination_csv, FitParameters, FixedRates, LogisticR0Params, ModelContext,
    ObservedSeries, ParamSpec, PopulationConfig, SeriesKind, VaccinationSchedule,
};

use crate::cli::Common;

pub const DEFAULT_POPULATION: f64 = 1.38e9;
pub const DEFAULT_COUNTRY: &str = "India";
pub const DEFAULT_MAX_DAYS: usize = 585;
pub const DEFAULT_START_DATE: (i32, u32, u32) = (2020, 1, 22);

/// The JSON run configuration. Every field is optional; paths are relative
/// to the directory holding the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub population: PopulationSection,
    #[serde(default)]
    pub rates: FixedRates,
    /// Calibrated quantities. `simulate` uses each `value` as is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<ParamSpec>>,
    /// Replaces the rectangle pulse with a single logistic step (simulate only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic_r0: Option<LogisticR0Params>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SeriesKind>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_exposed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_days: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beds_0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// JHU-style cumulative deaths table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deaths: Option<PathBuf>,
    /// JHU-style cumulative confirmed-cases table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmed: Option<PathBuf>,
    /// `week_start,first_doses` table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vaccination: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_days: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps_per_day: Option<u32>,
}

/// Every default filled in, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub population: PopulationConfig,
    pub rates: FixedRates,
    pub seed_exposed: f64,
    pub substeps_per_day: u32,
    pub country: String,
    pub target: SeriesKind,
    pub max_days: usize,
    pub horizon_days: usize,
    pub start_date: NaiveDate,
    pub out: PathBuf,
}

/// A loaded configuration: the echo (after flag overrides) and the
/// directory its relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn from_flags(common: &Common) -> Result<Self> {
        let (mut config, base_dir) = match &common.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
                let config: RunConfig =
                    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, dir)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        // Flag paths are relative to the working directory, so make them
        // absolute before they land next to config-relative ones.
        let cwd = std::env::current_dir().context("cannot determine the working directory")?;
        let from_cwd = |p: &PathBuf| if p.is_absolute() { p.clone() } else { cwd.join(p) };
        if let Some(out) = &common.out {
            config.out = Some(from_cwd(out));
        }
        if let Some(p) = &common.deaths {
            config.data.deaths = Some(from_cwd(p));
        }
        if let Some(p) = &common.confirmed {
            config.data.confirmed = Some(from_cwd(p));
        }
        if let Some(p) = &common.vaccination {
            config.data.vaccination = Some(from_cwd(p));
        }
        if let Some(c) = &common.country {
            config.data.country = Some(c.clone());
        }
        if let Some(t) = common.target {
            config.target = Some(t);
        }
        if let Some(s) = common.substeps {
            config.integrator.substeps_per_day = Some(s);
        }
        if let Some(e) = common.seed_exposed {
            config.seed_exposed = Some(e);
        }
        if let Some(d) = common.max_days {
            config.data.max_days = Some(d);
        }
        let loaded = Self { config, base_dir };
        loaded.check_files()?;
        Ok(loaded)
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn data_paths(&self) -> Vec<(&'static str, &PathBuf)> {
        let d = &self.config.data;
        [
            ("deaths", &d.deaths),
            ("confirmed", &d.confirmed),
            ("vaccination", &d.vaccination),
        ]
        .into_iter()
        .filter_map(|(role, p)| p.as_ref().map(|p| (role, p)))
        .collect()
    }

    /// Resolved paths of every referenced input, with their roles.
    pub fn inputs(&self) -> Vec<(&'static str, PathBuf)> {
        self.data_paths()
            .into_iter()
            .map(|(role, p)| (role, self.path(p)))
            .collect()
    }

    fn check_files(&self) -> Result<()> {
        for (role, path) in self.inputs() {
            if !path.is_file() {
                bail!("{role} file not found: {}", path.display());
            }
        }
        if let Some(specs) = &self.config.parameters {
            for s in specs {
                s.validate()?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self, data_start: Option<NaiveDate>, data_len: Option<usize>) -> Result<Resolved> {
        let c = &self.config;
        let n = c.population.n.unwrap_or(DEFAULT_POPULATION);
        let beds_0 = c
            .population
            .beds_0
            .unwrap_or(n * PopulationConfig::DEFAULT_BEDS_PER_CAPITA);
        let max_days = c.data.max_days.unwrap_or(DEFAULT_MAX_DAYS);
        let (y, m, d) = DEFAULT_START_DATE;
        Ok(Resolved {
            population: PopulationConfig::new(n, beds_0),
            rates: c.rates,
            seed_exposed: c.seed_exposed.unwrap_or_else(|| ModelContext::default_seed(n)),
            substeps_per_day: c
                .integrator
                .substeps_per_day
                .unwrap_or(seirfit_core::integrator::DEFAULT_SUBSTEPS_PER_DAY),
            country: c.data.country.clone().unwrap_or_else(|| DEFAULT_COUNTRY.to_string()),
            target: c.target.unwrap_or_default(),
            max_days,
            horizon_days: c.horizon_days.or(data_len).unwrap_or(max_days),
            start_date: c
                .start_date
                .or(data_start)
                .unwrap_or_else(|| NaiveDate::from_ymd_opt(y, m, d).unwrap()),
            out: c.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    /// Parameter specs for fitting; the published two-wave defaults when the
    /// config has none.
    pub fn specs(&self) -> Vec<ParamSpec> {
        self.config.parameters.clone().unwrap_or_else(ParamSpec::india_defaults)
    }

    /// Parameter values for a forward run.
    pub fn simulation_params(&self) -> Result<FitParameters> {
        match &self.config.parameters {
            Some(specs) => Ok(FitParameters::from_named(
                specs.iter().map(|s| (s.name.as_str(), s.initial_value)),
            )?),
            None => Ok(FitParameters::india_reference()),
        }
    }

    pub fn country_series(&self, role: &str, path: &Path, r: &Resolved) -> Result<seirfit_core::CountrySeries> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {role} file {}", path.display()))?;
        let series = parse_jhu_timeseries(&text, &r.country)
            .with_context(|| format!("cannot parse {role} file {}", path.display()))?;
        Ok(series.truncated(r.max_days))
    }

    /// Loads and cleans the series the fit target refers to.
    pub fn observed(&self, r: &Resolved) -> Result<(ObservedSeries, usize)> {
        let (role, path) = match r.target {
            SeriesKind::CumulativeConfirmed => ("confirmed", &self.config.data.confirmed),
            _ => ("deaths", &self.config.data.deaths),
        };
        let Some(path) = path else {
            bail!("target {} needs data.{role} (or --{role})", r.target);
        };
        let series = self.country_series(role, &self.path(path), r)?;
        let cleaned = clean_cumulative(&series.values);
        let values = if r.target.is_cumulative() {
            cleaned.values
        } else {
            daily_from_cumulative(&cleaned.values)
        };
        Ok((
            ObservedSeries::new(series.start_date, values, r.target)?,
            cleaned.adjusted,
        ))
    }

    /// First data date and length, when the command reads a series.
    pub fn data_extent(&self, r: &Resolved) -> Result<Option<(NaiveDate, usize)>> {
        let path = match r.target {
            SeriesKind::CumulativeConfirmed => &self.config.data.confirmed,
            _ => &self.config.data.deaths,
        };
        match path {
            Some(p) => {
                let s = self.country_series("data", &self.path(p), r)?;
                Ok(Some((s.start_date, s.values.len())))
            }
            None => Ok(None),
        }
    }

    pub fn vaccination(&self, r: &Resolved) -> Result<VaccinationSchedule> {
        let lag = r.rates.immunity_lag_days;
        let Some(path) = &self.config.data.vaccination else {
            return Ok(VaccinationSchedule::none(lag));
        };
        let path = self.path(path);
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let weeks =
            parse_vaccination_csv(&text, r.start_date).with_context(|| format!("cannot parse {}", path.display()))?;
        let last_day = r.horizon_days as i64 - 1;
        Ok(weekly_to_daily_vaccination_until(&weeks, lag, Some(last_day))?)
    }

    pub fn context(&self, r: &Resolved) -> Result<ModelContext> {
        let mut ctx = ModelContext::new(r.population);
        ctx.rates = r.rates;
        ctx.seed_exposed = Some(r.seed_exposed);
        ctx.substeps_per_day = r.substeps_per_day;
        ctx.start_date = Some(r.start_date);
        ctx.vaccination = self.vaccination(r)?;
        ctx.validate()?;
        Ok(ctx)
    }
}
