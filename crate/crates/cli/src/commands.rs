use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};

use seirfit_core::ingest::{clean_cumulative, daily_from_cumulative};
use seirfit_core::{
    evaluate, fit_with, simulate, simulate_with_profile, LmSettings, MetricsReport, R0Profile, SeriesKind, Trajectory,
};

use crate::cli::{Common, EvaluateArgs, PlotArgs};
use crate::config::{Loaded, Resolved};
use crate::manifest::{InputFile, RunDir};
use crate::plot;

/// Exit status classes for scripting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Simulation,
    Fit,
}

impl Stage {
    pub fn exit_code(self) -> u8 {
        match self {
            Stage::Input => 2,
            Stage::Simulation => 3,
            Stage::Fit => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub stage: Stage,
    pub error: anyhow::Error,
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Outcome<T>;
    fn input(self) -> Outcome<T>
    where
        Self: Sized,
    {
        self.stage(Stage::Input)
    }
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Outcome<T> {
        self.map_err(|e| Failure { stage, error: e.into() })
    }
}

fn to_value<T: Serialize>(v: &T) -> Outcome<Value> {
    serde_json::to_value(v).input()
}

/// Runs `body` inside `run`, recording the failure in the manifest.
fn finish(run: RunDir, body: impl FnOnce(&mut RunDir) -> Outcome<Option<Value>>) -> Outcome {
    let mut run = run;
    match body(&mut run) {
        Ok(results) => run.complete(results).input(),
        Err(f) => {
            run.fail(&format!("{:#}", f.error));
            Err(f)
        }
    }
}

fn hash_inputs(loaded: &Loaded) -> Outcome<Vec<InputFile>> {
    loaded
        .inputs()
        .iter()
        .map(|(role, p)| InputFile::hash(role, p))
        .collect::<anyhow::Result<_>>()
        .input()
}

fn date_cell(start: chrono::NaiveDate, day: usize) -> String {
    (start + chrono::Days::new(day as u64)).format("%Y-%m-%d").to_string()
}

fn trajectory_csv(traj: &Trajectory, start: chrono::NaiveDate) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "day",
        "date",
        "S",
        "E",
        "I",
        "C",
        "R",
        "D",
        "daily_deaths",
        "R0",
        "beta",
        "beds",
    ])?;
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let mut row = vec![k.to_string(), date_cell(start, k)];
        row.extend(
            [
                s.s,
                s.e,
                s.i,
                s.c,
                s.r,
                s.d,
                traj.daily_deaths[k],
                traj.r0[k],
                traj.beta[k],
                traj.beds[k],
            ]
            .iter()
            .map(f64::to_string),
        );
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

fn manifest_resolved(r: &Resolved, lm: Option<&LmSettings>) -> Outcome<Value> {
    let mut v = to_value(r)?;
    if let Some(lm) = lm {
        v["lm"] = to_value(lm)?;
    }
    Ok(v)
}

pub fn simulate_cmd(common: &Common) -> Outcome {
    let loaded = Loaded::from_flags(common).input()?;
    let first = loaded.resolve(None, None).input()?;
    let extent = loaded.data_extent(&first).input()?;
    let r = loaded.resolve(extent.map(|e| e.0), None).input()?;
    let ctx = loaded.context(&r).input()?;
    let params = loaded.simulation_params().input()?;
    let run = RunDir::start(
        &r.out,
        "simulate",
        to_value(&loaded.config)?,
        manifest_resolved(&r, None)?,
        hash_inputs(&loaded)?,
    )
    .input()?;
    finish(run, |run| {
        let traj = match &loaded.config.logistic_r0 {
            Some(p) => simulate_with_profile(&R0Profile::Logistic(*p), &params, &ctx, r.horizon_days),
            None => simulate(&params, &ctx, r.horizon_days),
        }
        .stage(Stage::Simulation)?;
        run.write("trajectory.csv", &trajectory_csv(&traj, r.start_date).input()?)
            .input()?;
        Ok(Some(json!({
            "n_days": traj.len(),
            "final_deaths": traj.states.last().map(|s| s.d),
            "max_closure_error": traj.max_closure_error(r.population.n),
        })))
    })
}

pub fn fit_cmd(common: &Common) -> Outcome {
    let loaded = Loaded::from_flags(common).input()?;
    let first = loaded.resolve(None, None).input()?;
    let (observed, adjusted) = loaded.observed(&first).input()?;
    let r = loaded
        .resolve(Some(observed.start_date), Some(observed.len()))
        .input()?;
    let ctx = loaded.context(&r).input()?;
    let specs = loaded.specs();
    // Check the specs describe a complete parameter set before fitting.
    seirfit_core::FitParameters::from_named(specs.iter().map(|s| (s.name.as_str(), s.initial_value))).input()?;
    let settings = LmSettings::default();
    let run = RunDir::start(
        &r.out,
        "fit",
        to_value(&loaded.config)?,
        manifest_resolved(&r, Some(&settings))?,
        hash_inputs(&loaded)?,
    )
    .input()?;
    finish(run, |run| {
        let result = fit_with(&specs, &observed, &ctx, &settings).stage(Stage::Fit)?;
        let traj = simulate(&result.best_params, &ctx, observed.len()).stage(Stage::Fit)?;
        let model = observed.kind.extract(&traj);
        let metrics = evaluate(&observed.values, &model, result.n_varys).stage(Stage::Fit)?;

        run.write_json("fit.json", &result).input()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["day", "date", "observed", "model"]).input()?;
        for (k, (o, m)) in observed.values.iter().zip(&model).enumerate() {
            w.write_record([
                k.to_string(),
                date_cell(observed.start_date, k),
                o.to_string(),
                m.to_string(),
            ])
            .input()?;
        }
        run.write(
            "fitted_vs_observed.csv",
            &w.into_inner().map_err(|e| anyhow!("{e}")).input()?,
        )
        .input()?;
        run.write_json("metrics.json", &metrics).input()?;
        Ok(Some(json!({
            "observed_points_adjusted": adjusted,
            "convergence_status": result.convergence_status,
            "success": result.success,
            "chi_square": result.chi_square,
            "reduced_chi_square": result.reduced_chi_square,
            "metrics": metrics,
        })))
    })
}

fn read_column(path: &Path, column: Option<&str>) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = match column {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no column {name:?}", path.display()))?,
        None => header
            .len()
            .checked_sub(1)
            .with_context(|| format!("{} has no columns", path.display()))?,
    };
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let cell = rec.get(col).unwrap_or("").trim();
            cell.parse::<f64>()
                .with_context(|| format!("{} row {}: {cell:?} is not a number", path.display(), row + 2))
        })
        .collect()
}

fn metrics_csv(m: &MetricsReport) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"])?;
    for (name, v) in m.entries() {
        w.write_record([name, &v.to_string()])?;
    }
    Ok(w.into_inner()?)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Outcome {
    let observed = read_column(&args.observed, args.observed_column.as_deref()).input()?;
    let predicted = read_column(&args.predicted, args.predicted_column.as_deref()).input()?;
    let inputs = vec![
        InputFile::hash("observed", &args.observed).input()?,
        InputFile::hash("predicted", &args.predicted).input()?,
    ];
    let config = json!({
        "observed": args.observed,
        "predicted": args.predicted,
        "observed_column": args.observed_column,
        "predicted_column": args.predicted_column,
        "n_varys": args.n_varys,
    });
    let run = RunDir::start(
        &args.out,
        "evaluate",
        config,
        json!({ "n_varys": args.n_varys }),
        inputs,
    )
    .input()?;
    finish(run, |run| {
        let m = evaluate(&observed, &predicted, args.n_varys).input()?;
        run.write_json("metrics.json", &m).input()?;
        run.write("metrics.csv", &metrics_csv(&m).input()?).input()?;
        Ok(Some(to_value(&m)?))
    })
}

pub fn plotdata_cmd(args: &PlotArgs) -> Outcome {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))
        .input()?;
    let selected: Option<Vec<String>> = args.series.as_ref().map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(String::from)
            .collect()
    });
    let table = plot::read_table(&text, selected.as_deref())
        .with_context(|| format!("cannot use {}", args.input.display()))
        .input()?;
    let title = args.title.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let config = json!({ "input": args.input, "series": selected, "svg": args.svg, "title": title });
    let inputs = vec![InputFile::hash("input", &args.input).input()?];
    let run = RunDir::start(&args.out, "plotdata", config, json!({}), inputs).input()?;
    finish(run, |run| {
        run.write("plotdata.csv", &plot::long_format(&table).input()?).input()?;
        if args.svg {
            run.write("plot.svg", plot::svg(&table, &title).as_bytes()).input()?;
        }
        Ok(Some(json!({
            "series": table.series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
            "rows": table.days.len() * table.series.len(),
        })))
    })
}

pub fn ingest_cmd(common: &Common) -> Outcome {
    let loaded = Loaded::from_flags(common).input()?;
    let first = loaded.resolve(None, None).input()?;
    let Some(deaths_path) = loaded.config.data.deaths.clone() else {
        return Err(anyhow!("ingest needs data.deaths (or --deaths)")).input();
    };
    let deaths = loaded
        .country_series("deaths", &loaded.path(&deaths_path), &first)
        .input()?;
    let confirmed = match &loaded.config.data.confirmed {
        Some(p) => Some(loaded.country_series("confirmed", &loaded.path(p), &first).input()?),
        None => None,
    };
    if let Some(c) = &confirmed {
        if c.start_date != deaths.start_date || c.values.len() != deaths.values.len() {
            return Err(anyhow!(
                "confirmed series ({} for {} days) does not align with deaths ({} for {} days)",
                c.start_date,
                c.values.len(),
                deaths.start_date,
                deaths.values.len()
            ))
            .input();
        }
    }
    let r = loaded
        .resolve(Some(deaths.start_date), Some(deaths.values.len()))
        .input()?;
    let vaccination = loaded.vaccination(&r).input()?;
    let run = RunDir::start(
        &r.out,
        "ingest",
        to_value(&loaded.config)?,
        manifest_resolved(&r, None)?,
        hash_inputs(&loaded)?,
    )
    .input()?;
    finish(run, |run| {
        let cd = clean_cumulative(&deaths.values);
        let daily = daily_from_cumulative(&cd.values);
        let cc = confirmed.as_ref().map(|c| clean_cumulative(&c.values));
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "day",
            "date",
            SeriesKind::CumulativeDeaths.as_str(),
            SeriesKind::DailyDeaths.as_str(),
        ];
        if cc.is_some() {
            header.push(SeriesKind::CumulativeConfirmed.as_str());
        }
        w.write_record(&header).input()?;
        for (k, (cum, day)) in cd.values.iter().zip(&daily).enumerate() {
            let mut row = vec![
                k.to_string(),
                date_cell(deaths.start_date, k),
                cum.to_string(),
                day.to_string(),
            ];
            if let Some(c) = &cc {
                row.push(c.values[k].to_string());
            }
            w.write_record(&row).input()?;
        }
        run.write("observed.csv", &w.into_inner().map_err(|e| anyhow!("{e}")).input()?)
            .input()?;

        if loaded.config.data.vaccination.is_some() {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["day", "date", "first_doses", "immunization_rate"])
                .input()?;
            for k in 0..r.horizon_days {
                let day = k as i64;
                w.write_record([
                    k.to_string(),
                    date_cell(r.start_date, k),
                    vaccination.doses_on(day).to_string(),
                    vaccination.effective_rate(day).to_string(),
                ])
                .input()?;
            }
            run.write("vaccination.csv", &w.into_inner().map_err(|e| anyhow!("{e}")).input()?)
                .input()?;
        }
        Ok(Some(json!({
            "country": deaths.country,
            "start_date": deaths.start_date,
            "end_date": deaths.end_date(),
            "n_days": deaths.values.len(),
            "deaths_adjusted": cd.adjusted,
            "confirmed_adjusted": cc.as_ref().map(|c| c.adjusted),
            "total_first_doses": vaccination.total_doses(),
        })))
    })
}
