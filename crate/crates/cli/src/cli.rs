use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use seirfit_core::SeriesKind;

/// Simulate and calibrate the modified SEIR model with critical care, deaths,
/// vaccination and reinfection.
#[derive(Debug, Parser)]
#[command(name = "seirfit", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the model forward and write trajectory.csv.
    Simulate(Common),
    /// Calibrate parameters against an observed series.
    Fit(Common),
    /// Score a prediction against observations.
    Evaluate(EvaluateArgs),
    /// Reshape a CSV output into long format, optionally drawing an SVG.
    Plotdata(PlotArgs),
    /// Extract, clean and tabulate one country's series.
    Ingest(Common),
}

/// Flags shared by the model commands. They override the config file.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub country: Option<String>,
    /// cumulative_deaths, daily_deaths or cumulative_confirmed.
    #[arg(long)]
    pub target: Option<SeriesKind>,
    /// RK4 steps per day.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub substeps: Option<u32>,
    /// Initial exposed count.
    #[arg(long)]
    pub seed_exposed: Option<f64>,
    /// JHU-style cumulative deaths table.
    #[arg(long)]
    pub deaths: Option<PathBuf>,
    /// JHU-style cumulative confirmed table.
    #[arg(long)]
    pub confirmed: Option<PathBuf>,
    /// Weekly first-dose counts (`week_start,first_doses`).
    #[arg(long)]
    pub vaccination: Option<PathBuf>,
    /// Keep at most this many days of data.
    #[arg(long)]
    pub max_days: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with the observed values.
    #[arg(long)]
    pub observed: PathBuf,
    /// CSV with the predicted values.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Column to read from the observed file (default: last column).
    #[arg(long)]
    pub observed_column: Option<String>,
    /// Column to read from the predicted file (default: last column).
    #[arg(long)]
    pub predicted_column: Option<String>,
    /// Number of fitted parameters, used by the AIC term.
    #[arg(long, default_value_t = 0)]
    pub n_varys: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV with a `day` column, e.g. trajectory.csv or fitted_vs_observed.csv.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated columns to plot (default: every numeric column).
    #[arg(long)]
    pub series: Option<String>,
    /// Also write plot.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
