use chrono::NaiveDate;
use seirfit_core::{
    evaluate, fit, fit_with, simulate, ConvergenceStatus, Execution, FitParameters, LmSettings, ModelContext,
    ObservedSeries, ParamSpec, PopulationConfig, RectangleR0Params, SeriesKind, Wave,
};

fn smooth_truth() -> FitParameters {
    FitParameters {
        r0: RectangleR0Params {
            r0_start: 2.6,
            r0_end: 0.6,
            k: 0.002,
            waves: vec![
                Wave {
                    start: 20.0,
                    duration: 110.0,
                },
                Wave {
                    start: 220.0,
                    duration: 80.0,
                },
            ],
        },
        prob_i_to_c: 0.03,
        prob_c_to_d: 0.3,
        bed_growth: 0.005,
    }
}

fn context() -> ModelContext {
    let mut ctx = ModelContext::new(PopulationConfig::with_default_beds(5e7));
    ctx.seed_exposed = Some(100.0);
    ctx
}

fn observed(p: &FitParameters, ctx: &ModelContext, kind: SeriesKind) -> ObservedSeries {
    let traj = simulate(p, ctx, 400).unwrap();
    ObservedSeries::new(NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(), kind.extract(&traj), kind).unwrap()
}

/// Perturbs every free value by `rel` of its own size, staying in bounds.
fn perturbed(specs: &[ParamSpec], truth: &FitParameters, rel: f64) -> Vec<ParamSpec> {
    specs
        .iter()
        .map(|s| {
            if !s.vary {
                return s.clone();
            }
            let v = truth.get(&s.name).unwrap();
            ParamSpec {
                initial_value: (v * (1.0 + rel)).clamp(s.min + 1e-9, s.max - 1e-9),
                ..s.clone()
            }
        })
        .collect()
}

fn smooth_specs(truth: &FitParameters) -> Vec<ParamSpec> {
    ParamSpec::india_defaults()
        .into_iter()
        .map(|mut s| {
            match s.name.as_str() {
                "k" | "s" => s.min = 1e-4,
                "r0_end" => s.min = 0.1,
                _ => {}
            }
            s.initial_value = truth.get(&s.name).unwrap();
            s
        })
        .collect()
}

#[test]
fn recovers_smooth_truth_from_nearby_start() {
    let truth = smooth_truth();
    let ctx = context();
    let obs = observed(&truth, &ctx, SeriesKind::CumulativeDeaths);
    let mut specs = smooth_specs(&truth);
    for s in &mut specs {
        // Deaths alone barely separate these from prob_c_to_d.
        s.vary = !matches!(s.name.as_str(), "prob_i_to_c" | "s");
    }
    let specs = perturbed(&specs, &truth, 0.02);
    let res = fit(&specs, &obs, &ctx).unwrap();
    assert!(res.success, "{:?}", res.convergence_status);
    assert!(res.reduced_chi_square <= 1.0, "{}", res.reduced_chi_square);
    let pred = simulate(&res.best_params, &ctx, obs.len()).unwrap().cumulative_deaths();
    assert!(evaluate(&obs.values, &pred, res.n_varys).unwrap().r2 >= 0.9999);
    assert!(res.accepted_costs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn fits_daily_deaths_target() {
    let truth = smooth_truth();
    let ctx = context();
    let obs = observed(&truth, &ctx, SeriesKind::DailyDeaths);
    let mut specs = smooth_specs(&truth);
    for s in &mut specs {
        s.vary = matches!(s.name.as_str(), "r0_start" | "prob_c_to_d");
    }
    let specs = perturbed(&specs, &truth, 0.05);
    let res = fit(&specs, &obs, &ctx).unwrap();
    assert!(res.success);
    assert!(
        (res.best_params.r0.r0_start - 2.6).abs() < 1e-4,
        "{:?}",
        res.best_params
    );
    assert!((res.best_params.prob_c_to_d - 0.3).abs() < 1e-4);
}

#[test]
fn starting_at_the_optimum_stops_quickly() {
    let truth = smooth_truth();
    let ctx = context();
    let obs = observed(&truth, &ctx, SeriesKind::CumulativeDeaths);
    let res = fit(&smooth_specs(&truth), &obs, &ctx).unwrap();
    assert_eq!(res.convergence_status, ConvergenceStatus::ExactFit);
    assert!(res.n_function_evals <= 3 * res.n_varys, "{}", res.n_function_evals);
    assert_eq!(res.chi_square, 0.0);
    assert_eq!(res.best_params, truth);
}

#[test]
fn execution_mode_does_not_change_the_fit() {
    let truth = smooth_truth();
    let ctx = context();
    let obs = observed(&truth, &ctx, SeriesKind::CumulativeDeaths);
    let specs = perturbed(&smooth_specs(&truth), &truth, 0.03);
    let par = fit_with(
        &specs,
        &obs,
        &ctx,
        &LmSettings {
            execution: Execution::Parallel,
            ..LmSettings::default()
        },
    )
    .unwrap();
    let seq = fit_with(
        &specs,
        &obs,
        &ctx,
        &LmSettings {
            execution: Execution::Sequential,
            ..LmSettings::default()
        },
    )
    .unwrap();
    assert_eq!(par.best_params, seq.best_params);
    assert_eq!(par.chi_square, seq.chi_square);
    assert_eq!(par.n_function_evals, seq.n_function_evals);
}

#[test]
fn fit_statistics_are_consistent() {
    let truth = smooth_truth();
    let ctx = context();
    let obs = observed(&truth, &ctx, SeriesKind::CumulativeDeaths);
    let res = fit(&perturbed(&smooth_specs(&truth), &truth, 0.1), &obs, &ctx).unwrap();
    let n = res.n_data as f64;
    let k = res.n_varys as f64;
    assert!((res.bic - res.aic - (n.ln() - 2.0) * k).abs() < 1e-6);
    assert_eq!(res.reduced_chi_square, res.chi_square / (n - k));
    assert!(res.n_function_evals <= 200 * res.n_varys);
    for p in &res.params {
        assert!(p.value > p.min && p.value < p.max, "{p:?}");
    }
}

/// Rates and probabilities of the two-wave reference recovered from a start
/// where the first undamped step would push two of them onto their bounds.
#[test]
fn recovers_reference_rates_with_pulse_edges_fixed() {
    let truth = FitParameters::india_reference();
    let ctx = ModelContext::new(PopulationConfig::with_default_beds(1.38e9));
    let deaths: Vec<f64> = simulate(&truth, &ctx, 585)
        .unwrap()
        .cumulative_deaths()
        .iter()
        .map(|d| d.round())
        .collect();
    let obs = ObservedSeries::new(
        NaiveDate::from_ymd_opt(2020, 1, 22).unwrap(),
        deaths,
        SeriesKind::CumulativeDeaths,
    )
    .unwrap();
    let start = [
        ("r0_start", 2.2),
        ("r0_end", 0.5),
        ("prob_i_to_c", 0.025),
        ("prob_c_to_d", 0.2),
        ("s", 0.007),
    ];
    let specs: Vec<ParamSpec> = ParamSpec::india_bounds_at(&truth)
        .unwrap()
        .into_iter()
        .map(|mut s| {
            match start.iter().find(|(n, _)| *n == s.name) {
                Some((_, v)) => s.initial_value = *v,
                None => s.vary = false,
            }
            s
        })
        .collect();
    let res = fit(&specs, &obs, &ctx).unwrap();
    assert!(res.success);
    // Rounding the data to whole deaths leaves χ² ≈ 585/12.
    assert!(res.reduced_chi_square <= 1.0, "{}", res.reduced_chi_square);
    for (name, _) in start {
        let (got, want) = (res.best_params.get(name).unwrap(), truth.get(name).unwrap());
        assert!((got / want - 1.0).abs() < 1e-4, "{name}: {got} vs {want}");
    }
}
