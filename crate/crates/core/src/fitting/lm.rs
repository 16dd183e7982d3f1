//! Levenberg–Marquardt least squares with a forward-difference Jacobian.
//!
//! Damping follows the classic Marquardt schedule: the normal equations
//! `(JᵀJ + λ·D) δ = −Jᵀr` are solved, λ is divided by ten after an accepted
//! step and multiplied by ten after a rejected one. `D` holds, per parameter,
//! the largest diagonal of `JᵀJ` seen so far (as in MINPACK), so a parameter
//! whose sensitivity collapses near a bound stays damped instead of jumping
//! across its whole range. Proposals that move any coordinate further than
//! `max_coordinate_step` are treated as rejections. Only steps that strictly
//! lower the cost are accepted, so the accepted cost sequence is monotone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Tunables. Defaults are the values recorded in every fit report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub initial_lambda: f64,
    pub lambda_increase: f64,
    pub lambda_decrease: f64,
    /// λ above which the search gives up.
    pub max_lambda: f64,
    /// Forward-difference step is `max(rel * |x|, abs)`.
    pub fd_relative_step: f64,
    pub fd_absolute_step: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when every Jacobian column is this close to orthogonal to the
    /// residual (`|J_jᵀ r| / (‖J_j‖ ‖r‖)`).
    pub gradient_tolerance: f64,
    /// Residual evaluations allowed per free parameter.
    pub evaluations_per_parameter: usize,
    /// Largest move of any single coordinate in one step. Longer proposals
    /// count as rejected (λ grows) without evaluating the residuals.
    pub max_coordinate_step: f64,
    pub execution: Execution,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_increase: 10.0,
            lambda_decrease: 10.0,
            max_lambda: 1e16,
            fd_relative_step: 1e-6,
            fd_absolute_step: 1e-8,
            cost_tolerance: 1e-8,
            gradient_tolerance: 1e-8,
            evaluations_per_parameter: 200,
            max_coordinate_step: 2.0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    /// Residuals are exactly zero.
    ExactFit,
    CostTolerance,
    GradientTolerance,
    /// Damping grew past `max_lambda` without finding a better point: no
    /// descent step of any length lowers the cost, so `x` is a local minimum
    /// to working precision.
    DampingLimit,
    BudgetExhausted,
}

impl ConvergenceStatus {
    pub fn converged(self) -> bool {
        self != ConvergenceStatus::BudgetExhausted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub n_evaluations: usize,
    pub n_iterations: usize,
    pub status: ConvergenceStatus,
    /// Cost at the start point followed by the cost after each accepted step.
    pub accepted_costs: Vec<f64>,
}

fn sum_squares(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forward-difference Jacobian, one column per parameter. Columns are
/// independent and evaluated under `exec`; the result does not depend on
/// the execution mode.
pub fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], settings: &LmSettings) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let columns = settings.execution.map_range(x.len(), |j| {
        let step = (settings.fd_relative_step * x[j].abs()).max(settings.fd_absolute_step);
        let mut xp = x.to_vec();
        xp[j] += step;
        let rp = f(&xp)?;
        if rp.len() != r0.len() {
            return Err(Error::LengthMismatch {
                expected: r0.len(),
                actual: rp.len(),
            });
        }
        // Divide by the step actually representable in floating point.
        let h = xp[j] - x[j];
        Ok(rp.iter().zip(r0).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>())
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(r0.len(), x.len(), |i, j| columns[j][i]))
}

/// Minimises `Σ f(x)²` starting from `x0`.
///
/// Errors from `f` abort the search. A non-finite cost at a trial point only
/// rejects that step, but a non-finite cost at `x0` is an error.
pub fn minimize<F>(f: &F, x0: &[f64], settings: &LmSettings) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x0.len();
    let max_evals = settings.evaluations_per_parameter * n.max(1);
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut evals = 1;
    let mut cost = sum_squares(&r);
    if !cost.is_finite() {
        return Err(Error::NonFiniteInitialCost(cost));
    }
    let mut accepted = vec![cost];
    let mut lambda = settings.initial_lambda;
    let mut iterations = 0;
    // Largest diagonal of JᵀJ seen so far, per parameter.
    let mut scale_memory = vec![0.0f64; n];

    let status = 'outer: loop {
        if cost == 0.0 {
            break ConvergenceStatus::ExactFit;
        }
        if n == 0 {
            break ConvergenceStatus::GradientTolerance;
        }
        if evals + n > max_evals {
            break ConvergenceStatus::BudgetExhausted;
        }
        let jac = jacobian(f, &x, &r, settings)?;
        evals += n;
        iterations += 1;

        let rv = DVector::from_column_slice(&r);
        let gradient = jac.tr_mul(&rv);
        let r_norm = rv.norm();
        let max_cosine = (0..n)
            .map(|j| {
                let col_norm = jac.column(j).norm();
                if col_norm == 0.0 {
                    0.0
                } else {
                    gradient[j].abs() / (col_norm * r_norm)
                }
            })
            .fold(0.0, f64::max);
        if max_cosine < settings.gradient_tolerance {
            break ConvergenceStatus::GradientTolerance;
        }

        let normal = jac.tr_mul(&jac);
        for (m, d) in scale_memory.iter_mut().zip(normal.diagonal().iter()) {
            *m = m.max(*d);
        }
        let diag_max = scale_memory.iter().copied().fold(0.0, f64::max);
        let floor = if diag_max > 0.0 { 1e-12 * diag_max } else { 1.0 };
        let scale: Vec<f64> = scale_memory.iter().map(|d| d.max(floor)).collect();

        loop {
            if lambda > settings.max_lambda {
                break 'outer ConvergenceStatus::DampingLimit;
            }
            let mut damped = normal.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * scale[j];
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&gradient))) else {
                lambda *= settings.lambda_increase;
                continue;
            };
            if step.iter().any(|d| d.abs() > settings.max_coordinate_step) {
                lambda *= settings.lambda_increase;
                continue;
            }
            if evals >= max_evals {
                break 'outer ConvergenceStatus::BudgetExhausted;
            }
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_r = f(&trial)?;
            evals += 1;
            let trial_cost = sum_squares(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let decrease = (cost - trial_cost) / cost;
                x = trial;
                r = trial_r;
                cost = trial_cost;
                accepted.push(cost);
                lambda = (lambda / settings.lambda_decrease).max(f64::MIN_POSITIVE);
                if decrease < settings.cost_tolerance {
                    break 'outer ConvergenceStatus::CostTolerance;
                }
                break;
            }
            lambda *= settings.lambda_increase;
        }
    };

    Ok(LmReport {
        x,
        residuals: r,
        cost,
        n_evaluations: evals,
        n_iterations: iterations,
        status,
        accepted_costs: accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
    }

    #[test]
    fn solves_rosenbrock() {
        let rep = minimize(&rosenbrock, &[-1.2, 1.0], &LmSettings::default()).unwrap();
        assert!(rep.status.converged(), "{:?}", rep.status);
        assert!(
            (rep.x[0] - 1.0).abs() < 1e-6 && (rep.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            rep.x
        );
        assert!(rep.accepted_costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn exponential_decay_curve() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp() + 0.5).collect();
        let f = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(t.iter()
                .zip(&y)
                .map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y)
                .collect())
        };
        let rep = minimize(&f, &[1.0, 0.2, 0.0], &LmSettings::default()).unwrap();
        assert!(rep.cost < 1e-16, "{}", rep.cost);
        assert!((rep.x[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn already_optimal_start_stops_immediately() {
        let f = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] - 2.0, p[1] + 1.0]) };
        let rep = minimize(&f, &[2.0, -1.0], &LmSettings::default()).unwrap();
        assert_eq!(rep.status, ConvergenceStatus::ExactFit);
        assert_eq!(rep.n_evaluations, 1);
    }

    #[test]
    fn budget_is_respected() {
        let settings = LmSettings {
            evaluations_per_parameter: 3,
            ..LmSettings::default()
        };
        let rep = minimize(&rosenbrock, &[-1.2, 1.0], &settings).unwrap();
        assert_eq!(rep.status, ConvergenceStatus::BudgetExhausted);
        assert!(rep.n_evaluations <= 6);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| -> Result<Vec<f64>> { Ok(vec![f64::NAN]) };
        assert!(matches!(
            minimize(&f, &[0.0], &LmSettings::default()),
            Err(Error::NonFiniteInitialCost(_))
        ));
    }

    #[test]
    fn coordinate_steps_are_bounded() {
        // Gauss-Newton would jump straight to x = 20.
        let f = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] - 20.0]) };
        let rep = minimize(&f, &[0.0], &LmSettings::default()).unwrap();
        let x: Vec<f64> = std::iter::once(0.0)
            .chain(rep.accepted_costs.iter().skip(1).map(|c| 20.0 - c.sqrt()))
            .collect();
        assert!(x.windows(2).all(|w| (w[1] - w[0]).abs() <= 2.0 + 1e-9), "{x:?}");
        assert!((rep.x[0] - 20.0).abs() < 1e-6, "{:?}", rep);
    }

    #[test]
    fn jacobian_modes_agree() {
        let x = [0.3, -0.8];
        let r = rosenbrock(&x).unwrap();
        let par = jacobian(&rosenbrock, &x, &r, &LmSettings::default()).unwrap();
        let seq = jacobian(
            &rosenbrock,
            &x,
            &r,
            &LmSettings {
                execution: Execution::Sequential,
                ..LmSettings::default()
            },
        )
        .unwrap();
        assert_eq!(par, seq);
        // d/dx0 of 10(x1 - x0²) = -20 x0
        assert!((par[(0, 0)] + 6.0).abs() < 1e-4);
        assert!((par[(0, 1)] - 10.0).abs() < 1e-6);
    }
}
