use std::time::Instant;

use super::{
    line_search, FullTrajectory, IterationEvent, IterationObserver, SolverConfig, StepStats,
};
use crate::error::{GnatError, Result};
use crate::linalg;
use crate::model::{FullOrderModel, ParameterPoint};

/// Tier I: Newton's method with the banded Jacobian at every backward-Euler
/// step, starting from the previous state.
///
/// A step converges when `‖R‖₂ ≤ max(ε_abs, ε_rel·‖R⁽⁰⁾‖₂)`. The observer sees
/// the residual of every iteration that produces a Newton update.
pub fn solve_fom<M: FullOrderModel>(
    model: &M,
    mu: &ParameterPoint,
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<FullTrajectory> {
    solve_fom_from(model, mu, model.initial_condition(mu), config, observer)
}

/// [`solve_fom`] from an explicit initial state.
pub fn solve_fom_from<M: FullOrderModel>(
    model: &M,
    mu: &ParameterPoint,
    initial: Vec<f64>,
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<FullTrajectory> {
    config.validate()?;
    crate::error::check_len("initial state", model.dim(), initial.len())?;
    let time = *model.time();
    let mut states = Vec::with_capacity(time.num_steps + 1);
    let mut stats = Vec::with_capacity(time.num_steps);
    states.push(initial);

    for n in 0..time.num_steps {
        let started = Instant::now();
        let t_next = time.time(n + 1);
        let prev = &states[n];
        let mut w = prev.clone();
        let mut r = model.residual(&w, prev, t_next, mu)?;
        let mut rnorm = linalg::norm2(&r);
        let tol = config.newton_abs_tol.max(config.newton_rel_tol * rnorm);
        let mut k = 0;
        while rnorm > tol {
            if k == config.max_newton_iters || !rnorm.is_finite() {
                return Err(GnatError::StepFailure {
                    solver: "tier I Newton",
                    step: n + 1,
                    iterations: k,
                    residual: rnorm,
                });
            }
            observer.observe(IterationEvent::TierOne {
                mu: *mu,
                step: n + 1,
                iteration: k,
                residual: &r,
            });
            let jac = model.residual_jacobian(&w, prev, t_next, mu)?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = jac.solve(&neg).ok_or(GnatError::Singular {
                what: "tier I Jacobian",
                step: n + 1,
                iteration: k,
                dump: w.clone(),
            })?;
            let f0 = 0.5 * rnorm * rnorm;
            let alpha = line_search(config.step_policy, f0, -2.0 * f0, |alpha| {
                let mut trial = w.clone();
                linalg::axpy(alpha, &delta, &mut trial);
                let rt = model.residual(&trial, prev, t_next, mu)?;
                Ok(0.5 * linalg::dot(&rt, &rt))
            })?;
            linalg::axpy(alpha, &delta, &mut w);
            r = model.residual(&w, prev, t_next, mu)?;
            rnorm = linalg::norm2(&r);
            k += 1;
        }
        stats.push(StepStats {
            iterations: k,
            residual_norm: rnorm,
            wall_ns: started.elapsed().as_nanos() as u64,
        });
        states.push(w);
    }

    Ok(FullTrajectory {
        mu: *mu,
        times: time.times(),
        states,
        stats,
    })
}
