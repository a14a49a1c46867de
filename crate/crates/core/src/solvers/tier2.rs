use std::time::Instant;

use faer::{Mat, MatRef};

use super::{
    line_search, IterationEvent, IterationObserver, NoObserver, PartialRun, ReducedTrajectory,
    SolverConfig, StepStats,
};
use crate::error::{check_len, GnatError, Result};
use crate::linalg;
use crate::model::{FullOrderModel, ParameterPoint};

/// Gauss–Newton direction `s = argmin ‖(JΦ)·s + r‖₂`.
pub fn pg_direction(jacobian_basis: MatRef<'_, f64>, residual: &[f64]) -> Result<Vec<f64>> {
    let neg: Vec<f64> = residual.iter().map(|v| -v).collect();
    linalg::lstsq(jacobian_basis, &neg, "Gauss-Newton Jacobian")
}

/// Tier II: least-squares Petrov–Galerkin projection, minimizing the full
/// backward-Euler residual over `w⁰ + Φ_w·y` by Gauss–Newton at every step.
pub fn solve_tier2_pg<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<ReducedTrajectory> {
    solve_tier2_pg_observed(mu, model, phi_w, initial, config, &mut NoObserver)
}

/// [`solve_tier2_pg`] reporting every iteration to `observer`.
pub fn solve_tier2_pg_observed<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    initial: &[f64],
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<ReducedTrajectory> {
    solve_tier2_pg_partial(mu, model, phi_w, initial, config, observer)?.into_result()
}

/// [`solve_tier2_pg_observed`] keeping the steps completed before a failure.
pub fn solve_tier2_pg_partial<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    initial: &[f64],
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<PartialRun> {
    config.validate()?;
    let n = model.dim();
    check_len("trial basis rows", n, phi_w.nrows())?;
    check_len("initial condition", n, initial.len())?;
    let time = *model.time();
    let nw = phi_w.ncols();
    let state = |y: &[f64]| {
        let mut w = linalg::matvec(phi_w, y);
        linalg::axpy(1.0, initial, &mut w);
        w
    };

    let mut out = ReducedTrajectory::start(mu, nw, config.record_iterates);
    let mut prev = initial.to_vec();
    let failure = (|| -> Result<()> {
        for step in 1..=time.num_steps {
            let started = Instant::now();
            let t_next = time.time(step);
            let y0 = out.coords[step - 1].clone();
            let outcome = gauss_newton(
                &y0,
                config,
                "tier II Gauss-Newton",
                step,
                |y| {
                    let w = state(y);
                    let r = model.residual(&w, &prev, t_next, mu)?;
                    let jphi = model
                        .residual_jacobian(&w, &prev, t_next, mu)?
                        .mul_dense(phi_w);
                    Ok((r, jphi))
                },
                |y| model.residual(&state(y), &prev, t_next, mu),
                |k, r, jphi, s| {
                    observer.observe(IterationEvent::TierTwo {
                        mu: *mu,
                        step,
                        iteration: k,
                        residual: r,
                        jacobian_basis: jphi,
                        direction: s,
                    })
                },
            )?;
            prev = state(&outcome.coords);
            let stats = StepStats {
                iterations: outcome.iterations,
                residual_norm: outcome.residual_norm,
                wall_ns: started.elapsed().as_nanos() as u64,
            };
            out.push_step(t_next, outcome.coords, stats, outcome.iterates);
        }
        Ok(())
    })()
    .err();
    Ok(PartialRun {
        trajectory: out,
        failure,
    })
}

pub(crate) struct GnOutcome {
    pub coords: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `y⁽⁰⁾, y⁽¹⁾, …` including the accepted iterate.
    pub iterates: Vec<Vec<f64>>,
}

/// Gauss–Newton on `min ‖r(y)‖₂` for one time step.
///
/// Stops when `‖(JΦ)ᵀr‖₂ ≤ gn_gradient_tol`, `‖r‖₂ ≤ newton_abs_tol`, or
/// after a step with `‖αs‖₂ ≤ gn_step_tol·max(1, ‖y‖₂)`. Running out of
/// iterations is a step failure.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gauss_newton(
    y0: &[f64],
    config: &SolverConfig,
    solver: &'static str,
    step: usize,
    mut evaluate: impl FnMut(&[f64]) -> Result<(Vec<f64>, Mat<f64>)>,
    mut residual: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut on_direction: impl FnMut(usize, &[f64], MatRef<'_, f64>, &[f64]),
) -> Result<GnOutcome> {
    let mut y = y0.to_vec();
    let mut iterates = vec![y.clone()];
    let mut small_step = false;
    let mut k = 0;
    loop {
        let (r, jphi) = evaluate(&y)?;
        let rnorm = linalg::norm2(&r);
        if !rnorm.is_finite() {
            return Err(GnatError::StepFailure {
                solver,
                step,
                iterations: k,
                residual: rnorm,
            });
        }
        let grad = linalg::matvec_t(jphi.as_ref(), &r);
        if small_step
            || linalg::norm2(&grad) <= config.gn_gradient_tol
            || rnorm <= config.newton_abs_tol
        {
            return Ok(GnOutcome {
                coords: y,
                iterations: k,
                residual_norm: rnorm,
                iterates,
            });
        }
        if k == config.gn_max_iters {
            return Err(GnatError::StepFailure {
                solver,
                step,
                iterations: k,
                residual: rnorm,
            });
        }
        let s = pg_direction(jphi.as_ref(), &r).map_err(|_| GnatError::Singular {
            what: "reduced Jacobian",
            step,
            iteration: k,
            dump: y.clone(),
        })?;
        on_direction(k, &r, jphi.as_ref(), &s);
        let f0 = 0.5 * rnorm * rnorm;
        let alpha = line_search(config.step_policy, f0, linalg::dot(&grad, &s), |alpha| {
            let mut trial = y.clone();
            linalg::axpy(alpha, &s, &mut trial);
            let rt = residual(&trial)?;
            Ok(0.5 * linalg::dot(&rt, &rt))
        })?;
        linalg::axpy(alpha, &s, &mut y);
        iterates.push(y.clone());
        small_step = alpha * linalg::norm2(&s) <= config.gn_step_tol * linalg::norm2(&y).max(1.0);
        k += 1;
    }
}
