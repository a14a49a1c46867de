//! Tier I (full-order Newton), tier II (Petrov–Galerkin Gauss–Newton), tier
//! III (GNAT) and the baseline hyper-reduction solvers.

mod baselines;
mod fom;
mod gnat;
mod observer;
mod outputs;
mod tier2;

pub use baselines::{
    baseline_collocation_galerkin, baseline_collocation_least_squares, baseline_deim_like,
    collocation_galerkin_partial, collocation_least_squares_partial, deim_like_partial,
};
pub use fom::{solve_fom, solve_fom_from};
pub use gnat::{gnat_direction, solve_gnat_online, solve_gnat_online_partial};
pub use observer::{IterationEvent, IterationObserver, NoObserver};
pub use outputs::{compute_outputs, OutputSeries};
pub use tier2::{pg_direction, solve_tier2_pg, solve_tier2_pg_observed, solve_tier2_pg_partial};

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::ParameterPoint;

/// Step-length rule for Newton and Gauss–Newton updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepPolicy {
    /// α = 1.
    Unit,
    /// Armijo backtracking on the solver's own least-squares objective.
    Backtracking {
        c: f64,
        rho: f64,
        max_halvings: usize,
    },
}

impl StepPolicy {
    pub fn armijo() -> Self {
        StepPolicy::Backtracking {
            c: 1e-4,
            rho: 0.5,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Absolute residual tolerance ε_Newton.
    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub max_newton_iters: usize,
    pub step_policy: StepPolicy,
    /// Tier II stops once `‖(JΦ)ᵀr‖₂` falls below this.
    pub gn_gradient_tol: f64,
    /// Tier II also stops once `‖s‖₂ ≤ gn_step_tol·max(1, ‖y‖₂)`.
    pub gn_step_tol: f64,
    pub gn_max_iters: usize,
    /// GNAT stops once `‖B·D⁽ᵏ⁾‖₂ ≤ max(gnat_rel_tol·‖B·D⁽⁰⁾‖₂, gnat_abs_tol)`.
    pub gnat_rel_tol: f64,
    pub gnat_abs_tol: f64,
    /// Keep every Gauss–Newton iterate in the reduced trajectory.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_abs_tol: 1e-8,
            newton_rel_tol: 1e-6,
            max_newton_iters: 20,
            step_policy: StepPolicy::Unit,
            gn_gradient_tol: 1e-10,
            gn_step_tol: 1e-9,
            gn_max_iters: 20,
            gnat_rel_tol: 1e-6,
            gnat_abs_tol: 1e-12,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let tols = [
            self.newton_abs_tol,
            self.newton_rel_tol,
            self.gn_gradient_tol,
            self.gn_step_tol,
            self.gnat_rel_tol,
            self.gnat_abs_tol,
        ];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(crate::GnatError::InvalidConfig(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_newton_iters == 0 || self.gn_max_iters == 0 {
            return Err(crate::GnatError::InvalidConfig(
                "iteration limits must be at least 1".into(),
            ));
        }
        if let StepPolicy::Backtracking { c, rho, .. } = self.step_policy {
            if !(c > 0.0 && c < 1.0 && rho > 0.0 && rho < 1.0) {
                return Err(crate::GnatError::InvalidConfig(
                    "backtracking needs 0 < c < 1 and 0 < rho < 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Convergence record of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StepStats {
    pub iterations: usize,
    pub residual_norm: f64,
    pub wall_ns: u64,
}

/// Tier I solution: `nt + 1` full states.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTrajectory {
    pub mu: ParameterPoint,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// One entry per computed step (`stats[n]` describes `states[n + 1]`).
    pub stats: Vec<StepStats>,
}

impl FullTrajectory {
    pub fn num_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn wall_ns(&self) -> u64 {
        self.stats.iter().map(|s| s.wall_ns).sum()
    }

    pub fn max_residual_norm(&self) -> f64 {
        self.stats
            .iter()
            .map(|s| s.residual_norm)
            .fold(0.0, f64::max)
    }
}

/// Work counters of the online stage, per Gauss–Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct OnlineCost {
    pub total_iterations: usize,
    pub max_residual_rows_per_iteration: usize,
    pub max_state_entries_per_iteration: usize,
    pub total_residual_rows: usize,
    pub total_state_entries: usize,
}

impl OnlineCost {
    pub(crate) fn record(&mut self, rows: usize, entries: usize) {
        self.total_iterations += 1;
        self.total_residual_rows += rows;
        self.total_state_entries += entries;
        self.max_residual_rows_per_iteration = self.max_residual_rows_per_iteration.max(rows);
        self.max_state_entries_per_iteration = self.max_state_entries_per_iteration.max(entries);
    }
}

/// Reduced solution: generalized coordinates `w_r⁰ … w_r^nt` of the affine
/// trial subspace `w⁰ + Φ_w·w_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub mu: ParameterPoint,
    pub times: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
    pub stats: Vec<StepStats>,
    pub cost: OnlineCost,
    /// Every iterate `w_r^{n+1(k)}`, k ≥ 0, per step, when requested.
    pub iterates: Option<Vec<Vec<Vec<f64>>>>,
}

impl ReducedTrajectory {
    /// Trajectory holding only `w_r⁰ = 0`.
    pub(crate) fn start(mu: &ParameterPoint, nw: usize, record_iterates: bool) -> Self {
        ReducedTrajectory {
            mu: *mu,
            times: vec![0.0],
            coords: vec![vec![0.0; nw]],
            stats: Vec::new(),
            cost: OnlineCost::default(),
            iterates: record_iterates.then(Vec::new),
        }
    }

    pub(crate) fn push_step(
        &mut self,
        time: f64,
        coords: Vec<f64>,
        stats: StepStats,
        iterates: Vec<Vec<f64>>,
    ) {
        self.times.push(time);
        self.coords.push(coords);
        self.stats.push(stats);
        if let Some(it) = self.iterates.as_mut() {
            it.push(iterates);
        }
    }

    pub fn num_steps(&self) -> usize {
        self.coords.len().saturating_sub(1)
    }

    pub fn wall_ns(&self) -> u64 {
        self.stats.iter().map(|s| s.wall_ns).sum()
    }

    /// Full states `w⁰ + Φ·w_rⁿ`. Costs O(N·n_w) per step; diagnostics only.
    pub fn reconstruct(&self, initial: &[f64], basis: MatRef<'_, f64>) -> Vec<Vec<f64>> {
        self.coords
            .iter()
            .map(|y| {
                let mut w = linalg::matvec(basis, y);
                for (wi, w0) in w.iter_mut().zip(initial) {
                    *wi += w0;
                }
                w
            })
            .collect()
    }
}

/// A reduced run that may have stopped early: the steps completed so far and
/// the error that ended it, if any.
#[derive(Debug)]
pub struct PartialRun {
    pub trajectory: ReducedTrajectory,
    pub failure: Option<crate::GnatError>,
}

impl PartialRun {
    pub fn into_result(self) -> crate::Result<ReducedTrajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.trajectory),
        }
    }
}

/// `(1/nt)·Σₙ ‖wⁿ − w̃ⁿ‖₂ / ‖wⁿ‖₂` over steps 1..=nt, plus the variant
/// normalized by the time-averaged reference norm.
pub fn relative_discrepancy(reference: &[Vec<f64>], approx: &[Vec<f64>]) -> (f64, f64) {
    let steps = reference.len().min(approx.len());
    if steps < 2 {
        return (0.0, 0.0);
    }
    let mut rel = 0.0;
    let mut err_sum = 0.0;
    let mut norm_sum = 0.0;
    for n in 1..steps {
        let e = linalg::norm2(&linalg::sub(&reference[n], &approx[n]));
        let r = linalg::norm2(&reference[n]);
        rel += e / r;
        err_sum += e;
        norm_sum += r;
    }
    let nt = (steps - 1) as f64;
    (rel / nt, err_sum / norm_sum)
}

/// Backtracking line search on a scalar objective.
pub(crate) fn line_search(
    policy: StepPolicy,
    f0: f64,
    slope: f64,
    mut objective: impl FnMut(f64) -> crate::Result<f64>,
) -> crate::Result<f64> {
    match policy {
        StepPolicy::Unit => Ok(1.0),
        StepPolicy::Backtracking {
            c,
            rho,
            max_halvings,
        } => {
            let mut alpha = 1.0;
            for _ in 0..max_halvings {
                let f = objective(alpha)?;
                if f.is_finite() && f <= f0 + c * alpha * slope {
                    return Ok(alpha);
                }
                alpha *= rho;
            }
            Ok(alpha)
        }
    }
}
