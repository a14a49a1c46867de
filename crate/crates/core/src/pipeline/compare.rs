use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::artifacts::{self, write_convergence_csv, write_json, write_series_csv};
use super::{OnlineRom, Stage, StageResult};
use crate::error::{GnatError, Result};
use crate::linalg;
use crate::model::{FullOrderModel, ParameterPoint};
use crate::snapshots;
use crate::solvers::{
    collocation_galerkin_partial, collocation_least_squares_partial, deim_like_partial,
    relative_discrepancy, solve_fom, solve_gnat_online_partial, solve_tier2_pg_partial,
    FullTrajectory, NoObserver, PartialRun,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gnat,
    Tier2Pg,
    CollocationGalerkin,
    CollocationLs,
    DeimLike,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gnat,
        Method::Tier2Pg,
        Method::CollocationGalerkin,
        Method::CollocationLs,
        Method::DeimLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gnat => "gnat",
            Method::Tier2Pg => "tier2-pg",
            Method::CollocationGalerkin => "collocation-galerkin",
            Method::CollocationLs => "collocation-ls",
            Method::DeimLike => "deim-like",
        }
    }

    /// Comma-separated method names, or `all`.
    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        if text.trim() == "all" {
            return Ok(Method::ALL.to_vec());
        }
        let mut out: Vec<Method> = Vec::new();
        for m in text.split(',') {
            let m: Method = m.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl FromStr for Method {
    type Err = GnatError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| GnatError::UnknownMethod(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    /// Defaults to the manifest's online input.
    pub mu: Option<ParameterPoint>,
    /// Stored tier I trajectory at `mu`; computed when absent.
    pub reference: Option<PathBuf>,
    /// Run every solver once untimed before the timed run.
    pub warmup: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            mu: None,
            reference: None,
            warmup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    /// Set when the run stopped early; the series then covers
    /// `steps_completed` steps only.
    pub failure: Option<String>,
    pub steps_completed: usize,
    /// `(1/n)·Σ ‖wⁿ − w̃ⁿ‖/‖wⁿ‖` over the completed steps.
    pub discrepancy: f64,
    /// `Σ‖wⁿ − w̃ⁿ‖ / Σ‖wⁿ‖` over the completed steps.
    pub discrepancy_norm_averaged: f64,
    pub wall_ns: u64,
    /// Tier I wall time over this method's.
    pub wall_time_ratio: f64,
    pub avg_iterations: f64,
    pub max_residual_rows_per_iteration: usize,
    pub max_state_entries_per_iteration: usize,
    /// `max_residual_rows_per_iteration / N`.
    pub rows_touched_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mu: ParameterPoint,
    pub full_dim: usize,
    pub num_steps: usize,
    pub reference_wall_ns: u64,
    /// `n_i / n_R`.
    pub sample_index_factor: f64,
    pub methods: Vec<MethodMetrics>,
    /// Completed methods by increasing discrepancy, then failed ones.
    pub ranking: Vec<Method>,
}

fn reference_trajectory(
    rom: &OnlineRom,
    mu: &ParameterPoint,
    options: &CompareOptions,
) -> Result<(FullTrajectory, u64)> {
    let solver = &rom.manifest.solver;
    if options.warmup {
        solve_fom(&rom.model, mu, solver, &mut NoObserver)?;
    }
    let started = Instant::now();
    let timed = solve_fom(&rom.model, mu, solver, &mut NoObserver)?;
    let wall = started.elapsed().as_nanos() as u64;
    let Some(path) = &options.reference else {
        return Ok((timed, wall));
    };
    let stored = artifacts::full_trajectory_from_matrix(&snapshots::load(path)?)?;
    if stored.mu != *mu || stored.states.len() != timed.states.len() {
        return Err(GnatError::InvalidConfig(format!(
            "reference at {} with {} states does not match {} with {} states",
            stored.mu,
            stored.states.len(),
            mu,
            timed.states.len()
        )));
    }
    Ok((stored, wall))
}

fn run_method(rom: &OnlineRom, method: Method, mu: &ParameterPoint) -> Result<PartialRun> {
    let solver = &rom.manifest.solver;
    let w0 = rom.model.initial_condition(mu);
    match method {
        Method::Gnat => {
            solve_gnat_online_partial(mu, &rom.model, &rom.operators, &rom.sets, solver)
        }
        Method::Tier2Pg => {
            let phi = rom.state_basis()?;
            solve_tier2_pg_partial(
                mu,
                &rom.model,
                phi.basis.as_ref(),
                &w0,
                solver,
                &mut NoObserver,
            )
        }
        Method::CollocationGalerkin => {
            let phi = rom.state_basis()?;
            collocation_galerkin_partial(mu, &rom.model, phi.basis.as_ref(), &rom.sets, &w0, solver)
        }
        Method::CollocationLs => {
            let phi = rom.state_basis()?;
            collocation_least_squares_partial(
                mu,
                &rom.model,
                phi.basis.as_ref(),
                &rom.sets,
                &w0,
                solver,
            )
        }
        Method::DeimLike => {
            let phi = rom.state_basis()?;
            let res = rom.residual_basis()?;
            let ni = rom.sets.num_samples();
            if res.size() < ni {
                return Err(GnatError::InvalidConfig(format!(
                    "DEIM-like interpolation needs {ni} residual modes, the manifest has {}",
                    res.size()
                )));
            }
            deim_like_partial(
                mu,
                &rom.model,
                phi.basis.as_ref(),
                res.basis.subcols(0, ni),
                &rom.sets,
                &w0,
                solver,
            )
        }
    }
}

/// Runs each method at the comparison input and writes
/// `compare_report.json`, per-method convergence logs and `errors.csv`
/// (relative state error per step and method) to `out`.
pub fn run_compare(
    manifest_path: &Path,
    methods: &[Method],
    options: &CompareOptions,
    out: &Path,
) -> StageResult<MetricsReport> {
    let rom = OnlineRom::load(manifest_path).stage("load")?;
    std::fs::create_dir_all(out)
        .map_err(|e| GnatError::io(out, e))
        .stage("persist")?;
    let mu = options.mu.unwrap_or(rom.manifest.online_input);
    let (reference, reference_wall_ns) =
        reference_trajectory(&rom, &mu, options).stage("reference")?;
    if options.reference.is_none() {
        snapshots::persist(
            &artifacts::full_trajectory_matrix(&reference),
            out.join("reference.snap"),
        )
        .stage("persist")?;
    }
    let phi_w = rom.state_basis().stage("load")?;
    let n = rom.model.dim();

    let mut metrics = Vec::new();
    let mut error_series = Vec::new();
    for &method in methods {
        if options.warmup {
            // Setup failures surface in the timed run below.
            let _ = run_method(&rom, method, &mu);
        }
        let started = Instant::now();
        let run = run_method(&rom, method, &mu);
        let wall_ns = started.elapsed().as_nanos() as u64;
        let (traj, failure) = match run {
            Ok(PartialRun {
                trajectory,
                failure,
            }) => (Some(trajectory), failure.map(|e| e.to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        let states = traj
            .as_ref()
            .map(|t| t.reconstruct(&reference.states[0], phi_w.basis.as_ref()))
            .unwrap_or_default();
        let (discrepancy, discrepancy_norm_averaged) =
            relative_discrepancy(&reference.states, &states);
        error_series.push(
            states
                .iter()
                .zip(&reference.states)
                .map(|(s, r)| linalg::norm2(&linalg::sub(r, s)) / linalg::norm2(r))
                .collect::<Vec<f64>>(),
        );
        let steps_completed = states.len().saturating_sub(1);
        let (avg_iterations, rows, entries) = match &traj {
            Some(t) => {
                let it: usize = t.stats.iter().map(|s| s.iterations).sum();
                let (r, e) = if method == Method::Tier2Pg {
                    (n, n)
                } else {
                    (
                        t.cost.max_residual_rows_per_iteration,
                        t.cost.max_state_entries_per_iteration,
                    )
                };
                (it as f64 / t.num_steps().max(1) as f64, r, e)
            }
            None => (0.0, 0, 0),
        };
        if let Some(t) = &traj {
            write_convergence_csv(
                &out.join(format!("{}_convergence.csv", method.name())),
                &t.stats,
            )
            .stage("persist")?;
        }
        metrics.push(MethodMetrics {
            method,
            failure,
            steps_completed,
            discrepancy,
            discrepancy_norm_averaged,
            wall_ns,
            wall_time_ratio: reference_wall_ns as f64 / wall_ns.max(1) as f64,
            avg_iterations,
            max_residual_rows_per_iteration: rows,
            max_state_entries_per_iteration: entries,
            rows_touched_ratio: rows as f64 / n as f64,
        });
    }

    let names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    write_series_csv(
        &out.join("errors.csv"),
        &reference.times,
        &names,
        &error_series,
    )
    .stage("persist")?;

    let mut ranking: Vec<&MethodMetrics> = metrics.iter().collect();
    ranking.sort_by(|x, y| {
        (x.failure.is_some(), x.discrepancy)
            .partial_cmp(&(y.failure.is_some(), y.discrepancy))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s = rom.manifest.sizes;
    let report = MetricsReport {
        mu,
        full_dim: n,
        num_steps: rom.model.time().num_steps,
        reference_wall_ns,
        sample_index_factor: s.n_i as f64 / s.n_r as f64,
        ranking: ranking.iter().map(|m| m.method).collect(),
        methods: metrics,
    };
    write_json(&out.join("compare_report.json"), &report).stage("persist")?;
    Ok(report)
}
