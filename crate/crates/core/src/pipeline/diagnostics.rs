use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{create, write_json, write_series_csv};
use super::{OnlineRom, Stage, StageResult};
use crate::bounds::{
    bound_terms, certified_lipschitz_a, estimate_lipschitz_a, GappyProjector, LipschitzEstimate,
};
use crate::error::GnatError;
use crate::linalg;
use crate::model::{FullOrderModel, ParameterPoint};
use crate::solvers::{solve_fom, solve_gnat_online, NoObserver};

/// States drawn from each trajectory as Lipschitz probes.
const PROBES_PER_TRAJECTORY: usize = 6;
/// Grid resolution of the certified Lipschitz bound.
const CERTIFIED_GRID: usize = 401;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub mu: ParameterPoint,
    pub sampled_lipschitz: LipschitzEstimate,
    pub certified_lipschitz: Option<LipschitzEstimate>,
    /// Why no certified estimate exists, when it doesn't.
    pub certified_failure: Option<String>,
    /// The constant the cumulative bounds use: the certified one when
    /// available, else the sampled one.
    pub lipschitz_used: LipschitzEstimate,
    pub r_inv_norm: f64,
    pub neglected_energy: f64,
    /// `‖w^nt − w̃^nt‖`.
    pub final_error: f64,
    pub final_bounds: [f64; 3],
    /// Steps where the error exceeds the `b`, `c` and `d` bound respectively.
    pub violations: [usize; 3],
}

fn subsample(states: &[Vec<f64>], count: usize) -> impl Iterator<Item = &Vec<f64>> {
    let last = states.len().saturating_sub(1);
    let count = count.min(states.len()).max(1);
    (0..count).map(move |k| {
        &states[if count == 1 {
            last
        } else {
            k * last / (count - 1)
        }]
    })
}

/// Error-bound diagnostics at `mu` (default: the online input). Writes
/// `bounds.csv` (per-step terms), `state_errors.csv` (true error beside the
/// three cumulative bounds) and `bounds.json` to `out`.
pub fn run_bounds(
    manifest_path: &Path,
    mu: Option<ParameterPoint>,
    out: &Path,
) -> StageResult<BoundsReport> {
    let rom = OnlineRom::load(manifest_path).stage("load")?;
    std::fs::create_dir_all(out)
        .map_err(|e| GnatError::io(out, e))
        .stage("persist")?;
    let mu = mu.unwrap_or(rom.manifest.online_input);
    let solver = &rom.manifest.solver;
    let model = &rom.model;

    let reference = solve_fom(model, &mu, solver, &mut NoObserver).stage("reference")?;
    let traj = solve_gnat_online(&mu, model, &rom.operators, &rom.sets, solver).stage("online")?;
    let phi_w = rom.state_basis().stage("load")?;
    let states = traj.reconstruct(&reference.states[0], phi_w.basis.as_ref());

    let mut probes: Vec<Vec<f64>> = Vec::new();
    for k in 0..rom.manifest.training_inputs.len() {
        let t = rom.training_trajectory(k).stage("load")?;
        probes.extend(subsample(&t.states, PROBES_PER_TRAJECTORY).cloned());
    }
    probes.extend(subsample(&states, PROBES_PER_TRAJECTORY).cloned());
    let nt = model.time().num_steps;
    let mut steps = vec![1, nt.div_ceil(2), nt];
    steps.dedup();
    let sampled = estimate_lipschitz_a(model, &mu, &probes, &steps).stage("lipschitz")?;
    let state_bound = probes.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let (certified, certified_failure) =
        match certified_lipschitz_a(model, state_bound, CERTIFIED_GRID) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
    drop(probes);

    let phi_r = rom.residual_basis().stage("load")?;
    let gappy =
        GappyProjector::new(phi_r.basis.as_ref(), &rom.sets.residual_indices).stage("bounds")?;
    let neglected_energy: f64 = phi_r.singular_values[phi_r.size()..]
        .iter()
        .map(|s| s * s)
        .sum();
    let a = certified.unwrap_or(sampled);
    let trace = bound_terms(
        &states,
        model,
        &mu,
        &gappy,
        solver.newton_abs_tol,
        a,
        Some(neglected_energy),
    )
    .stage("bounds")?;

    let path = out.join("bounds.csv");
    let mut w = create(&path).stage("persist")?;
    trace
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| GnatError::io(&path, e))
        .stage("persist")?;

    let errors: Vec<f64> = reference
        .states
        .iter()
        .zip(&states)
        .map(|(r, s)| linalg::norm2(&linalg::sub(r, s)))
        .collect();
    let with_zero = |v: &[f64]| {
        std::iter::once(0.0)
            .chain(v.iter().copied())
            .collect::<Vec<_>>()
    };
    write_series_csv(
        &out.join("state_errors.csv"),
        &reference.times,
        &[
            "error".into(),
            "bound_b".into(),
            "bound_c".into(),
            "bound_d".into(),
        ],
        &[
            errors.clone(),
            with_zero(&trace.cum_b),
            with_zero(&trace.cum_c),
            with_zero(&trace.cum_d),
        ],
    )
    .stage("persist")?;

    let mut violations = [0usize; 3];
    for (n, e) in errors.iter().enumerate().skip(1) {
        for (v, cum) in violations
            .iter_mut()
            .zip([&trace.cum_b, &trace.cum_c, &trace.cum_d])
        {
            if *e > cum[n - 1] {
                *v += 1;
            }
        }
    }
    let last = trace.b.len() - 1;
    let report = BoundsReport {
        mu,
        sampled_lipschitz: sampled,
        certified_lipschitz: certified,
        certified_failure,
        lipschitz_used: a,
        r_inv_norm: gappy.r_inv_norm,
        neglected_energy,
        final_error: errors[errors.len() - 1],
        final_bounds: [trace.cum_b[last], trace.cum_c[last], trace.cum_d[last]],
        violations,
    };
    write_json(&out.join("bounds.json"), &report).stage("persist")?;
    Ok(report)
}
