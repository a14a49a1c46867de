use std::path::Path;
use std::time::Instant;

use faer::Mat;

use super::artifacts::{self, write_convergence_csv, write_json};
use super::{
    ArtifactPaths, OfflineConfig, OfflineCounters, OfflineTimings, RomSizes, RunManifest, Stage,
    StageResult, MANIFEST_FILE, SCHEMA_VERSION,
};
use crate::error::{GnatError, Result};
use crate::model::FullOrderModel;
use crate::par;
use crate::pod::{compute_pod, PodBasis, Truncation};
use crate::sampling::{compute_online_operators, greedy_select, residual_pinv_rank, SampleSets};
use crate::snapshots::{
    self, collect_state_snapshots, HyperReductionCollector, SnapshotMatrix, SnapshotProcedure,
};
use crate::solvers::{solve_fom, solve_tier2_pg_observed, FullTrajectory, NoObserver};

fn persist(m: &SnapshotMatrix, dir: &Path, name: &str) -> Result<String> {
    snapshots::persist(m, dir.join(name))?;
    Ok(name.to_string())
}

fn pod(m: SnapshotMatrix, truncation: Truncation, normalize: bool) -> Result<PodBasis> {
    let m = if normalize { m.normalized() } else { m };
    compute_pod(m.columns.as_ref(), truncation)
}

/// Offline stage: training solves, POD bases, greedy sample selection and the
/// online operators. Everything is written to `out`, ending with
/// `manifest.json`.
pub fn run_offline(config: &OfflineConfig, out: &Path) -> StageResult<RunManifest> {
    config.validate().stage("config")?;
    let model = config.model().stage("config")?;
    std::fs::create_dir_all(out)
        .map_err(|e| GnatError::io(out, e))
        .stage("persist")?;
    let started = Instant::now();
    let mut timings = OfflineTimings::default();
    let mut stage_clock = Instant::now();
    let mut lap = |name: &str, timings: &mut OfflineTimings| {
        timings
            .stages
            .insert(name.to_string(), stage_clock.elapsed().as_nanos() as u64);
        stage_clock = Instant::now();
    };
    let mut paths = ArtifactPaths::default();
    let mut counters = OfflineCounters::default();
    let mut warnings = Vec::new();
    let solver = &config.solver;
    let procedure = config.procedure;

    // Tier I at every training input; procedure 0 records its iterations.
    let mut collector = HyperReductionCollector::new(procedure);
    let training: Vec<FullTrajectory> = if procedure == SnapshotProcedure::Zero {
        config
            .training_inputs
            .iter()
            .map(|mu| solve_fom(&model, mu, solver, &mut collector))
            .collect::<Result<_>>()
    } else {
        par::map_slice(&config.training_inputs, |mu| {
            solve_fom(&model, mu, solver, &mut NoObserver)
        })
        .into_iter()
        .collect::<Result<_>>()
    }
    .stage("tier-1")?;
    counters.tier_one_solves = training.len();
    for (k, t) in training.iter().enumerate() {
        counters
            .newton_iterations
            .push(t.stats.iter().map(|s| s.iterations).sum());
        timings.tier_one_ns.push(t.wall_ns());
        let name = format!("tier1_{k}.snap");
        paths
            .training_trajectories
            .push(persist(&artifacts::full_trajectory_matrix(t), out, &name).stage("persist")?);
        let csv = format!("tier1_{k}_convergence.csv");
        write_convergence_csv(&out.join(&csv), &t.stats).stage("persist")?;
        paths.training_convergence.push(csv);
    }
    lap("tier-1", &mut timings);

    // State basis.
    let parts = training
        .iter()
        .map(|t| collect_state_snapshots(t, config.state_variant))
        .collect::<Result<Vec<_>>>()
        .stage("state-snapshots")?;
    let state_snaps = SnapshotMatrix::concat(&parts).stage("state-snapshots")?;
    drop(parts);
    counters.state_snapshots = state_snaps.ncols();
    if config.persist_snapshots {
        paths.state_snapshots =
            Some(persist(&state_snaps, out, "state_snapshots.snap").stage("persist")?);
    }
    let phi_w = pod(state_snaps, config.state_basis, config.normalize).stage("state-pod")?;
    warnings.extend(phi_w.warnings.iter().map(|w| format!("state basis: {w}")));
    paths.state_basis = persist(&phi_w.to_snapshot(), out, "state_basis.snap").stage("persist")?;
    lap("state-pod", &mut timings);

    // Tier II at every training input for procedures 1-3.
    let initial: Vec<Vec<f64>> = training.iter().map(|t| t.states[0].clone()).collect();
    drop(training);
    if procedure != SnapshotProcedure::Zero {
        for (k, mu) in config.training_inputs.iter().enumerate() {
            let t = solve_tier2_pg_observed(
                mu,
                &model,
                phi_w.basis.as_ref(),
                &initial[k],
                solver,
                &mut collector,
            )
            .stage("tier-2")?;
            counters
                .gauss_newton_iterations
                .push(t.stats.iter().map(|s| s.iterations).sum());
            timings.tier_two_ns.push(t.wall_ns());
            let name = format!("tier2_{k}.snap");
            paths.tier_two_trajectories.push(
                persist(&artifacts::reduced_trajectory_matrix(&t), out, &name).stage("persist")?,
            );
            let csv = format!("tier2_{k}_convergence.csv");
            write_convergence_csv(&out.join(&csv), &t.stats).stage("persist")?;
            paths.tier_two_convergence.push(csv);
        }
        counters.tier_two_solves = config.training_inputs.len();
    }
    lap("tier-2", &mut timings);

    // Residual and Jacobian bases.
    let (res, jac) = collector.finish().stage("hyper-reduction-snapshots")?;
    counters.residual_snapshots = res.ncols();
    counters.jacobian_snapshots = jac.ncols();
    let shared = matches!(procedure, SnapshotProcedure::Zero | SnapshotProcedure::One);
    if config.persist_snapshots {
        paths.residual_snapshots =
            Some(persist(&res, out, "residual_snapshots.snap").stage("persist")?);
        if !shared {
            paths.jacobian_snapshots =
                Some(persist(&jac, out, "jacobian_snapshots.snap").stage("persist")?);
        } else {
            paths.jacobian_snapshots = paths.residual_snapshots.clone();
        }
    }
    let (phi_r, phi_j) = if shared {
        drop(jac);
        // One SVD serves both bases when their sizes are fixed.
        match (config.residual_basis, config.jacobian_basis) {
            (Truncation::Fixed(nr), Truncation::Fixed(nj)) => {
                let big = pod(res, Truncation::Fixed(nr.max(nj)), config.normalize)
                    .stage("residual-pod")?;
                (truncate(&big, nr), truncate(&big, nj))
            }
            (tr, tj) => {
                let m = if config.normalize {
                    res.normalized()
                } else {
                    res
                };
                let r = compute_pod(m.columns.as_ref(), tr).stage("residual-pod")?;
                let j = compute_pod(m.columns.as_ref(), tj).stage("jacobian-pod")?;
                (r, j)
            }
        }
    } else {
        let r = pod(res, config.residual_basis, config.normalize).stage("residual-pod")?;
        let j = pod(jac, config.jacobian_basis, config.normalize).stage("jacobian-pod")?;
        (r, j)
    };
    warnings.extend(
        phi_r
            .warnings
            .iter()
            .map(|w| format!("residual basis: {w}")),
    );
    warnings.extend(
        phi_j
            .warnings
            .iter()
            .map(|w| format!("Jacobian basis: {w}")),
    );
    paths.residual_basis =
        persist(&phi_r.to_snapshot(), out, "residual_basis.snap").stage("persist")?;
    paths.jacobian_basis =
        persist(&phi_j.to_snapshot(), out, "jacobian_basis.snap").stage("persist")?;
    lap("hyper-reduction-pod", &mut timings);

    // Sample mesh.
    let greedy = config.greedy_config(phi_r.size(), phi_j.size());
    let selection =
        greedy_select(phi_r.basis.as_ref(), phi_j.basis.as_ref(), &greedy).stage("greedy")?;
    warnings.extend(selection.warnings.iter().map(|w| format!("greedy: {w}")));
    write_json(&out.join("greedy_trace.json"), &selection).stage("persist")?;
    paths.greedy_trace = "greedy_trace.json".into();
    let sets = SampleSets::new(
        &model,
        &selection.nodes,
        greedy.unknowns_per_node,
        &config.outputs,
    )
    .stage("greedy")?;
    lap("greedy", &mut timings);

    // Online operators.
    let w0 = model.initial_condition(&config.online_input);
    let ops = compute_online_operators(
        phi_w.basis.as_ref(),
        phi_r.basis.as_ref(),
        phi_j.basis.as_ref(),
        &sets,
        &w0,
    )
    .stage("operators")?;
    let zr_rank = residual_pinv_rank(ops.sampled_residual_basis.as_ref()).stage("operators")?;
    if zr_rank < phi_r.size() {
        warnings.push(format!(
            "operators: sampled residual basis has numerical rank {zr_rank} < n_R={}; B drops the weakest directions",
            phi_r.size()
        ));
    }
    let plain = |m: &Mat<f64>| SnapshotMatrix::plain(snapshots::SnapshotKind::Operator, m.clone());
    paths.operator_a = persist(&plain(&ops.a), out, "operator_a.snap").stage("persist")?;
    paths.operator_b = persist(&plain(&ops.b), out, "operator_b.snap").stage("persist")?;
    paths.masked_state_basis = persist(
        &plain(&ops.masked_state_basis),
        out,
        "masked_state_basis.snap",
    )
    .stage("persist")?;
    paths.masked_initial_condition = persist(
        &artifacts::vector_matrix(&ops.masked_initial_condition),
        out,
        "masked_initial_condition.snap",
    )
    .stage("persist")?;
    paths.output_basis =
        persist(&plain(&ops.output_basis), out, "output_basis.snap").stage("persist")?;
    paths.output_initial_condition = persist(
        &artifacts::vector_matrix(&ops.output_initial_condition),
        out,
        "output_initial_condition.snap",
    )
    .stage("persist")?;
    paths.sampled_residual_basis = persist(
        &plain(&ops.sampled_residual_basis),
        out,
        "sampled_residual_basis.snap",
    )
    .stage("persist")?;
    lap("operators", &mut timings);

    timings.total_ns = started.elapsed().as_nanos() as u64;
    paths.timings = "timings.json".into();
    write_json(&out.join(&paths.timings), &timings).stage("persist")?;

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        training_inputs: config.training_inputs.clone(),
        online_input: config.online_input,
        sizes: RomSizes {
            full_dim: model.dim(),
            n_w: phi_w.size(),
            n_r: phi_r.size(),
            n_j: phi_j.size(),
            n_i: sets.num_samples(),
            n_s: sets.nodes.len(),
            state_entries: sets.state_indices.len(),
            output_entries: sets.output_indices.len(),
        },
        procedure,
        greedy,
        solver: *solver,
        sample_sets: sets,
        artifacts: paths,
        counters,
        warnings,
        config: config.clone(),
    };
    manifest.check_invariants().stage("operators")?;
    write_json(&out.join(MANIFEST_FILE), &manifest).stage("persist")?;
    Ok(manifest)
}

fn truncate(p: &PodBasis, k: usize) -> PodBasis {
    let k = k.min(p.size());
    let retained: f64 = p.singular_values[..k].iter().map(|s| s * s).sum();
    let total: f64 = p.singular_values.iter().map(|s| s * s).sum();
    PodBasis {
        basis: p.basis.subcols(0, k).to_owned(),
        singular_values: p.singular_values.clone(),
        energy_fraction: retained / total,
        warnings: p.warnings.clone(),
    }
}
