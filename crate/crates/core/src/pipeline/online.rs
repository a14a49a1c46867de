use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::artifacts::{
    self, load_matrix, load_vector, read_json, write_convergence_csv, write_json,
};
use super::{RunManifest, Stage, StageResult};
use crate::error::{check_len, GnatError, Result};
use crate::model::{Burgers, FullOrderModel, ParameterPoint};
use crate::pod::PodBasis;
use crate::sampling::{OnlineOperators, SampleSets};
use crate::snapshots::{self, Provenance, SnapshotKind, SnapshotMatrix};
use crate::solvers::{
    compute_outputs, solve_gnat_online, FullTrajectory, OnlineCost, ReducedTrajectory,
};

/// A trained reduced model, loaded from its manifest.
#[derive(Debug, Clone)]
pub struct OnlineRom {
    pub manifest: RunManifest,
    pub dir: PathBuf,
    pub model: Burgers,
    pub operators: OnlineOperators,
    pub sets: SampleSets,
}

impl OnlineRom {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: RunManifest = read_json(manifest_path)?;
        if manifest.schema_version != super::SCHEMA_VERSION {
            return Err(GnatError::InvalidConfig(format!(
                "manifest schema_version {} is not supported",
                manifest.schema_version
            )));
        }
        manifest.check_invariants()?;
        let dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let model = manifest.config.model()?;
        let a = &manifest.artifacts;
        let op = |name: &str| load_matrix(&dir.join(name), SnapshotKind::Operator);
        let operators = OnlineOperators {
            a: op(&a.operator_a)?,
            b: op(&a.operator_b)?,
            masked_state_basis: op(&a.masked_state_basis)?,
            masked_initial_condition: load_vector(&dir.join(&a.masked_initial_condition))?,
            output_basis: op(&a.output_basis)?,
            output_initial_condition: load_vector(&dir.join(&a.output_initial_condition))?,
            sampled_residual_basis: op(&a.sampled_residual_basis)?,
        };
        let sets = manifest.sample_sets.clone();
        let rebuilt = SampleSets::new(
            &model,
            &sets.nodes,
            sets.unknowns_per_node,
            &manifest.config.outputs,
        )?;
        if rebuilt != sets {
            return Err(GnatError::InvalidConfig(
                "manifest sample sets do not match the model's stencil".into(),
            ));
        }
        let s = manifest.sizes;
        let shape = |what: &'static str, m: &Mat<f64>, rows: usize, cols: usize| {
            check_len(what, rows, m.nrows())?;
            check_len(what, cols, m.ncols())
        };
        shape("operator A", &operators.a, s.n_j, s.n_i)?;
        shape("operator B", &operators.b, s.n_j, s.n_i)?;
        shape(
            "masked state basis",
            &operators.masked_state_basis,
            s.state_entries,
            s.n_w,
        )?;
        shape(
            "output basis",
            &operators.output_basis,
            s.output_entries,
            s.n_w,
        )?;
        shape(
            "sampled residual basis",
            &operators.sampled_residual_basis,
            s.n_i,
            s.n_r,
        )?;
        check_len(
            "masked initial condition",
            s.state_entries,
            operators.masked_initial_condition.len(),
        )?;
        check_len("full dimension", s.full_dim, model.dim())?;
        Ok(OnlineRom {
            manifest,
            dir,
            model,
            operators,
            sets,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn state_basis(&self) -> Result<PodBasis> {
        PodBasis::from_snapshot(&snapshots::load(
            self.path(&self.manifest.artifacts.state_basis),
        )?)
    }

    pub fn residual_basis(&self) -> Result<PodBasis> {
        PodBasis::from_snapshot(&snapshots::load(
            self.path(&self.manifest.artifacts.residual_basis),
        )?)
    }

    pub fn training_trajectory(&self, k: usize) -> Result<FullTrajectory> {
        let name = self.manifest.artifacts.training_trajectories.get(k).ok_or(
            GnatError::IndexOutOfRange {
                index: k,
                dim: self.manifest.artifacts.training_trajectories.len(),
            },
        )?;
        artifacts::full_trajectory_from_matrix(&snapshots::load(self.path(name))?)
    }
}

/// Summary of one online solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub mu: ParameterPoint,
    pub steps: usize,
    pub wall_ns: u64,
    pub avg_iterations: f64,
    pub cost: OnlineCost,
    /// Largest number of residual rows evaluated in one iteration, over `N`.
    pub rows_touched_ratio: f64,
    /// `n_i / n_R`.
    pub sample_index_factor: f64,
    pub trajectory: String,
    pub convergence: String,
    pub outputs: String,
}

/// Parses `a=<v>,b=<v>`.
pub fn parse_mu(text: &str) -> Result<ParameterPoint> {
    let mut a = None;
    let mut b = None;
    for part in text.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| GnatError::InvalidConfig(format!("expected key=value, got {part:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| GnatError::InvalidConfig(format!("not a number: {v:?}")))?;
        match k.trim() {
            "a" => a = Some(v),
            "b" => b = Some(v),
            other => {
                return Err(GnatError::InvalidConfig(format!(
                    "unknown parameter {other:?}"
                )))
            }
        }
    }
    match (a, b) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Ok(ParameterPoint::new(a, b)),
        _ => Err(GnatError::InvalidConfig(format!(
            "need finite a and b, got {text:?}"
        ))),
    }
}

/// Runs GNAT at `mu` and writes the reduced trajectory, its convergence log,
/// the outputs and `online_report.json` to `out`.
pub fn run_online(
    manifest_path: &Path,
    mu: ParameterPoint,
    out: &Path,
) -> StageResult<(ReducedTrajectory, OnlineReport)> {
    let rom = OnlineRom::load(manifest_path).stage("load")?;
    std::fs::create_dir_all(out)
        .map_err(|e| GnatError::io(out, e))
        .stage("persist")?;
    let started = Instant::now();
    let traj = solve_gnat_online(
        &mu,
        &rom.model,
        &rom.operators,
        &rom.sets,
        &rom.manifest.solver,
    )
    .stage("online")?;
    let wall_ns = started.elapsed().as_nanos() as u64;
    let outputs = compute_outputs(&traj, &rom.operators, &rom.sets).stage("outputs")?;

    let trajectory = "reduced.snap".to_string();
    snapshots::persist(
        &artifacts::reduced_trajectory_matrix(&traj),
        out.join(&trajectory),
    )
    .stage("persist")?;
    let convergence = "online_convergence.csv".to_string();
    write_convergence_csv(&out.join(&convergence), &traj.stats).stage("persist")?;
    let out_name = "outputs.snap".to_string();
    let provenance = traj
        .times
        .iter()
        .enumerate()
        .map(|(step, &time)| Provenance::Step {
            step,
            time,
            iterations: if step == 0 {
                0
            } else {
                traj.stats[step - 1].iterations
            },
            residual_norm: if step == 0 {
                0.0
            } else {
                traj.stats[step - 1].residual_norm
            },
        })
        .collect();
    let mut m = SnapshotMatrix::new(
        SnapshotKind::RawState,
        crate::linalg::from_columns(outputs.indices.len(), &outputs.values),
        provenance,
    )
    .stage("outputs")?;
    m.extras
        .insert("indices".into(), serde_json::json!(outputs.indices));
    snapshots::persist(&m, out.join(&out_name)).stage("persist")?;

    let s = rom.manifest.sizes;
    let iterations: usize = traj.stats.iter().map(|s| s.iterations).sum();
    let report = OnlineReport {
        mu,
        steps: traj.num_steps(),
        wall_ns,
        avg_iterations: iterations as f64 / traj.num_steps().max(1) as f64,
        cost: traj.cost,
        rows_touched_ratio: traj.cost.max_residual_rows_per_iteration as f64 / s.full_dim as f64,
        sample_index_factor: s.n_i as f64 / s.n_r as f64,
        trajectory,
        convergence,
        outputs: out_name,
    };
    write_json(&out.join("online_report.json"), &report).stage("persist")?;
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_parsing() {
        assert_eq!(
            parse_mu("a=4.5,b=0.038").unwrap(),
            ParameterPoint::new(4.5, 0.038)
        );
        assert_eq!(
            parse_mu(" b = 1 , a=2").unwrap(),
            ParameterPoint::new(2.0, 1.0)
        );
        assert!(parse_mu("a=1").is_err());
        assert!(parse_mu("a=1,b=x").is_err());
        assert!(parse_mu("a=1,c=2").is_err());
        assert!(parse_mu("a=nan,b=1").is_err());
    }
}
