//! Offline/online orchestration: configuration, run manifests, comparison
//! reports and the command-line entry points.

pub mod artifacts;
mod compare;
mod config;
mod diagnostics;
mod offline;
mod online;

pub use compare::{run_compare, CompareOptions, Method, MethodMetrics, MetricsReport};
pub use config::{OfflineConfig, SamplingConfig, SCHEMA_VERSION};
pub use diagnostics::{run_bounds, BoundsReport};
pub use offline::run_offline;
pub use online::{parse_mu, run_online, OnlineReport, OnlineRom};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GnatError;
use crate::model::ParameterPoint;
use crate::sampling::{GreedyConfig, SampleSets};
use crate::snapshots::SnapshotProcedure;
use crate::solvers::SolverConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const IO: i32 = 4;
}

/// A failure together with the pipeline stage it happened in.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: &'static str,
    pub source: GnatError,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.source)
    }
}

/// Maps an error to the documented process exit code.
pub fn exit_code(e: &GnatError) -> i32 {
    use GnatError::*;
    match e {
        Io { .. } | Format { .. } => exit::IO,
        InvalidConfig(_)
        | UnknownMethod(_)
        | DimensionMismatch { .. }
        | IndexOutOfRange { .. }
        | IncompleteMask { .. }
        | HookMismatch { .. }
        | IncompleteTrace { .. } => exit::CONFIG,
        EmptyTrajectory
        | ZeroMatrix
        | RankDeficient { .. }
        | StepFailure { .. }
        | Singular { .. }
        | CoincidentProbes
        | Linalg(_) => exit::SOLVER,
    }
}

pub type StageResult<T> = std::result::Result<T, PipelineError>;

pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomSizes {
    pub full_dim: usize,
    pub n_w: usize,
    pub n_r: usize,
    pub n_j: usize,
    pub n_i: usize,
    pub n_s: usize,
    /// `|𝒥|`.
    pub state_entries: usize,
    /// `|𝒦|`.
    pub output_entries: usize,
}

/// Artifact file names, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub training_trajectories: Vec<String>,
    pub training_convergence: Vec<String>,
    pub tier_two_trajectories: Vec<String>,
    pub tier_two_convergence: Vec<String>,
    pub state_snapshots: Option<String>,
    pub residual_snapshots: Option<String>,
    pub jacobian_snapshots: Option<String>,
    pub state_basis: String,
    pub residual_basis: String,
    pub jacobian_basis: String,
    pub operator_a: String,
    pub operator_b: String,
    pub masked_state_basis: String,
    pub masked_initial_condition: String,
    pub output_basis: String,
    pub output_initial_condition: String,
    pub sampled_residual_basis: String,
    pub greedy_trace: String,
    pub timings: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OfflineCounters {
    pub tier_one_solves: usize,
    pub tier_two_solves: usize,
    /// Total Newton iterations per training input.
    pub newton_iterations: Vec<usize>,
    /// Total Gauss–Newton iterations per training input.
    pub gauss_newton_iterations: Vec<usize>,
    pub state_snapshots: usize,
    pub residual_snapshots: usize,
    pub jacobian_snapshots: usize,
}

/// Wall-clock times of an offline run. Kept in their own file so the
/// manifest is byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OfflineTimings {
    pub stages: BTreeMap<String, u64>,
    pub tier_one_ns: Vec<u64>,
    pub tier_two_ns: Vec<u64>,
    pub total_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub training_inputs: Vec<ParameterPoint>,
    pub online_input: ParameterPoint,
    pub sizes: RomSizes,
    pub procedure: SnapshotProcedure,
    pub greedy: GreedyConfig,
    pub solver: SolverConfig,
    /// `𝒩`, `ℐ`, `𝒥` and `𝒦`.
    pub sample_sets: SampleSets,
    pub artifacts: ArtifactPaths,
    pub counters: OfflineCounters,
    pub warnings: Vec<String>,
    pub config: OfflineConfig,
}

impl RunManifest {
    pub fn check_invariants(&self) -> crate::Result<()> {
        let s = &self.sizes;
        let bad = |m: String| Err(GnatError::InvalidConfig(m));
        if self.training_inputs.is_empty() {
            return bad("manifest has no training inputs".into());
        }
        if s.n_i < s.n_r.max(s.n_j) {
            return bad(format!(
                "n_i = {} < max(n_R, n_J) = {}",
                s.n_i,
                s.n_r.max(s.n_j)
            ));
        }
        if s.n_j < s.n_w {
            return bad(format!("n_J = {} < n_w = {}", s.n_j, s.n_w));
        }
        if self.sample_sets.num_samples() != s.n_i
            || self.sample_sets.state_indices.len() != s.state_entries
        {
            return bad("sample sets disagree with the recorded sizes".into());
        }
        Ok(())
    }
}
