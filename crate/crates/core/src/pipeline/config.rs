use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GnatError, Result};
use crate::model::{Burgers, Grid1D, ParameterPoint, TimeDiscretization};
use crate::pod::Truncation;
use crate::sampling::{GreedyConfig, OutputSpec};
use crate::snapshots::{SnapshotProcedure, StateSnapshotVariant};
use crate::solvers::SolverConfig;

/// Version of the configuration and manifest schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Sample-node selection settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// `n_s`, seeds included.
    pub sample_nodes: usize,
    /// `n_c`; defaults to `min(n_R, n_J, n_u·n_s)`.
    #[serde(default)]
    pub working_columns: Option<usize>,
    /// Defaults to the node next to the inflow boundary.
    #[serde(default = "inflow_seed")]
    pub seed_nodes: Vec<usize>,
    #[serde(default = "one")]
    pub unknowns_per_node: usize,
}

fn inflow_seed() -> Vec<usize> {
    vec![0]
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn from_initial() -> StateSnapshotVariant {
    StateSnapshotVariant::FromInitial
}

/// Offline-stage configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    pub schema_version: u32,
    #[serde(default = "Grid1D::benchmark")]
    pub grid: Grid1D,
    #[serde(default = "TimeDiscretization::benchmark")]
    pub time: TimeDiscretization,
    pub training_inputs: Vec<ParameterPoint>,
    pub online_input: ParameterPoint,
    #[serde(default = "from_initial")]
    pub state_variant: StateSnapshotVariant,
    /// Scale every snapshot column to unit norm before the SVD.
    #[serde(default = "yes")]
    pub normalize: bool,
    pub procedure: SnapshotProcedure,
    pub state_basis: Truncation,
    pub residual_basis: Truncation,
    pub jacobian_basis: Truncation,
    pub sampling: SamplingConfig,
    #[serde(default = "global")]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Also write the raw snapshot matrices (large at benchmark scale).
    #[serde(default = "yes")]
    pub persist_snapshots: bool,
}

fn global() -> OutputSpec {
    OutputSpec::Global
}

impl OfflineConfig {
    /// Burgers benchmark: three training inputs, `n_w = 50`, `n_R = 160`,
    /// `n_J = 70`, 160 sample nodes, procedure 2.
    pub fn benchmark() -> Self {
        OfflineConfig {
            schema_version: SCHEMA_VERSION,
            grid: Grid1D::benchmark(),
            time: TimeDiscretization::benchmark(),
            training_inputs: vec![
                ParameterPoint::new(3.0, 0.02),
                ParameterPoint::new(6.0, 0.05),
                ParameterPoint::new(9.0, 0.075),
            ],
            online_input: ParameterPoint::new(4.5, 0.038),
            state_variant: StateSnapshotVariant::FromInitial,
            normalize: true,
            procedure: SnapshotProcedure::Two,
            state_basis: Truncation::Fixed(50),
            residual_basis: Truncation::Fixed(160),
            jacobian_basis: Truncation::Fixed(70),
            sampling: SamplingConfig {
                sample_nodes: 160,
                working_columns: None,
                seed_nodes: inflow_seed(),
                unknowns_per_node: 1,
            },
            outputs: OutputSpec::Global,
            solver: SolverConfig::default(),
            persist_snapshots: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: OfflineConfig = serde_json::from_str(text)
            .map_err(|e| GnatError::InvalidConfig(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GnatError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<Burgers> {
        let grid = Grid1D::new(self.grid.num_nodes, self.grid.domain_length)?;
        let time = TimeDiscretization::new(self.time.dt, self.time.num_steps)?;
        Ok(Burgers::new(grid, time))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GnatError::InvalidConfig(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.training_inputs.is_empty() {
            return bad("training_inputs is empty".into());
        }
        if !self
            .training_inputs
            .iter()
            .chain([&self.online_input])
            .all(|m| m.is_finite())
        {
            return bad("parameter values must be finite".into());
        }
        self.model()?;
        self.solver.validate()?;
        for (name, t) in [
            ("state_basis", self.state_basis),
            ("residual_basis", self.residual_basis),
            ("jacobian_basis", self.jacobian_basis),
        ] {
            match t {
                Truncation::Fixed(0) => return bad(format!("{name} size must be positive")),
                Truncation::Energy(f) if !(f > 0.0 && f <= 1.0) => {
                    return bad(format!("{name} energy fraction must lie in (0, 1]"))
                }
                _ => {}
            }
        }
        if let (Truncation::Fixed(nw), Truncation::Fixed(nj)) =
            (self.state_basis, self.jacobian_basis)
        {
            if nj < nw {
                return bad(format!("n_J = {nj} must be at least n_w = {nw}"));
            }
        }
        let s = &self.sampling;
        if s.sample_nodes == 0 || s.unknowns_per_node == 0 {
            return bad("sample_nodes and unknowns_per_node must be positive".into());
        }
        if s.seed_nodes.len() > s.sample_nodes {
            return bad("more seed nodes than sample nodes".into());
        }
        let ni = s.sample_nodes * s.unknowns_per_node;
        for (name, t) in [("n_R", self.residual_basis), ("n_J", self.jacobian_basis)] {
            if let Truncation::Fixed(k) = t {
                if k > ni {
                    return bad(format!("{name} = {k} exceeds n_i = {ni}"));
                }
            }
        }
        Ok(())
    }

    /// Greedy settings once the basis sizes are known.
    pub fn greedy_config(&self, nr: usize, nj: usize) -> GreedyConfig {
        let s = &self.sampling;
        GreedyConfig {
            target_nodes: s.sample_nodes,
            working_columns: s
                .working_columns
                .unwrap_or(nr.min(nj).min(s.unknowns_per_node * s.sample_nodes)),
            seed_nodes: s.seed_nodes.clone(),
            unknowns_per_node: s.unknowns_per_node,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_round_trips_and_validates() {
        let c = OfflineConfig::benchmark();
        c.validate().unwrap();
        let back = OfflineConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.greedy_config(160, 70).working_columns, 70);
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let text = r#"{
            "schema_version": 1,
            "training_inputs": [{"a": 3, "b": 0.02}],
            "online_input": {"a": 4.5, "b": 0.038},
            "procedure": 0,
            "state_basis": {"kind": "fixed", "value": 10},
            "residual_basis": {"kind": "energy", "value": 0.9999},
            "jacobian_basis": {"kind": "fixed", "value": 12},
            "sampling": {"sample_nodes": 20}
        }"#;
        let c = OfflineConfig::from_json(text).unwrap();
        assert_eq!(c.grid, Grid1D::benchmark());
        assert_eq!(c.sampling.seed_nodes, vec![0]);
        assert!(c.normalize);
        assert_eq!(c.solver, SolverConfig::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = OfflineConfig::benchmark();
        c.schema_version = 7;
        assert!(c.validate().is_err());
        let mut c = OfflineConfig::benchmark();
        c.training_inputs.clear();
        assert!(c.validate().is_err());
        let mut c = OfflineConfig::benchmark();
        c.jacobian_basis = Truncation::Fixed(40);
        assert!(c.validate().is_err());
        let mut c = OfflineConfig::benchmark();
        c.sampling.sample_nodes = 100;
        assert!(c.validate().is_err());
        assert!(OfflineConfig::from_json("{\"schema_version\": 1, \"bogus\": 3}").is_err());
    }
}
