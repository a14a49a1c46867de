//! Snapshot collection and the binary snapshot file format.

mod io;

pub use io::{load, persist, HEADER_LEN, MAGIC, VERSION};

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{GnatError, Result};
use crate::linalg;
use crate::model::ParameterPoint;
use crate::solvers::{FullTrajectory, IterationEvent, IterationObserver};

/// What the columns of a snapshot file hold. The discriminant is the kind
/// tag stored in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[repr(u32)]
pub enum SnapshotKind {
    StateIncrementFromInitial = 0,
    StateIncrementPerStep = 1,
    RawState = 2,
    ResidualTierOne = 3,
    ResidualTierTwo = 4,
    JacobianActionTierTwo = 5,
    JacobianColumnsTierTwo = 6,
    Basis = 7,
    FullTrajectory = 8,
    ReducedTrajectory = 9,
    Operator = 10,
}

impl SnapshotKind {
    pub fn tag(self) -> u32 {
        self as u32
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        use SnapshotKind::*;
        Some(match tag {
            0 => StateIncrementFromInitial,
            1 => StateIncrementPerStep,
            2 => RawState,
            3 => ResidualTierOne,
            4 => ResidualTierTwo,
            5 => JacobianActionTierTwo,
            6 => JacobianColumnsTierTwo,
            7 => Basis,
            8 => FullTrajectory,
            9 => ReducedTrajectory,
            10 => Operator,
            _ => return None,
        })
    }
}

/// Origin of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Provenance {
    /// A snapshot taken at parameter `mu`, time step `step` and (for
    /// residual and Jacobian snapshots) solver iteration `iteration`.
    Snapshot {
        mu: ParameterPoint,
        step: usize,
        iteration: Option<usize>,
    },
    /// Basis vector number `mode`.
    Mode { mode: usize },
    /// A time step of a stored trajectory. Wall-clock times are kept out of
    /// artifacts so that reruns produce identical bytes.
    Step {
        step: usize,
        time: f64,
        iterations: usize,
        residual_norm: f64,
    },
    /// A plain matrix column.
    Column { index: usize },
}

/// Dense column-major snapshot matrix with one provenance record per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub kind: SnapshotKind,
    pub columns: Mat<f64>,
    pub provenance: Vec<Provenance>,
    /// Additional JSON fields written to the file trailer.
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl SnapshotMatrix {
    pub fn new(kind: SnapshotKind, columns: Mat<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        crate::error::check_len("provenance records", columns.ncols(), provenance.len())?;
        Ok(SnapshotMatrix {
            kind,
            columns,
            provenance,
            extras: BTreeMap::new(),
        })
    }

    /// Columns numbered `0..k` as plain [`Provenance::Column`] records.
    pub fn plain(kind: SnapshotKind, columns: Mat<f64>) -> Self {
        let provenance = (0..columns.ncols())
            .map(|index| Provenance::Column { index })
            .collect();
        SnapshotMatrix {
            kind,
            columns,
            provenance,
            extras: BTreeMap::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    /// Columns scaled to unit Euclidean norm; zero columns are dropped.
    pub fn normalized(&self) -> SnapshotMatrix {
        let keep: Vec<(usize, f64)> = (0..self.ncols())
            .map(|j| (j, linalg::norm2(self.columns.col_as_slice(j))))
            .filter(|&(_, n)| n > 0.0)
            .collect();
        let columns = Mat::from_fn(self.nrows(), keep.len(), |i, k| {
            let (j, n) = keep[k];
            self.columns[(i, j)] / n
        });
        SnapshotMatrix {
            kind: self.kind,
            columns,
            provenance: keep.iter().map(|&(j, _)| self.provenance[j]).collect(),
            extras: self.extras.clone(),
        }
    }

    /// Side-by-side concatenation of matrices of the same kind and height.
    pub fn concat(parts: &[SnapshotMatrix]) -> Result<SnapshotMatrix> {
        let first = parts.first().ok_or(GnatError::EmptyTrajectory)?;
        let rows = first.nrows();
        let mut cols: Vec<&[f64]> = Vec::new();
        let mut provenance = Vec::new();
        for p in parts {
            crate::error::check_len("snapshot rows", rows, p.nrows())?;
            if p.kind != first.kind {
                return Err(GnatError::InvalidConfig(format!(
                    "cannot concatenate {:?} with {:?} snapshots",
                    first.kind, p.kind
                )));
            }
            cols.extend((0..p.ncols()).map(|j| p.columns.col_as_slice(j)));
            provenance.extend_from_slice(&p.provenance);
        }
        let columns = Mat::from_fn(rows, cols.len(), |i, j| cols[j][i]);
        SnapshotMatrix::new(first.kind, columns, provenance)
    }
}

/// State snapshot definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateSnapshotVariant {
    /// `wⁿ − w⁰`, n = 1..nt.
    FromInitial,
    /// `wⁿ − wⁿ⁻¹`, n = 1..nt: the increment from the Newton initial guess.
    PerStepIncrement,
    /// `wⁿ`, n = 0..nt. Does not guarantee consistency.
    Raw,
}

impl StateSnapshotVariant {
    pub fn kind(self) -> SnapshotKind {
        match self {
            StateSnapshotVariant::FromInitial => SnapshotKind::StateIncrementFromInitial,
            StateSnapshotVariant::PerStepIncrement => SnapshotKind::StateIncrementPerStep,
            StateSnapshotVariant::Raw => SnapshotKind::RawState,
        }
    }
}

pub fn collect_state_snapshots(
    trajectory: &FullTrajectory,
    variant: StateSnapshotVariant,
) -> Result<SnapshotMatrix> {
    let states = &trajectory.states;
    if states.len() < 2 {
        return Err(GnatError::EmptyTrajectory);
    }
    let n = states[0].len();
    let first = match variant {
        StateSnapshotVariant::Raw => 0,
        _ => 1,
    };
    let steps: Vec<usize> = (first..states.len()).collect();
    let columns = Mat::from_fn(n, steps.len(), |i, k| {
        let s = steps[k];
        match variant {
            StateSnapshotVariant::FromInitial => states[s][i] - states[0][i],
            StateSnapshotVariant::PerStepIncrement => states[s][i] - states[s - 1][i],
            StateSnapshotVariant::Raw => states[s][i],
        }
    });
    let provenance = steps
        .iter()
        .map(|&step| Provenance::Snapshot {
            mu: trajectory.mu,
            step,
            iteration: None,
        })
        .collect();
    SnapshotMatrix::new(variant.kind(), columns, provenance)
}

/// Snapshot-collection procedures for the residual and Jacobian bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SnapshotProcedure {
    /// Tier I residuals for both bases.
    Zero,
    /// Tier II residuals for both bases.
    One,
    /// Tier II residuals, and Jacobian actions `JΦ_w·s` along the step.
    Two,
    /// Tier II residuals, and every column of `JΦ_w`.
    Three,
}

impl SnapshotProcedure {
    pub fn id(self) -> u8 {
        self.into()
    }

    /// Tier whose iterations this procedure records.
    pub fn tier(self) -> u8 {
        if self == SnapshotProcedure::Zero {
            1
        } else {
            2
        }
    }

    /// Simulations per training input.
    pub fn simulations_per_input(self) -> usize {
        if self == SnapshotProcedure::Zero {
            1
        } else {
            2
        }
    }

    /// Snapshots added per solver iteration for a trial basis of size `nw`.
    pub fn snapshots_per_iteration(self, nw: usize) -> usize {
        match self {
            SnapshotProcedure::Zero | SnapshotProcedure::One => 1,
            SnapshotProcedure::Two => 2,
            SnapshotProcedure::Three => nw + 1,
        }
    }
}

impl TryFrom<u8> for SnapshotProcedure {
    type Error = String;

    fn try_from(id: u8) -> std::result::Result<Self, String> {
        match id {
            0 => Ok(SnapshotProcedure::Zero),
            1 => Ok(SnapshotProcedure::One),
            2 => Ok(SnapshotProcedure::Two),
            3 => Ok(SnapshotProcedure::Three),
            _ => Err(format!("snapshot procedure must be 0..=3, got {id}")),
        }
    }
}

impl From<SnapshotProcedure> for u8 {
    fn from(p: SnapshotProcedure) -> u8 {
        p as u8
    }
}

/// Records residual and Jacobian snapshots from solver iterations.
#[derive(Debug, Clone)]
pub struct HyperReductionCollector {
    procedure: SnapshotProcedure,
    residuals: Vec<Vec<f64>>,
    residual_provenance: Vec<Provenance>,
    jacobians: Vec<Vec<f64>>,
    jacobian_provenance: Vec<Provenance>,
    mismatch: Option<u8>,
    dim: Option<usize>,
}

impl HyperReductionCollector {
    pub fn new(procedure: SnapshotProcedure) -> Self {
        HyperReductionCollector {
            procedure,
            residuals: Vec::new(),
            residual_provenance: Vec::new(),
            jacobians: Vec::new(),
            jacobian_provenance: Vec::new(),
            mismatch: None,
            dim: None,
        }
    }

    pub fn procedure(&self) -> SnapshotProcedure {
        self.procedure
    }

    pub fn num_residuals(&self) -> usize {
        self.residuals.len()
    }

    /// `(snapshots for Φ_R, snapshots for Φ_J)`. For procedures 0 and 1 both
    /// hold the same residuals.
    pub fn finish(self) -> Result<(SnapshotMatrix, SnapshotMatrix)> {
        if let Some(tier) = self.mismatch {
            return Err(GnatError::HookMismatch {
                procedure: self.procedure.id(),
                tier,
            });
        }
        let n = self.dim.unwrap_or(0);
        let rkind = match self.procedure {
            SnapshotProcedure::Zero => SnapshotKind::ResidualTierOne,
            _ => SnapshotKind::ResidualTierTwo,
        };
        let res = SnapshotMatrix::new(
            rkind,
            linalg::from_columns(n, &self.residuals),
            self.residual_provenance,
        )?;
        let jac = match self.procedure {
            SnapshotProcedure::Zero | SnapshotProcedure::One => res.clone(),
            SnapshotProcedure::Two => SnapshotMatrix::new(
                SnapshotKind::JacobianActionTierTwo,
                linalg::from_columns(n, &self.jacobians),
                self.jacobian_provenance,
            )?,
            SnapshotProcedure::Three => SnapshotMatrix::new(
                SnapshotKind::JacobianColumnsTierTwo,
                linalg::from_columns(n, &self.jacobians),
                self.jacobian_provenance,
            )?,
        };
        Ok((res, jac))
    }
}

impl IterationObserver for HyperReductionCollector {
    fn observe(&mut self, event: IterationEvent<'_>) {
        if event.tier() != self.procedure.tier() {
            self.mismatch.get_or_insert(event.tier());
            return;
        }
        let (mu, step, iteration, residual) = match event {
            IterationEvent::TierOne {
                mu,
                step,
                iteration,
                residual,
            }
            | IterationEvent::TierTwo {
                mu,
                step,
                iteration,
                residual,
                ..
            } => (mu, step, iteration, residual),
        };
        let prov = Provenance::Snapshot {
            mu,
            step,
            iteration: Some(iteration),
        };
        self.dim.get_or_insert(residual.len());
        self.residuals.push(residual.to_vec());
        self.residual_provenance.push(prov);
        if let IterationEvent::TierTwo {
            jacobian_basis,
            direction,
            ..
        } = event
        {
            match self.procedure {
                SnapshotProcedure::Two => {
                    self.jacobians
                        .push(linalg::matvec(jacobian_basis, direction));
                    self.jacobian_provenance.push(prov);
                }
                SnapshotProcedure::Three => {
                    for j in 0..jacobian_basis.ncols() {
                        self.jacobians
                            .push(jacobian_basis.col(j).iter().copied().collect());
                        self.jacobian_provenance.push(prov);
                    }
                }
                _ => {}
            }
        }
    }
}
