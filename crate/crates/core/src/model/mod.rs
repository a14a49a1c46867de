//! Discrete full-order models.
//!
//! A model owns its spatial grid and its time discretization and exposes the
//! fully discrete backward-Euler residual
//! `Rⁿ(wⁿ⁺¹; μ) = wⁿ⁺¹ − wⁿ − Δt·F(wⁿ⁺¹, tⁿ⁺¹; μ)` together with its Jacobian
//! and a masked evaluation path that reads only the stencil closure of a set
//! of sampled rows.

mod burgers;
pub mod flux;

pub use burgers::{Burgers, SOURCE_AMPLITUDE};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, GnatError, Result};
use crate::linalg::Tridiagonal;

/// Input parameters `μ = (a, b)`: inflow value and source exponent rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub a: f64,
    pub b: f64,
}

impl ParameterPoint {
    pub fn new(a: f64, b: f64) -> Self {
        ParameterPoint { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

impl std::fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "a={},b={}", self.a, self.b)
    }
}

/// Uniform 1D grid. Node 0 carries the Dirichlet inflow value, so the
/// unknowns live on nodes `1..num_nodes` and unknown `i` sits at
/// `x = (i + 1)·dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub num_nodes: usize,
    pub domain_length: f64,
}

impl Grid1D {
    pub fn new(num_nodes: usize, domain_length: f64) -> Result<Self> {
        if num_nodes < 3 {
            return Err(GnatError::InvalidConfig(format!(
                "grid needs at least 3 nodes, got {num_nodes}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(GnatError::InvalidConfig(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        Ok(Grid1D {
            num_nodes,
            domain_length,
        })
    }

    /// The benchmark grid: 4001 nodes on `[0, 100]`.
    pub fn benchmark() -> Self {
        Grid1D {
            num_nodes: 4001,
            domain_length: 100.0,
        }
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / (self.num_nodes - 1) as f64
    }

    /// Number of unknowns `N = num_nodes − 1`.
    pub fn num_unknowns(&self) -> usize {
        self.num_nodes - 1
    }

    /// Coordinate of unknown `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDiscretization {
    pub dt: f64,
    pub num_steps: usize,
    #[serde(default)]
    pub scheme: TimeScheme,
}

impl TimeDiscretization {
    pub fn new(dt: f64, num_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || num_steps == 0 {
            return Err(GnatError::InvalidConfig(format!(
                "need dt > 0 and at least one step, got dt={dt}, steps={num_steps}"
            )));
        }
        Ok(TimeDiscretization {
            dt,
            num_steps,
            scheme: TimeScheme::BackwardEuler,
        })
    }

    /// Δt = 0.05 with 1000 steps.
    pub fn benchmark() -> Self {
        TimeDiscretization {
            dt: 0.05,
            num_steps: 1000,
            scheme: TimeScheme::BackwardEuler,
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.num_steps).map(|n| self.time(n)).collect()
    }
}

/// Entries of a state vector at a sorted index set.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedState {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl MaskedState {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_len("masked state values", indices.len(), values.len())?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GnatError::InvalidConfig(
                "masked state indices must be sorted and unique".into(),
            ));
        }
        Ok(MaskedState { indices, values })
    }

    /// Restriction of a full state to `indices`.
    pub fn gather(full: &[f64], indices: &[usize]) -> Result<Self> {
        let values = indices
            .iter()
            .map(|&i| {
                full.get(i).copied().ok_or(GnatError::IndexOutOfRange {
                    index: i,
                    dim: full.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MaskedState {
            indices: indices.to_vec(),
            values,
        })
    }
}

/// Evaluation plan for a set of sampled residual rows `ℐ`: the stencil
/// closure `𝒥` plus, for every sampled row, the positions of its stencil
/// entries inside `𝒥`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub rows: Vec<usize>,
    pub closure: Vec<usize>,
    /// Positions in `closure` of (row − 1, row, row + 1); `None` outside the
    /// domain.
    pub(crate) positions: Vec<[Option<usize>; 3]>,
}

impl MaskPlan {
    pub fn new<M: FullOrderModel + ?Sized>(model: &M, rows: &[usize]) -> Result<Self> {
        let closure = model.stencil_closure(rows)?;
        let pos = |j: usize| closure.binary_search(&j).ok();
        let n = model.dim();
        let positions = rows
            .iter()
            .map(|&i| {
                [
                    if i > 0 { pos(i - 1) } else { None },
                    pos(i),
                    if i + 1 < n { pos(i + 1) } else { None },
                ]
            })
            .collect();
        Ok(MaskPlan {
            rows: rows.to_vec(),
            closure,
            positions,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn closure_len(&self) -> usize {
        self.closure.len()
    }

    /// Checks that `masked` covers exactly this plan's closure.
    pub fn check_mask(&self, masked: &MaskedState) -> Result<()> {
        if masked.indices == self.closure {
            return Ok(());
        }
        let missing = self
            .closure
            .iter()
            .find(|j| masked.indices.binary_search(j).is_err())
            .copied();
        match missing {
            Some(index) => Err(GnatError::IncompleteMask { index }),
            None => Err(GnatError::DimensionMismatch {
                context: "masked state",
                expected: self.closure.len(),
                actual: masked.indices.len(),
            }),
        }
    }
}

/// Counts of the work done by one masked evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskedCost {
    pub residual_rows: usize,
    pub state_reads: usize,
}

/// Discrete full-order model interface.
pub trait FullOrderModel: Sync {
    /// Number of unknowns `N`.
    fn dim(&self) -> usize;

    fn time(&self) -> &TimeDiscretization;

    fn initial_condition(&self, mu: &ParameterPoint) -> Vec<f64>;

    /// Semi-discrete right-hand side `F(w, t; μ)`.
    fn rhs(&self, state: &[f64], t: f64, mu: &ParameterPoint) -> Result<Vec<f64>>;

    /// Backward-Euler residual `w_next − w_prev − Δt·F(w_next, t_next; μ)`.
    fn residual(
        &self,
        next: &[f64],
        prev: &[f64],
        t_next: f64,
        mu: &ParameterPoint,
    ) -> Result<Vec<f64>>;

    /// `∂R/∂w_next = I − Δt·∂F/∂w`.
    fn residual_jacobian(
        &self,
        next: &[f64],
        prev: &[f64],
        t_next: f64,
        mu: &ParameterPoint,
    ) -> Result<Tridiagonal>;

    /// Smallest index set whose entries determine the residual rows `rows`.
    fn stencil_closure(&self, rows: &[usize]) -> Result<Vec<usize>>;

    /// Sampled residual rows and sampled rows of `(∂R/∂w)·Φ`, reading only the
    /// masked states and the closure rows of the basis. The values equal the
    /// corresponding rows of the full evaluation bit for bit.
    #[allow(clippy::too_many_arguments)]
    fn masked_residual_and_jacobian_basis(
        &self,
        plan: &MaskPlan,
        next: &MaskedState,
        prev: &MaskedState,
        masked_basis: MatRef<'_, f64>,
        t_next: f64,
        mu: &ParameterPoint,
        cost: &mut MaskedCost,
    ) -> Result<(Vec<f64>, Mat<f64>)>;

    /// Sampled residual rows only.
    fn masked_residual(
        &self,
        plan: &MaskPlan,
        next: &MaskedState,
        prev: &MaskedState,
        t_next: f64,
        mu: &ParameterPoint,
        cost: &mut MaskedCost,
    ) -> Result<Vec<f64>>;
}
