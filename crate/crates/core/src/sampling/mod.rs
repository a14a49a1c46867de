//! Sample-node selection, index sets and the precomputed GNAT operators.

mod greedy;
mod operators;

pub use greedy::{greedy_select, GreedyConfig, GreedyIteration, GreedySelection};
pub use operators::{
    compute_online_operators, residual_pinv_rank, OnlineOperators, RESIDUAL_PINV_RANK_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, GnatError, Result};
use crate::model::FullOrderModel;

/// Which state entries the outputs depend on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "nodes", rename_all = "kebab-case")]
pub enum OutputSpec {
    /// The whole state vector.
    Global,
    /// Values at the listed unknowns.
    Probes(Vec<usize>),
}

/// `𝒦` for an output specification over `n` unknowns.
pub fn output_index_set(spec: &OutputSpec, n: usize) -> Result<Vec<usize>> {
    match spec {
        OutputSpec::Global => Ok((0..n).collect()),
        OutputSpec::Probes(p) => {
            if let Some(&bad) = p.iter().find(|&&i| i >= n) {
                return Err(GnatError::IndexOutOfRange { index: bad, dim: n });
            }
            let mut k = p.clone();
            k.sort_unstable();
            k.dedup();
            Ok(k)
        }
    }
}

/// Sample nodes and the index sets derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSets {
    /// `𝒩`, sorted.
    pub nodes: Vec<usize>,
    /// `ℐ`: the unknowns of the sample nodes.
    pub residual_indices: Vec<usize>,
    /// `𝒥`: stencil closure of `ℐ`.
    pub state_indices: Vec<usize>,
    /// `𝒦`.
    pub output_indices: Vec<usize>,
    pub unknowns_per_node: usize,
    pub global_output: bool,
}

impl SampleSets {
    pub fn new<M: FullOrderModel + ?Sized>(
        model: &M,
        nodes: &[usize],
        unknowns_per_node: usize,
        output: &OutputSpec,
    ) -> Result<Self> {
        let n = model.dim();
        if unknowns_per_node == 0 || !n.is_multiple_of(unknowns_per_node) {
            return Err(GnatError::InvalidConfig(format!(
                "{unknowns_per_node} unknowns per node does not divide {n}"
            )));
        }
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let num_nodes = n / unknowns_per_node;
        if let Some(&bad) = nodes.iter().find(|&&l| l >= num_nodes) {
            return Err(GnatError::IndexOutOfRange {
                index: bad,
                dim: num_nodes,
            });
        }
        let residual_indices: Vec<usize> = nodes
            .iter()
            .flat_map(|&l| l * unknowns_per_node..(l + 1) * unknowns_per_node)
            .collect();
        let state_indices = model.stencil_closure(&residual_indices)?;
        Ok(SampleSets {
            nodes,
            residual_indices,
            state_indices,
            output_indices: output_index_set(output, n)?,
            unknowns_per_node,
            global_output: matches!(output, OutputSpec::Global),
        })
    }

    /// Every unknown sampled, global output.
    pub fn complete<M: FullOrderModel + ?Sized>(model: &M) -> Result<Self> {
        let all: Vec<usize> = (0..model.dim()).collect();
        Self::new(model, &all, 1, &OutputSpec::Global)
    }

    pub fn num_samples(&self) -> usize {
        self.residual_indices.len()
    }

    pub fn sample_matrix(&self, dim: usize) -> SampleMatrix<'_> {
        SampleMatrix {
            indices: &self.residual_indices,
            dim,
        }
    }
}

/// The row-selection matrix `Z`, applied by gather and scatter.
#[derive(Debug, Clone, Copy)]
pub struct SampleMatrix<'a> {
    pub indices: &'a [usize],
    pub dim: usize,
}

impl SampleMatrix<'_> {
    /// `Z·v`.
    pub fn gather(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("sample matrix input", self.dim, v.len())?;
        Ok(self.indices.iter().map(|&i| v[i]).collect())
    }

    /// `Zᵀ·u`.
    pub fn scatter(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("sample matrix transpose input", self.indices.len(), u.len())?;
        let mut out = vec![0.0; self.dim];
        for (&i, &x) in self.indices.iter().zip(u) {
            out[i] = x;
        }
        Ok(out)
    }
}
