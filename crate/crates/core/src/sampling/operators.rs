use faer::{Mat, MatRef};

use super::SampleSets;
use crate::error::{check_len, GnatError, Result};
use crate::linalg;

/// Relative singular-value cutoff for `(ZΦ_R)⁺` inside `B`.
///
/// Greedy sampling tends to pick clusters of neighbouring nodes, and `ZΦ_R`
/// can then have singular values near `1e-11·σ_max`. Inverting those
/// amplifies rounding in the sampled residual by ~1e11 and Gauss–Newton
/// never settles. Cutting at `√ε` keeps the amplification below `1/√ε`.
pub const RESIDUAL_PINV_RANK_TOL: f64 = 1.490_116_119_384_765_6e-8;

/// Matrices precomputed offline for the GNAT online stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOperators {
    /// `(ZΦ_J)⁺`, `n_J × n_i`.
    pub a: Mat<f64>,
    /// `Φ_JᵀΦ_R(ZΦ_R)⁺`, `n_J × n_i`.
    pub b: Mat<f64>,
    /// Rows `𝒥` of Φ_w.
    pub masked_state_basis: Mat<f64>,
    /// Rows `𝒥` of w⁰.
    pub masked_initial_condition: Vec<f64>,
    /// Rows `𝒦` of Φ_w.
    pub output_basis: Mat<f64>,
    /// Rows `𝒦` of w⁰.
    pub output_initial_condition: Vec<f64>,
    /// `ZΦ_R`, kept for the gappy error-bound factor.
    pub sampled_residual_basis: Mat<f64>,
}

impl OnlineOperators {
    pub fn num_coords(&self) -> usize {
        self.masked_state_basis.ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.a.ncols()
    }
}

/// Builds `A`, `B` and the masked rows of Φ_w and w⁰.
///
/// Requires `n_i ≥ n_R`, `n_i ≥ n_J` and `n_J ≥ n_w`. `(ZΦ_J)⁺` comes from
/// pivoted QR and fails on rank deficiency; `(ZΦ_R)⁺` is the truncated
/// minimum-norm pseudo-inverse (see [`RESIDUAL_PINV_RANK_TOL`]).
pub fn compute_online_operators(
    phi_w: MatRef<'_, f64>,
    phi_r: MatRef<'_, f64>,
    phi_j: MatRef<'_, f64>,
    sets: &SampleSets,
    initial_condition: &[f64],
) -> Result<OnlineOperators> {
    let n = phi_w.nrows();
    check_len("residual basis rows", n, phi_r.nrows())?;
    check_len("Jacobian basis rows", n, phi_j.nrows())?;
    check_len("initial condition", n, initial_condition.len())?;
    let (nw, nr, nj, ni) = (
        phi_w.ncols(),
        phi_r.ncols(),
        phi_j.ncols(),
        sets.num_samples(),
    );
    if ni < nr || ni < nj {
        return Err(GnatError::InvalidConfig(format!(
            "need n_i ≥ n_R and n_i ≥ n_J, got n_i={ni}, n_R={nr}, n_J={nj}"
        )));
    }
    if nj < nw {
        return Err(GnatError::InvalidConfig(format!(
            "need n_J ≥ n_w, got n_J={nj}, n_w={nw}"
        )));
    }
    for idx in [
        &sets.residual_indices,
        &sets.state_indices,
        &sets.output_indices,
    ] {
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(GnatError::IndexOutOfRange { index: bad, dim: n });
        }
    }
    let zr = linalg::gather_rows(phi_r, &sets.residual_indices);
    let zj = linalg::gather_rows(phi_j, &sets.residual_indices);
    let a = linalg::pinv_full_rank(zj.as_ref(), "sampled Jacobian basis")?;
    let (zr_pinv, _) = linalg::pinv_truncated(zr.as_ref(), RESIDUAL_PINV_RANK_TOL)?;
    let b = (phi_j.transpose() * phi_r) * &zr_pinv;
    Ok(OnlineOperators {
        a,
        b,
        masked_state_basis: linalg::gather_rows(phi_w, &sets.state_indices),
        masked_initial_condition: sets
            .state_indices
            .iter()
            .map(|&i| initial_condition[i])
            .collect(),
        output_basis: linalg::gather_rows(phi_w, &sets.output_indices),
        output_initial_condition: sets
            .output_indices
            .iter()
            .map(|&i| initial_condition[i])
            .collect(),
        sampled_residual_basis: zr,
    })
}

/// Numerical rank of `ZΦ_R` as used for `B`; below `n_R` means some
/// residual directions were dropped.
pub fn residual_pinv_rank(sampled_residual_basis: MatRef<'_, f64>) -> Result<usize> {
    let s = sampled_residual_basis
        .singular_values()
        .map_err(|e| GnatError::Linalg(format!("svd: {e:?}")))?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter()
        .filter(|&&v| v > RESIDUAL_PINV_RANK_TOL * smax)
        .count())
}
