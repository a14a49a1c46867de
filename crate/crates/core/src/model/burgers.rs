//! Parameterized inviscid Burgers equation
//!
//! ```text
//! ∂U/∂t + ∂(U²/2)/∂x = 0.02·exp(b·x),  U(0, t) = a,  U(x, 0) = 1
//! ```
//!
//! discretized by first-order Godunov finite volumes in space and backward
//! Euler in time.

use faer::{Mat, MatRef};

use super::flux::{godunov_flux, godunov_flux_derivatives};
use super::{
    FullOrderModel, Grid1D, MaskPlan, MaskedCost, MaskedState, ParameterPoint, TimeDiscretization,
};
use crate::error::{check_len, GnatError, Result};
use crate::linalg::Tridiagonal;
use crate::par;

pub const SOURCE_AMPLITUDE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burgers {
    pub grid: Grid1D,
    pub time: TimeDiscretization,
}

/// Stencil values of one row: left neighbour (or inflow value), centre and
/// right neighbour (or the centre value at the outflow boundary).
#[derive(Clone, Copy)]
struct RowStates {
    left: f64,
    centre: f64,
    right: f64,
}

/// Jacobian row coefficients `(∂R_i/∂w_{i−1}, ∂R_i/∂w_i, ∂R_i/∂w_{i+1})`.
#[derive(Clone, Copy)]
struct JacobianRow {
    lower: f64,
    diag: f64,
    upper: f64,
}

impl Burgers {
    pub fn new(grid: Grid1D, time: TimeDiscretization) -> Self {
        Burgers { grid, time }
    }

    /// 4001-node grid on `[0, 100]`, Δt = 0.05, 1000 steps.
    pub fn benchmark() -> Self {
        Burgers {
            grid: Grid1D::benchmark(),
            time: TimeDiscretization::benchmark(),
        }
    }

    pub fn source(&self, i: usize, mu: &ParameterPoint) -> f64 {
        SOURCE_AMPLITUDE * (mu.b * self.grid.x(i)).exp()
    }

    #[inline]
    fn row_states(&self, i: usize, get: impl Fn(usize) -> f64, mu: &ParameterPoint) -> RowStates {
        let n = self.grid.num_unknowns();
        let centre = get(i);
        RowStates {
            left: if i == 0 { mu.a } else { get(i - 1) },
            centre,
            right: if i + 1 < n { get(i + 1) } else { centre },
        }
    }

    #[inline]
    fn rhs_row(&self, i: usize, s: RowStates, mu: &ParameterPoint) -> f64 {
        let flux_right = godunov_flux(s.centre, s.right);
        let flux_left = godunov_flux(s.left, s.centre);
        -(flux_right - flux_left) / self.grid.dx() + self.source(i, mu)
    }

    #[inline]
    fn residual_row(&self, i: usize, s: RowStates, prev: f64, mu: &ParameterPoint) -> f64 {
        s.centre - prev - self.time.dt * self.rhs_row(i, s, mu)
    }

    #[inline]
    fn jacobian_row(&self, i: usize, s: RowStates) -> JacobianRow {
        let n = self.grid.num_unknowns();
        let dx = self.grid.dx();
        let dt = self.time.dt;
        let (left_dl, left_dr) = godunov_flux_derivatives(s.left, s.centre);
        let (right_dl, right_dr) = godunov_flux_derivatives(s.centre, s.right);
        let last = i + 1 == n;
        // the outflow flux is F(u_i, u_i), so both of its arguments move with u_i
        let d_centre = if last {
            left_dr - right_dl - right_dr
        } else {
            left_dr - right_dl
        };
        JacobianRow {
            lower: if i == 0 { 0.0 } else { -dt * (left_dl / dx) },
            diag: 1.0 - dt * (d_centre / dx),
            upper: if last { 0.0 } else { -dt * (-right_dr / dx) },
        }
    }
}

impl FullOrderModel for Burgers {
    fn dim(&self) -> usize {
        self.grid.num_unknowns()
    }

    fn time(&self) -> &TimeDiscretization {
        &self.time
    }

    fn initial_condition(&self, _mu: &ParameterPoint) -> Vec<f64> {
        vec![1.0; self.dim()]
    }

    fn rhs(&self, state: &[f64], _t: f64, mu: &ParameterPoint) -> Result<Vec<f64>> {
        check_len("state", self.dim(), state.len())?;
        let mut out = vec![0.0; state.len()];
        par::fill_indexed(&mut out, |i| {
            self.rhs_row(i, self.row_states(i, |j| state[j], mu), mu)
        });
        Ok(out)
    }

    fn residual(
        &self,
        next: &[f64],
        prev: &[f64],
        _t_next: f64,
        mu: &ParameterPoint,
    ) -> Result<Vec<f64>> {
        check_len("next state", self.dim(), next.len())?;
        check_len("previous state", self.dim(), prev.len())?;
        let mut out = vec![0.0; next.len()];
        par::fill_indexed(&mut out, |i| {
            self.residual_row(i, self.row_states(i, |j| next[j], mu), prev[i], mu)
        });
        Ok(out)
    }

    fn residual_jacobian(
        &self,
        next: &[f64],
        prev: &[f64],
        _t_next: f64,
        mu: &ParameterPoint,
    ) -> Result<Tridiagonal> {
        let n = self.dim();
        check_len("next state", n, next.len())?;
        check_len("previous state", n, prev.len())?;
        let mut jac = Tridiagonal::identity(n);
        for i in 0..n {
            let row = self.jacobian_row(i, self.row_states(i, |j| next[j], mu));
            jac.diag[i] = row.diag;
            if i > 0 {
                jac.sub[i - 1] = row.lower;
            }
            if i + 1 < n {
                jac.sup[i] = row.upper;
            }
        }
        Ok(jac)
    }

    fn stencil_closure(&self, rows: &[usize]) -> Result<Vec<usize>> {
        stencil_closure(rows, self.dim())
    }

    fn masked_residual_and_jacobian_basis(
        &self,
        plan: &MaskPlan,
        next: &MaskedState,
        prev: &MaskedState,
        masked_basis: MatRef<'_, f64>,
        _t_next: f64,
        mu: &ParameterPoint,
        cost: &mut MaskedCost,
    ) -> Result<(Vec<f64>, Mat<f64>)> {
        plan.check_mask(next)?;
        plan.check_mask(prev)?;
        check_len(
            "masked basis rows",
            plan.closure_len(),
            masked_basis.nrows(),
        )?;
        let n = self.dim();
        let nw = masked_basis.ncols();
        let mut res = Vec::with_capacity(plan.num_rows());
        let mut rows = Vec::with_capacity(plan.num_rows());
        for (r, &i) in plan.rows.iter().enumerate() {
            let [pl, pc, pr] = plan.positions[r];
            let pc = pc.expect("row belongs to its own closure");
            let s = RowStates {
                left: if i == 0 {
                    mu.a
                } else {
                    next.values[pl.expect("closure holds left neighbour")]
                },
                centre: next.values[pc],
                right: if i + 1 < n {
                    next.values[pr.expect("closure holds right neighbour")]
                } else {
                    next.values[pc]
                },
            };
            cost.residual_rows += 1;
            cost.state_reads += 1 + (i > 0) as usize + (i + 1 < n) as usize;
            res.push(self.residual_row(i, s, prev.values[pc], mu));
            rows.push((pl, pc, pr, self.jacobian_row(i, s)));
        }
        // same operation order as Tridiagonal::mul_dense
        let jphi = Mat::from_fn(plan.num_rows(), nw, |r, k| {
            let (pl, pc, pr, row) = rows[r];
            let i = plan.rows[r];
            let mut v = row.diag * masked_basis[(pc, k)];
            if i > 0 {
                v += row.lower * masked_basis[(pl.unwrap(), k)];
            }
            if i + 1 < n {
                v += row.upper * masked_basis[(pr.unwrap(), k)];
            }
            v
        });
        Ok((res, jphi))
    }

    fn masked_residual(
        &self,
        plan: &MaskPlan,
        next: &MaskedState,
        prev: &MaskedState,
        _t_next: f64,
        mu: &ParameterPoint,
        cost: &mut MaskedCost,
    ) -> Result<Vec<f64>> {
        plan.check_mask(next)?;
        plan.check_mask(prev)?;
        let n = self.dim();
        let out = plan
            .rows
            .iter()
            .zip(&plan.positions)
            .map(|(&i, &[pl, pc, pr])| {
                let pc = pc.expect("row belongs to its own closure");
                let s = RowStates {
                    left: pl.map_or(mu.a, |p| next.values[p]),
                    centre: next.values[pc],
                    right: pr.map_or(next.values[pc], |p| next.values[p]),
                };
                cost.residual_rows += 1;
                cost.state_reads += 1 + (i > 0) as usize + (i + 1 < n) as usize;
                self.residual_row(i, s, prev.values[pc], mu)
            })
            .collect();
        Ok(out)
    }
}

/// `𝒥 = ⋃_{i∈ℐ} {i−1, i, i+1} ∩ {0, …, n−1}`, sorted and deduplicated.
pub fn stencil_closure(rows: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(3 * rows.len());
    for &i in rows {
        if i >= n {
            return Err(GnatError::IndexOutOfRange { index: i, dim: n });
        }
        if i > 0 {
            out.push(i - 1);
        }
        out.push(i);
        if i + 1 < n {
            out.push(i + 1);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
