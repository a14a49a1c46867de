//! A-posteriori error-bound ingredients for backward-Euler reduced models.
//!
//! With `f(x, t) = x − Δt·F(x, t)` and `R̄ⁿ(x) = x − w̃ⁿ − Δt·F(x, tⁿ⁺¹)`,
//! the state error obeys `‖wⁿ − w̃ⁿ‖ ≤ Σ_{k=1}^{n} aᵏ·β_{n−k}` for any of the
//! per-step terms `β ∈ {b, c, d}`, where `a` is the inverse Lipschitz
//! constant of `f`. Everything here reads full residuals, so it is an
//! offline diagnostic.

use std::io::Write;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, GnatError, Result};
use crate::linalg;
use crate::model::flux::godunov_flux_derivatives;
use crate::model::{Burgers, FullOrderModel, ParameterPoint};
use crate::par;
use crate::sampling::{OnlineOperators, SampleSets};

/// Estimate of the inverse Lipschitz constant `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// `true` when `value` provably bounds `a` from above; sampled estimates
    /// are lower bounds of the supremum.
    pub certified: bool,
    /// Probe pairs that contributed (0 for certified estimates).
    pub pairs: usize,
}

/// Sampled estimate `max ‖x − y‖ / ‖f(x, tⁿ) − f(y, tⁿ)‖` over probe pairs
/// and the time steps `steps`. Coincident pairs are skipped.
pub fn estimate_lipschitz_a<M: FullOrderModel>(
    model: &M,
    mu: &ParameterPoint,
    probes: &[Vec<f64>],
    steps: &[usize],
) -> Result<LipschitzEstimate> {
    let time = *model.time();
    for p in probes {
        check_len("probe state", model.dim(), p.len())?;
    }
    if steps.is_empty() {
        return Err(GnatError::InvalidConfig("no time steps to probe".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..probes.len())
        .flat_map(|i| (i + 1..probes.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| probes[i] != probes[j])
        .collect();
    if pairs.is_empty() {
        return Err(GnatError::CoincidentProbes);
    }
    let distances = par::map_slice(&pairs, |&(i, j)| {
        linalg::norm2(&linalg::sub(&probes[i], &probes[j]))
    });
    let mut value = 0.0f64;
    for &n in steps {
        let t = time.time(n);
        let images = par::map_slice(probes, |x| {
            let fx = model.rhs(x, t, mu)?;
            Ok(x.iter()
                .zip(&fx)
                .map(|(xi, fi)| xi - time.dt * fi)
                .collect::<Vec<f64>>())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let ratios = par::map_range(pairs.len(), |p| {
            let (i, j) = pairs[p];
            distances[p] / linalg::norm2(&linalg::sub(&images[i], &images[j]))
        });
        value = ratios.into_iter().fold(value, f64::max);
    }
    Ok(LipschitzEstimate {
        value,
        certified: false,
        pairs: pairs.len(),
    })
}

/// Certified upper bound on `a` for the Burgers model over the box
/// `‖x‖_∞ ≤ state_bound`.
///
/// The Godunov flux slopes are sampled on `grid_points` values per argument
/// in `[−state_bound, state_bound]`; as the slopes are 1-Lipschitz in `u`,
/// adding the grid spacing gives a bound `L_G` on them. Each Jacobian row and
/// column of `F` then sums to at most `3·L_G/dx` and `4·L_G/dx`, so
/// `‖∂F/∂w‖₂ ≤ √12·L_G/dx` and `a ≤ 1/(1 − Δt·√12·L_G/dx)`.
pub fn certified_lipschitz_a(
    model: &Burgers,
    state_bound: f64,
    grid_points: usize,
) -> Result<LipschitzEstimate> {
    if !(state_bound >= 0.0 && state_bound.is_finite()) || grid_points < 2 {
        return Err(GnatError::InvalidConfig(
            "need a finite state bound and at least two grid points".into(),
        ));
    }
    let h = 2.0 * state_bound / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| -state_bound + k as f64 * h)
        .collect();
    let slopes = par::map_slice(&grid, |&ul| {
        grid.iter()
            .map(|&ur| {
                let (dl, dr) = godunov_flux_derivatives(ul, ur);
                dl.abs().max(dr.abs()).max(ul.abs()).max(ur.abs())
            })
            .fold(0.0, f64::max)
    });
    let lg = slopes.into_iter().fold(0.0, f64::max) + h;
    let lf = 12f64.sqrt() * lg / model.grid.dx();
    let contraction = model.time.dt * lf;
    if contraction >= 1.0 {
        return Err(GnatError::InvalidConfig(format!(
            "Δt·L_F = {contraction:.3} ≥ 1; no certified bound on this box"
        )));
    }
    Ok(LipschitzEstimate {
        value: 1.0 / (1.0 - contraction),
        certified: true,
        pairs: 0,
    })
}

/// Gappy reconstruction `P̌ = Φ_R(ZΦ_R)⁺Z` next to the orthogonal projector
/// `ℙ = Φ_RΦ_Rᵀ`, for an orthonormal `Φ_R`.
#[derive(Debug, Clone)]
pub struct GappyProjector {
    pub basis: Mat<f64>,
    pub indices: Vec<usize>,
    /// `(ZΦ_R)⁺`.
    pub pinv: Mat<f64>,
    /// `‖𝖱⁻¹‖₂ = 1/σ_min(ZΦ_R)`.
    pub r_inv_norm: f64,
}

impl GappyProjector {
    pub fn new(basis: MatRef<'_, f64>, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= basis.nrows()) {
            return Err(GnatError::IndexOutOfRange {
                index: bad,
                dim: basis.nrows(),
            });
        }
        let z = linalg::gather_rows(basis, indices);
        let pinv = linalg::pinv_full_rank(z.as_ref(), "sampled residual basis")?;
        Ok(GappyProjector {
            basis: basis.to_owned(),
            indices: indices.to_vec(),
            pinv,
            r_inv_norm: 1.0 / linalg::sigma_min(z.as_ref())?,
        })
    }

    /// `(ZΦ_R)⁺·Z·g`.
    pub fn coefficients(&self, g: &[f64]) -> Vec<f64> {
        let zg: Vec<f64> = self.indices.iter().map(|&i| g[i]).collect();
        linalg::matvec(self.pinv.as_ref(), &zg)
    }

    /// `P̌·g`.
    pub fn reconstruct(&self, g: &[f64]) -> Vec<f64> {
        linalg::matvec(self.basis.as_ref(), &self.coefficients(g))
    }

    /// `(I − ℙ)·g`.
    pub fn orthogonal_complement(&self, g: &[f64]) -> Vec<f64> {
        let c = linalg::matvec_t(self.basis.as_ref(), g);
        linalg::sub(g, &linalg::matvec(self.basis.as_ref(), &c))
    }
}

/// `‖𝖱⁻¹‖₂` from the thin QR `ZΦ_R = 𝖰𝖱`, i.e. `1/σ_min(ZΦ_R)`.
pub fn gappy_bound_factor(operators: &OnlineOperators) -> Result<f64> {
    let z = operators.sampled_residual_basis.as_ref();
    let s = z
        .singular_values()
        .map_err(|e| GnatError::Linalg(format!("svd: {e:?}")))?;
    let (max, min) = (
        s.first().copied().unwrap_or(0.0),
        s.last().copied().unwrap_or(0.0),
    );
    if s.len() < z.ncols() || !(min > linalg::PINV_RANK_TOL * max) {
        let rank = s
            .iter()
            .filter(|&&v| v > linalg::PINV_RANK_TOL * max)
            .count();
        return Err(GnatError::RankDeficient {
            what: "sampled residual basis",
            rank,
            required: z.ncols(),
        });
    }
    Ok(1.0 / min)
}

/// Estimate of the gappy projection error: the distance between
/// the reconstruction with the extended basis (first `n_R′` columns of
/// `phi_r_extended`) and the zero-padded reconstruction with its first
/// `nominal` columns.
pub fn projection_error_estimate(
    phi_r_extended: MatRef<'_, f64>,
    nominal: usize,
    sets: &SampleSets,
    residual_sample: &[f64],
) -> Result<f64> {
    let extended = phi_r_extended.ncols();
    if extended <= nominal {
        return Err(GnatError::InvalidConfig(format!(
            "extended basis needs more than {nominal} columns, has {extended}"
        )));
    }
    check_len("residual sample", sets.num_samples(), residual_sample.len())?;
    let z = linalg::gather_rows(phi_r_extended, &sets.residual_indices);
    let wide = linalg::pinv_full_rank(z.as_ref(), "extended sampled residual basis")?;
    let narrow = linalg::pinv_full_rank(z.subcols(0, nominal), "sampled residual basis")?;
    let mut diff = linalg::matvec(wide.as_ref(), residual_sample);
    let c = linalg::matvec(narrow.as_ref(), residual_sample);
    for (d, ci) in diff.iter_mut().zip(&c) {
        *d -= ci;
    }
    Ok(linalg::norm2(&linalg::matvec(phi_r_extended, &diff)))
}

/// Per-step bound terms and their cumulative sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub lipschitz_a: LipschitzEstimate,
    pub eps_newton: f64,
    /// `b_n = ε + ‖R̄ⁿ‖`, n = 0..nt−1.
    pub b: Vec<f64>,
    /// `c_n = ε + ‖P̌R̄ⁿ‖ + ‖(I − P̌)R̄ⁿ‖`.
    pub c: Vec<f64>,
    /// `d_n = ε + ‖P̌R̄ⁿ‖ + ‖𝖱⁻¹‖·‖(I − ℙ)R̄ⁿ‖`.
    pub d: Vec<f64>,
    /// `cum_b[n − 1] = Σ_{k=1}^{n} aᵏ·b_{n−k}`, n = 1..nt; same for c, d.
    pub cum_b: Vec<f64>,
    pub cum_c: Vec<f64>,
    pub cum_d: Vec<f64>,
    pub r_inv_norm: f64,
    /// Sum of squared singular values left out of Φ_R, the average-case
    /// surrogate for `‖(I − ℙ)R̄‖²`, when supplied.
    pub neglected_energy: Option<f64>,
}

impl BoundTrace {
    /// `n, b, c, d, cum_b, cum_c, cum_d`, one line per step n = 1..nt. Row
    /// `n` carries the per-step terms `b_{n−1}` etc. and the bounds on
    /// `‖wⁿ − w̃ⁿ‖`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "n,b,c,d,cum_b,cum_c,cum_d")?;
        for k in 0..self.b.len() {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                k + 1,
                self.b[k],
                self.c[k],
                self.d[k],
                self.cum_b[k],
                self.cum_c[k],
                self.cum_d[k]
            )?;
        }
        Ok(())
    }
}

/// Evaluates `b_n, c_n, d_n` along the reconstructed reduced trajectory
/// `w̃⁰ … w̃^nt` and accumulates the global bounds with constant `a`.
pub fn bound_terms<M: FullOrderModel>(
    rom_states: &[Vec<f64>],
    model: &M,
    mu: &ParameterPoint,
    gappy: &GappyProjector,
    eps_newton: f64,
    a: LipschitzEstimate,
    neglected_energy: Option<f64>,
) -> Result<BoundTrace> {
    if rom_states.len() < 2 {
        return Err(GnatError::EmptyTrajectory);
    }
    for s in rom_states {
        check_len("reduced state", model.dim(), s.len())?;
    }
    check_len("gappy basis rows", model.dim(), gappy.basis.nrows())?;
    let time = *model.time();
    let terms = par::map_range(rom_states.len() - 1, |n| {
        let r = model.residual(&rom_states[n + 1], &rom_states[n], time.time(n + 1), mu)?;
        let rnorm = linalg::norm2(&r);
        let rec = gappy.reconstruct(&r);
        let proj = linalg::norm2(&rec);
        let gap = linalg::norm2(&linalg::sub(&r, &rec));
        let ortho = linalg::norm2(&gappy.orthogonal_complement(&r));
        Ok((
            eps_newton + rnorm,
            eps_newton + proj + gap,
            eps_newton + proj + gappy.r_inv_norm * ortho,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let b: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let c: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let d: Vec<f64> = terms.iter().map(|t| t.2).collect();
    let mut trace = BoundTrace {
        lipschitz_a: a,
        eps_newton,
        cum_b: Vec::new(),
        cum_c: Vec::new(),
        cum_d: Vec::new(),
        b,
        c,
        d,
        r_inv_norm: gappy.r_inv_norm,
        neglected_energy,
    };
    for n in 1..=trace.b.len() {
        let (gb, gc, gd) = global_bounds(&trace, n)?;
        trace.cum_b.push(gb);
        trace.cum_c.push(gc);
        trace.cum_d.push(gd);
    }
    Ok(trace)
}

/// `(Σ_{k=1}^{n} aᵏ·b_{n−k}, … c …, … d …)`.
pub fn global_bounds(trace: &BoundTrace, n: usize) -> Result<(f64, f64, f64)> {
    if n > trace.b.len() || n > trace.c.len() || n > trace.d.len() {
        return Err(GnatError::IncompleteTrace {
            requested: n,
            available: trace.b.len().min(trace.c.len()).min(trace.d.len()),
        });
    }
    let a = trace.lipschitz_a.value;
    let mut sums = (0.0, 0.0, 0.0);
    let mut ak = 1.0;
    for k in 1..=n {
        ak *= a;
        sums.0 += ak * trace.b[n - k];
        sums.1 += ak * trace.c[n - k];
        sums.2 += ak * trace.d[n - k];
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tridiagonal;
    use crate::model::{Grid1D, TimeDiscretization};
    use crate::model::{MaskPlan, MaskedCost, MaskedState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `F(x) = λ·x` with `λ = 0` allowed.
    struct Linear {
        lambda: f64,
        time: TimeDiscretization,
        n: usize,
    }

    impl FullOrderModel for Linear {
        fn dim(&self) -> usize {
            self.n
        }
        fn time(&self) -> &TimeDiscretization {
            &self.time
        }
        fn initial_condition(&self, _: &ParameterPoint) -> Vec<f64> {
            vec![1.0; self.n]
        }
        fn rhs(&self, s: &[f64], _: f64, _: &ParameterPoint) -> Result<Vec<f64>> {
            Ok(s.iter().map(|v| self.lambda * v).collect())
        }
        fn residual(&self, x: &[f64], p: &[f64], t: f64, mu: &ParameterPoint) -> Result<Vec<f64>> {
            let f = self.rhs(x, t, mu)?;
            Ok((0..self.n)
                .map(|i| x[i] - p[i] - self.time.dt * f[i])
                .collect())
        }
        fn residual_jacobian(
            &self,
            _: &[f64],
            _: &[f64],
            _: f64,
            _: &ParameterPoint,
        ) -> Result<Tridiagonal> {
            let mut j = Tridiagonal::identity(self.n);
            j.diag
                .iter_mut()
                .for_each(|d| *d -= self.time.dt * self.lambda);
            Ok(j)
        }
        fn stencil_closure(&self, rows: &[usize]) -> Result<Vec<usize>> {
            Ok(rows.to_vec())
        }
        fn masked_residual_and_jacobian_basis(
            &self,
            _: &MaskPlan,
            _: &MaskedState,
            _: &MaskedState,
            _: MatRef<'_, f64>,
            _: f64,
            _: &ParameterPoint,
            _: &mut MaskedCost,
        ) -> Result<(Vec<f64>, Mat<f64>)> {
            unimplemented!()
        }
        fn masked_residual(
            &self,
            _: &MaskPlan,
            _: &MaskedState,
            _: &MaskedState,
            _: f64,
            _: &ParameterPoint,
            _: &mut MaskedCost,
        ) -> Result<Vec<f64>> {
            unimplemented!()
        }
    }

    fn probes(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..n).map(|_| rng.gen_range(0.5..3.0)).collect())
            .collect()
    }

    fn orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        Mat::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0))
            .qr()
            .compute_thin_Q()
    }

    fn mu() -> ParameterPoint {
        ParameterPoint::new(1.0, 0.0)
    }

    #[test]
    fn zero_rhs_gives_unit_constant() {
        let m = Linear {
            lambda: 0.0,
            time: TimeDiscretization::new(0.1, 3).unwrap(),
            n: 4,
        };
        let a = estimate_lipschitz_a(&m, &mu(), &probes(4, 5, 1), &[1, 2, 3]).unwrap();
        assert_eq!(a.value, 1.0);
        assert!(!a.certified);
        assert_eq!(a.pairs, 10);
    }

    #[test]
    fn linear_rhs_closed_form() {
        let m = Linear {
            lambda: -3.0,
            time: TimeDiscretization::new(0.1, 2).unwrap(),
            n: 4,
        };
        let a = estimate_lipschitz_a(&m, &mu(), &probes(4, 2, 2), &[1, 2]).unwrap();
        assert!((a.value - 1.0 / 1.3).abs() < 1e-14);
    }

    #[test]
    fn coincident_probes_are_rejected() {
        let m = Linear {
            lambda: 1.0,
            time: TimeDiscretization::new(0.1, 1).unwrap(),
            n: 3,
        };
        let p = vec![vec![1.0; 3]; 3];
        assert!(matches!(
            estimate_lipschitz_a(&m, &mu(), &p, &[1]),
            Err(GnatError::CoincidentProbes)
        ));
    }

    #[test]
    fn more_probes_never_lower_the_estimate() {
        let m = Burgers::new(
            Grid1D::new(17, 100.0).unwrap(),
            TimeDiscretization::new(0.5, 2).unwrap(),
        );
        let p = probes(16, 12, 3);
        let mut last = 0.0;
        for k in 2..=12 {
            let a = estimate_lipschitz_a(&m, &mu(), &p[..k], &[1, 2])
                .unwrap()
                .value;
            assert!(a.is_finite() && a > 0.0);
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn certified_bound_dominates_samples() {
        let m = Burgers::new(
            Grid1D::new(17, 100.0).unwrap(),
            TimeDiscretization::new(0.05, 3).unwrap(),
        );
        let cert = certified_lipschitz_a(&m, 3.0, 201).unwrap();
        assert!(cert.certified);
        let sampled = estimate_lipschitz_a(
            &m,
            &ParameterPoint::new(3.0, 0.02),
            &probes(16, 20, 4),
            &[1, 2, 3],
        )
        .unwrap();
        assert!(sampled.value <= cert.value);
        let fast = Burgers::new(
            Grid1D::new(17, 100.0).unwrap(),
            TimeDiscretization::new(5.0, 1).unwrap(),
        );
        assert!(certified_lipschitz_a(&fast, 3.0, 101).is_err());
    }

    #[test]
    fn bound_factor_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = orthonormal(10, 3, &mut rng);
        let all: Vec<usize> = (0..10).collect();
        let g = GappyProjector::new(phi.as_ref(), &all).unwrap();
        assert!((g.r_inv_norm - 1.0).abs() < 1e-12);

        let mut ops_basis = Mat::<f64>::zeros(2, 2);
        ops_basis[(0, 0)] = 2.0;
        ops_basis[(1, 1)] = 0.5;
        let ops = OnlineOperators {
            a: Mat::zeros(2, 2),
            b: Mat::zeros(2, 2),
            masked_state_basis: Mat::zeros(0, 0),
            masked_initial_condition: Vec::new(),
            output_basis: Mat::zeros(0, 0),
            output_initial_condition: Vec::new(),
            sampled_residual_basis: ops_basis,
        };
        assert!((gappy_bound_factor(&ops).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gappy_inequality_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi = orthonormal(30, 4, &mut rng);
        let rows = [0, 3, 7, 12, 18, 25, 29];
        let g = GappyProjector::new(phi.as_ref(), &rows).unwrap();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = linalg::norm2(&linalg::sub(&v, &g.reconstruct(&v)));
            let rhs = g.r_inv_norm * linalg::norm2(&g.orthogonal_complement(&v));
            assert!(lhs <= rhs * (1.0 + 1e-10));
        }
    }

    #[test]
    fn projection_estimate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20;
        let m = Burgers::new(
            Grid1D::new(n + 1, 100.0).unwrap(),
            TimeDiscretization::new(0.05, 1).unwrap(),
        );
        let phi = orthonormal(n, 4, &mut rng);
        let sets = SampleSets::new(
            &m,
            &[0, 2, 5, 9, 13, 17],
            1,
            &crate::sampling::OutputSpec::Global,
        )
        .unwrap();
        let zr = |v: &[f64]| {
            sets.residual_indices
                .iter()
                .map(|&i| v[i])
                .collect::<Vec<_>>()
        };
        let inside = linalg::matvec(phi.as_ref(), &[1.0, -2.0, 0.5, 0.0]);
        let e = projection_error_estimate(phi.as_ref(), 3, &sets, &zr(&inside)).unwrap();
        assert!(e < 1e-12);
        let outside: Vec<f64> = phi.col_as_slice(3).to_vec();
        let e = projection_error_estimate(phi.as_ref(), 3, &sets, &zr(&outside)).unwrap();
        // the extended reconstruction is exact, the nominal one misses it
        let z = linalg::gather_rows(phi.subcols(0, 3), &sets.residual_indices);
        let c = linalg::lstsq(z.as_ref(), &zr(&outside), "t").unwrap();
        let nominal = linalg::matvec(phi.subcols(0, 3), &c);
        let expect = linalg::norm2(&linalg::sub(&outside, &nominal));
        assert!((e - expect).abs() < 1e-10);
        assert!(projection_error_estimate(phi.as_ref(), 4, &sets, &zr(&outside)).is_err());
    }

    fn trace_with(a: f64, b: Vec<f64>) -> BoundTrace {
        BoundTrace {
            lipschitz_a: LipschitzEstimate {
                value: a,
                certified: true,
                pairs: 0,
            },
            eps_newton: 0.0,
            c: b.clone(),
            d: b.clone(),
            b,
            cum_b: Vec::new(),
            cum_c: Vec::new(),
            cum_d: Vec::new(),
            r_inv_norm: 1.0,
            neglected_energy: None,
        }
    }

    #[test]
    fn global_bound_examples() {
        let t = trace_with(1.5, vec![2.0, 7.0]);
        assert_eq!(global_bounds(&t, 1).unwrap(), (3.0, 3.0, 3.0));
        let t = trace_with(1.0, vec![0.25; 8]);
        assert_eq!(global_bounds(&t, 8).unwrap().0, 2.0);
        assert!(matches!(
            global_bounds(&t, 9),
            Err(GnatError::IncompleteTrace {
                requested: 9,
                available: 8
            })
        ));
    }

    #[test]
    fn exact_states_give_tolerance_only() {
        let m = Burgers::new(
            Grid1D::new(11, 100.0).unwrap(),
            TimeDiscretization::new(0.05, 3).unwrap(),
        );
        let mu = ParameterPoint::new(2.0, 0.01);
        let cfg = crate::solvers::SolverConfig {
            newton_abs_tol: 1e-14,
            newton_rel_tol: 1e-16,
            ..Default::default()
        };
        let fom =
            crate::solvers::solve_fom(&m, &mu, &cfg, &mut crate::solvers::NoObserver).unwrap();
        let eye = Mat::<f64>::identity(10, 10);
        let all: Vec<usize> = (0..10).collect();
        let g = GappyProjector::new(eye.as_ref(), &all).unwrap();
        let a = LipschitzEstimate {
            value: 1.0,
            certified: false,
            pairs: 0,
        };
        let t = bound_terms(&fom.states, &m, &mu, &g, 1e-8, a, None).unwrap();
        for k in 0..3 {
            assert!((t.b[k] - 1e-8).abs() < 1e-13);
            assert!((t.c[k] - t.b[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn terms_are_ordered_on_random_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 16;
        let m = Burgers::new(
            Grid1D::new(n + 1, 100.0).unwrap(),
            TimeDiscretization::new(0.05, 5).unwrap(),
        );
        let mu = ParameterPoint::new(2.0, 0.02);
        let states = probes(n, 6, 11);
        let phi = orthonormal(n, 4, &mut rng);
        let g = GappyProjector::new(phi.as_ref(), &[0, 3, 6, 9, 12, 15]).unwrap();
        let a = certified_lipschitz_a(&m, 3.0, 101).unwrap();
        let t = bound_terms(&states, &m, &mu, &g, 1e-8, a, Some(0.1)).unwrap();
        for k in 0..5 {
            assert!(t.b[k] <= t.c[k] * (1.0 + 1e-12));
            assert!(t.c[k] <= t.d[k] * (1.0 + 1e-12));
            assert!(t.cum_b[k] <= t.cum_c[k] * (1.0 + 1e-12));
            assert!(t.cum_c[k] <= t.cum_d[k] * (1.0 + 1e-12));
        }
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("n,b,c,d,cum_b,cum_c,cum_d"));
    }
}
