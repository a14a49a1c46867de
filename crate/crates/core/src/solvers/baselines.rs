//! Competing hyper-reduction methods: collocation with Galerkin or
//! least-squares projection, and a DEIM-like interpolatory GNAT.

use std::time::Instant;

use faer::{Mat, MatRef};

use super::tier2::gauss_newton;
use super::{
    line_search, solve_gnat_online_partial, OnlineCost, PartialRun, ReducedTrajectory,
    SolverConfig, StepStats,
};
use crate::error::{check_len, GnatError, Result};
use crate::linalg;
use crate::model::{FullOrderModel, MaskPlan, MaskedCost, MaskedState, ParameterPoint};
use crate::sampling::{compute_online_operators, SampleSets};

/// Masked view of the trial subspace over a sample set.
struct Collocation<'a, M> {
    model: &'a M,
    mu: ParameterPoint,
    plan: MaskPlan,
    masked_basis: Mat<f64>,
    masked_initial: Vec<f64>,
}

impl<'a, M: FullOrderModel> Collocation<'a, M> {
    fn new(
        model: &'a M,
        mu: &ParameterPoint,
        phi_w: MatRef<'_, f64>,
        sets: &SampleSets,
        initial: &[f64],
    ) -> Result<Self> {
        check_len("trial basis rows", model.dim(), phi_w.nrows())?;
        check_len("initial condition", model.dim(), initial.len())?;
        let plan = MaskPlan::new(model, &sets.residual_indices)?;
        Ok(Collocation {
            model,
            mu: *mu,
            masked_basis: linalg::gather_rows(phi_w, &plan.closure),
            masked_initial: plan.closure.iter().map(|&i| initial[i]).collect(),
            plan,
        })
    }

    fn state(&self, y: &[f64]) -> MaskedState {
        let mut v = linalg::matvec(self.masked_basis.as_ref(), y);
        linalg::axpy(1.0, &self.masked_initial, &mut v);
        MaskedState {
            indices: self.plan.closure.clone(),
            values: v,
        }
    }

    /// `(Z·R, Z·J·Φ_w)` at `y`.
    fn evaluate(
        &self,
        y: &[f64],
        prev: &MaskedState,
        t: f64,
        cost: &mut OnlineCost,
    ) -> Result<(Vec<f64>, Mat<f64>)> {
        let mut mc = MaskedCost::default();
        let out = self.model.masked_residual_and_jacobian_basis(
            &self.plan,
            &self.state(y),
            prev,
            self.masked_basis.as_ref(),
            t,
            &self.mu,
            &mut mc,
        )?;
        cost.record(mc.residual_rows, self.plan.closure_len());
        Ok(out)
    }

    fn residual(&self, y: &[f64], prev: &MaskedState, t: f64) -> Result<Vec<f64>> {
        let mut mc = MaskedCost::default();
        self.model
            .masked_residual(&self.plan, &self.state(y), prev, t, &self.mu, &mut mc)
    }

    /// Rows `ℐ` of Φ_w.
    fn sampled_basis(&self) -> Mat<f64> {
        let rows: Vec<usize> = self
            .plan
            .positions
            .iter()
            .map(|p| p[1].expect("row belongs to its own closure"))
            .collect();
        linalg::gather_rows(self.masked_basis.as_ref(), &rows)
    }
}

/// Collocation + Galerkin: Newton on the square system
/// `(ZΦ_w)ᵀ·Z·R(w⁰ + Φ_w·y) = 0`.
pub fn baseline_collocation_galerkin<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<ReducedTrajectory> {
    collocation_galerkin_partial(mu, model, phi_w, sets, initial, config)?.into_result()
}

/// [`baseline_collocation_galerkin`] keeping the steps completed before a
/// failure.
pub fn collocation_galerkin_partial<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<PartialRun> {
    config.validate()?;
    let col = Collocation::new(model, mu, phi_w, sets, initial)?;
    let zphi = col.sampled_basis();
    let project = |v: &[f64]| linalg::matvec_t(zphi.as_ref(), v);
    let time = *model.time();
    let mut out = ReducedTrajectory::start(mu, phi_w.ncols(), false);
    let failure = (|| -> Result<()> {
        for step in 1..=time.num_steps {
            let started = Instant::now();
            let t = time.time(step);
            let prev = col.state(&out.coords[step - 1]);
            let mut y = out.coords[step - 1].clone();
            let (mut zr, mut c) = col.evaluate(&y, &prev, t, &mut out.cost)?;
            let mut g = project(&zr);
            let mut gnorm = linalg::norm2(&g);
            let tol = config.newton_abs_tol.max(config.newton_rel_tol * gnorm);
            let mut k = 0;
            while gnorm > tol {
                if k == config.max_newton_iters || !gnorm.is_finite() {
                    return Err(GnatError::StepFailure {
                        solver: "collocation Galerkin",
                        step,
                        iterations: k,
                        residual: gnorm,
                    });
                }
                let jac = zphi.transpose() * &c;
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                let delta = linalg::lstsq(jac.as_ref(), &neg, "reduced Galerkin Jacobian")
                    .map_err(|_| GnatError::Singular {
                        what: "reduced Galerkin Jacobian",
                        step,
                        iteration: k,
                        dump: y.clone(),
                    })?;
                let f0 = 0.5 * gnorm * gnorm;
                let alpha = line_search(config.step_policy, f0, -2.0 * f0, |alpha| {
                    let mut trial = y.clone();
                    linalg::axpy(alpha, &delta, &mut trial);
                    let gt = project(&col.residual(&trial, &prev, t)?);
                    Ok(0.5 * linalg::dot(&gt, &gt))
                })?;
                linalg::axpy(alpha, &delta, &mut y);
                (zr, c) = col.evaluate(&y, &prev, t, &mut out.cost)?;
                g = project(&zr);
                gnorm = linalg::norm2(&g);
                k += 1;
            }
            let stats = StepStats {
                iterations: k,
                residual_norm: gnorm,
                wall_ns: started.elapsed().as_nanos() as u64,
            };
            out.push_step(t, y, stats, Vec::new());
        }
        Ok(())
    })()
    .err();
    Ok(PartialRun {
        trajectory: out,
        failure,
    })
}

/// Collocation + least squares: Gauss–Newton on `min ‖Z·R(w⁰ + Φ_w·y)‖₂`,
/// with the tier II stopping rules.
pub fn baseline_collocation_least_squares<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<ReducedTrajectory> {
    collocation_least_squares_partial(mu, model, phi_w, sets, initial, config)?.into_result()
}

/// [`baseline_collocation_least_squares`] keeping the steps completed before
/// a failure.
pub fn collocation_least_squares_partial<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<PartialRun> {
    config.validate()?;
    let col = Collocation::new(model, mu, phi_w, sets, initial)?;
    let time = *model.time();
    let mut out = ReducedTrajectory::start(mu, phi_w.ncols(), config.record_iterates);
    let failure = (|| -> Result<()> {
        for step in 1..=time.num_steps {
            let started = Instant::now();
            let t = time.time(step);
            let prev = col.state(&out.coords[step - 1]);
            let cost = &mut out.cost;
            let gn = gauss_newton(
                &out.coords[step - 1],
                config,
                "collocation least squares",
                step,
                |y| col.evaluate(y, &prev, t, cost),
                |y| col.residual(y, &prev, t),
                |_, _, _, _| {},
            )?;
            let stats = StepStats {
                iterations: gn.iterations,
                residual_norm: gn.residual_norm,
                wall_ns: started.elapsed().as_nanos() as u64,
            };
            out.push_step(t, gn.coords, stats, gn.iterates);
        }
        Ok(())
    })()
    .err();
    Ok(PartialRun {
        trajectory: out,
        failure,
    })
}

/// DEIM-like interpolation: GNAT with `Φ_R = Φ_J` taken from tier I residual
/// snapshots and exactly as many sample rows as basis vectors.
#[allow(clippy::too_many_arguments)]
pub fn baseline_deim_like<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    phi_r: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<ReducedTrajectory> {
    deim_like_partial(mu, model, phi_w, phi_r, sets, initial, config)?.into_result()
}

/// [`baseline_deim_like`] keeping the steps completed before a failure.
#[allow(clippy::too_many_arguments)]
pub fn deim_like_partial<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    phi_w: MatRef<'_, f64>,
    phi_r: MatRef<'_, f64>,
    sets: &SampleSets,
    initial: &[f64],
    config: &SolverConfig,
) -> Result<PartialRun> {
    if phi_r.ncols() != sets.num_samples() {
        return Err(GnatError::InvalidConfig(format!(
            "DEIM-like interpolation needs n_R = n_i, got n_R={}, n_i={}",
            phi_r.ncols(),
            sets.num_samples()
        )));
    }
    let ops =
        compute_online_operators(phi_w, phi_r, phi_r, sets, initial).map_err(|e| match e {
            GnatError::RankDeficient { rank, required, .. } => GnatError::RankDeficient {
                what: "DEIM interpolation matrix",
                rank,
                required,
            },
            other => other,
        })?;
    solve_gnat_online_partial(mu, model, &ops, sets, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Burgers, Grid1D, TimeDiscretization};
    use crate::sampling::OutputSpec;
    use crate::solvers::{pg_direction, solve_tier2_pg};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(n: usize, dt: f64, steps: usize) -> Burgers {
        Burgers::new(
            Grid1D::new(n + 1, 100.0).unwrap(),
            TimeDiscretization::new(dt, steps).unwrap(),
        )
    }

    fn orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        Mat::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0))
            .qr()
            .compute_thin_Q()
    }

    fn max_gap(a: &ReducedTrajectory, b: &ReducedTrajectory) -> f64 {
        a.coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| linalg::norm2(&linalg::sub(x, y)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn complete_sampling_least_squares_is_tier_two() {
        let m = model(18, 0.5, 4);
        let mu = ParameterPoint::new(2.0, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = orthonormal(18, 3, &mut rng);
        let w0 = m.initial_condition(&mu);
        let sets = SampleSets::complete(&m).unwrap();
        let cfg = SolverConfig::default();
        let ls =
            baseline_collocation_least_squares(&mu, &m, phi.as_ref(), &sets, &w0, &cfg).unwrap();
        let pg = solve_tier2_pg(&mu, &m, phi.as_ref(), &w0, &cfg).unwrap();
        assert_eq!(ls.coords, pg.coords);
    }

    #[test]
    fn complete_sampling_galerkin_matches_dense_galerkin() {
        let n = 18;
        let m = model(n, 0.5, 3);
        let mu = ParameterPoint::new(2.0, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let phi = orthonormal(n, 3, &mut rng);
        let w0 = m.initial_condition(&mu);
        let sets = SampleSets::complete(&m).unwrap();
        let cfg = SolverConfig {
            newton_abs_tol: 1e-13,
            newton_rel_tol: 1e-14,
            ..SolverConfig::default()
        };
        let gal = baseline_collocation_galerkin(&mu, &m, phi.as_ref(), &sets, &w0, &cfg).unwrap();
        // dense oracle: Φᵀ R(w⁰ + Φ y) = 0 at every step
        let states = gal.reconstruct(&w0, phi.as_ref());
        for s in 1..=3 {
            let r = m
                .residual(&states[s], &states[s - 1], m.time.time(s), &mu)
                .unwrap();
            assert!(linalg::norm2(&linalg::matvec_t(phi.as_ref(), &r)) < 1e-11);
        }
    }

    #[test]
    fn square_collocation_least_squares_interpolates() {
        // n_i = n_w: the sampled residual is driven to zero
        let n = 20;
        let m = model(n, 0.5, 2);
        let mu = ParameterPoint::new(2.0, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = orthonormal(n, 3, &mut rng);
        let w0 = m.initial_condition(&mu);
        let sets = SampleSets::new(&m, &[0, 7, 15], 1, &OutputSpec::Global).unwrap();
        let ls = baseline_collocation_least_squares(
            &mu,
            &m,
            phi.as_ref(),
            &sets,
            &w0,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(ls.stats.iter().all(|s| s.residual_norm < 1e-8));
    }

    #[test]
    fn sampled_least_squares_matches_dense_oracle_step() {
        let n = 20;
        let m = model(n, 0.5, 1);
        let mu = ParameterPoint::new(2.0, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = orthonormal(n, 3, &mut rng);
        let w0 = m.initial_condition(&mu);
        let sets = SampleSets::new(&m, &[0, 4, 9, 13, 19], 1, &OutputSpec::Global).unwrap();
        let cfg = SolverConfig {
            record_iterates: true,
            ..SolverConfig::default()
        };
        let ls =
            baseline_collocation_least_squares(&mu, &m, phi.as_ref(), &sets, &w0, &cfg).unwrap();
        // first iterate from the dense rows of R and JΦ
        let r = m.residual(&w0, &w0, 0.5, &mu).unwrap();
        let jphi = m
            .residual_jacobian(&w0, &w0, 0.5, &mu)
            .unwrap()
            .mul_dense(phi.as_ref());
        let zr: Vec<f64> = sets.residual_indices.iter().map(|&i| r[i]).collect();
        let zj = linalg::gather_rows(jphi.as_ref(), &sets.residual_indices);
        let s = pg_direction(zj.as_ref(), &zr).unwrap();
        let it = &ls.iterates.unwrap()[0];
        assert!(linalg::norm2(&linalg::sub(&it[1], &s)) < 1e-12);
    }

    #[test]
    fn deim_like_complete_interpolation_is_tier_two() {
        let n = 14;
        let m = model(n, 0.5, 3);
        let mu = ParameterPoint::new(2.0, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi = orthonormal(n, 3, &mut rng);
        let full = Mat::<f64>::identity(n, n);
        let w0 = m.initial_condition(&mu);
        let sets = SampleSets::complete(&m).unwrap();
        let cfg = SolverConfig::default();
        let d = baseline_deim_like(&mu, &m, phi.as_ref(), full.as_ref(), &sets, &w0, &cfg).unwrap();
        let pg = solve_tier2_pg(&mu, &m, phi.as_ref(), &w0, &cfg).unwrap();
        assert!(max_gap(&d, &pg) < 1e-8);
    }

    #[test]
    fn deim_like_requires_square_interpolation() {
        let m = model(10, 0.5, 1);
        let mu = ParameterPoint::new(2.0, 0.0);
        let phi = Mat::<f64>::identity(10, 2);
        let sets = SampleSets::new(&m, &[0, 1, 2], 1, &OutputSpec::Global).unwrap();
        let err = baseline_deim_like(
            &mu,
            &m,
            phi.as_ref(),
            phi.as_ref(),
            &sets,
            &[1.0; 10],
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GnatError::InvalidConfig(_)));
    }
}
