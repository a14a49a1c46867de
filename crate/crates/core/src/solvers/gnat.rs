use std::time::Instant;

use faer::{Mat, MatRef};

use super::{line_search, PartialRun, ReducedTrajectory, SolverConfig, StepStats};
use crate::error::{check_len, GnatError, Result};
use crate::linalg;
use crate::model::{FullOrderModel, MaskPlan, MaskedCost, MaskedState, ParameterPoint};
use crate::sampling::{OnlineOperators, SampleSets};

/// GNAT search direction `argmin ‖A·C·υ + B·D‖₂` from the sampled Jacobian
/// action `C = Z·J·Φ_w` and sampled residual `D = Z·R`.
pub fn gnat_direction(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    sampled_jacobian_basis: MatRef<'_, f64>,
    sampled_residual: &[f64],
) -> Result<Vec<f64>> {
    let (ac, bd) = reduced_system(a, b, sampled_jacobian_basis, sampled_residual)?;
    let neg: Vec<f64> = bd.iter().map(|v| -v).collect();
    linalg::lstsq(ac.as_ref(), &neg, "GNAT matrix A·C")
}

fn reduced_system(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    c: MatRef<'_, f64>,
    d: &[f64],
) -> Result<(Mat<f64>, Vec<f64>)> {
    check_len("sampled Jacobian rows", a.ncols(), c.nrows())?;
    check_len("sampled residual rows", b.ncols(), d.len())?;
    Ok((a * c, linalg::matvec(b, d)))
}

/// Tier III: GNAT online solve. Every iteration evaluates exactly the
/// `n_i` sampled residual rows and reads the `|𝒥|` masked state entries.
///
/// A step stops when `‖B·D⁽ᵏ⁾‖₂ ≤ max(gnat_rel_tol·‖B·D⁽⁰⁾‖₂, gnat_abs_tol)`,
/// when the reduced gradient `‖(AC)ᵀBD‖₂` drops below `gn_gradient_tol`,
/// after an update with `‖αυ‖₂ ≤ gn_step_tol·max(1, ‖y‖₂)`, or after
/// `gn_max_iters` updates.
pub fn solve_gnat_online<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    operators: &OnlineOperators,
    sets: &SampleSets,
    config: &SolverConfig,
) -> Result<ReducedTrajectory> {
    solve_gnat_online_partial(mu, model, operators, sets, config)?.into_result()
}

/// [`solve_gnat_online`] keeping the steps completed before a failure.
/// Setup errors are still returned as `Err`.
pub fn solve_gnat_online_partial<M: FullOrderModel>(
    mu: &ParameterPoint,
    model: &M,
    operators: &OnlineOperators,
    sets: &SampleSets,
    config: &SolverConfig,
) -> Result<PartialRun> {
    config.validate()?;
    let plan = MaskPlan::new(model, &sets.residual_indices)?;
    if plan.closure != sets.state_indices {
        return Err(GnatError::InvalidConfig(
            "sample sets do not match the model's stencil closure".into(),
        ));
    }
    let basis = operators.masked_state_basis.as_ref();
    check_len("masked basis rows", plan.closure_len(), basis.nrows())?;
    check_len(
        "masked initial condition",
        plan.closure_len(),
        operators.masked_initial_condition.len(),
    )?;
    check_len("operator A columns", plan.num_rows(), operators.a.ncols())?;
    check_len("operator B rows", operators.a.nrows(), operators.b.nrows())?;
    let time = *model.time();
    let nw = basis.ncols();
    let masked = |y: &[f64]| {
        let mut v = linalg::matvec(basis, y);
        linalg::axpy(1.0, &operators.masked_initial_condition, &mut v);
        MaskedState {
            indices: plan.closure.clone(),
            values: v,
        }
    };

    let mut out = ReducedTrajectory::start(mu, nw, config.record_iterates);
    let failure = (|| -> Result<()> {
        for step in 1..=time.num_steps {
            let started = Instant::now();
            let t_next = time.time(step);
            let prev = masked(&out.coords[step - 1]);
            let mut y = out.coords[step - 1].clone();
            let mut next = prev.clone();
            let mut step_iterates = vec![y.clone()];
            let mut bd0 = None;
            let mut small_step = false;
            let mut k = 0;
            let bd_norm = loop {
                let mut mc = MaskedCost::default();
                let (d, c) = model.masked_residual_and_jacobian_basis(
                    &plan, &next, &prev, basis, t_next, mu, &mut mc,
                )?;
                out.cost.record(mc.residual_rows, plan.closure_len());
                let (ac, bd) =
                    reduced_system(operators.a.as_ref(), operators.b.as_ref(), c.as_ref(), &d)?;
                let norm = linalg::norm2(&bd);
                if !norm.is_finite() {
                    return Err(GnatError::StepFailure {
                        solver: "GNAT",
                        step,
                        iterations: k,
                        residual: norm,
                    });
                }
                let tol = config
                    .gnat_abs_tol
                    .max(config.gnat_rel_tol * *bd0.get_or_insert(norm));
                let grad = linalg::matvec_t(ac.as_ref(), &bd);
                if small_step
                    || norm <= tol
                    || linalg::norm2(&grad) <= config.gn_gradient_tol
                    || k == config.gn_max_iters
                {
                    break norm;
                }
                let neg: Vec<f64> = bd.iter().map(|v| -v).collect();
                let s = linalg::lstsq(ac.as_ref(), &neg, "GNAT matrix A·C").map_err(|_| {
                    GnatError::Singular {
                        what: "GNAT matrix A·C",
                        step,
                        iteration: k,
                        dump: y.clone(),
                    }
                })?;
                let f0 = 0.5 * norm * norm;
                let slope = linalg::dot(&grad, &s);
                let alpha = line_search(config.step_policy, f0, slope, |alpha| {
                    let mut trial = y.clone();
                    linalg::axpy(alpha, &s, &mut trial);
                    let mut mc = MaskedCost::default();
                    let d = model.masked_residual(
                        &plan,
                        &masked(&trial),
                        &prev,
                        t_next,
                        mu,
                        &mut mc,
                    )?;
                    let bd = linalg::matvec(operators.b.as_ref(), &d);
                    Ok(0.5 * linalg::dot(&bd, &bd))
                })?;
                linalg::axpy(alpha, &s, &mut y);
                next = masked(&y);
                step_iterates.push(y.clone());
                small_step =
                    alpha * linalg::norm2(&s) <= config.gn_step_tol * linalg::norm2(&y).max(1.0);
                k += 1;
            };
            let stats = StepStats {
                iterations: k,
                residual_norm: bd_norm,
                wall_ns: started.elapsed().as_nanos() as u64,
            };
            out.push_step(t_next, y, stats, step_iterates);
        }
        Ok(())
    })()
    .err();
    Ok(PartialRun {
        trajectory: out,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Burgers, Grid1D, TimeDiscretization};
    use crate::sampling::{compute_online_operators, OutputSpec};
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

    #[test]
    fn complete_sampling_matches_tier_two() {
        let m = model(16, 0.5, 4);
        let mu = ParameterPoint::new(2.0, 0.04);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi_w = orthonormal(16, 4, &mut rng);
        let full = Mat::<f64>::identity(16, 16);
        let sets = SampleSets::complete(&m).unwrap();
        let w0 = m.initial_condition(&mu);
        let ops =
            compute_online_operators(phi_w.as_ref(), full.as_ref(), full.as_ref(), &sets, &w0)
                .unwrap();
        let cfg = SolverConfig {
            record_iterates: true,
            ..SolverConfig::default()
        };
        let g = solve_gnat_online(&mu, &m, &ops, &sets, &cfg).unwrap();
        let t = solve_tier2_pg(&mu, &m, phi_w.as_ref(), &w0, &cfg).unwrap();
        let (gi, ti) = (g.iterates.unwrap(), t.iterates.unwrap());
        for (gs, ts) in gi.iter().zip(&ti) {
            for (a, b) in gs.iter().zip(ts) {
                assert!(linalg::norm2(&linalg::sub(a, b)) <= 1e-10);
            }
        }
        for (a, b) in g.coords.iter().zip(&t.coords) {
            assert!(linalg::norm2(&linalg::sub(a, b)) <= 1e-6);
        }
    }

    #[test]
    fn direction_equals_dense_gappy_gauss_newton() {
        // Φ_R = Φ_J orthonormal: the GNAT step is the Gauss–Newton step for
        // min ‖Φ_R (ZΦ_R)⁺ Z R‖, computed here densely
        let n = 24;
        let m = model(n, 0.5, 1);
        let mu = ParameterPoint::new(2.5, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi_w = orthonormal(n, 3, &mut rng);
        let phi_r = orthonormal(n, 6, &mut rng);
        let nodes = [0, 3, 5, 8, 11, 14, 17, 20, 23];
        let sets = SampleSets::new(&m, &nodes, 1, &OutputSpec::Global).unwrap();
        let w0 = m.initial_condition(&mu);
        let ops =
            compute_online_operators(phi_w.as_ref(), phi_r.as_ref(), phi_r.as_ref(), &sets, &w0)
                .unwrap();
        let y = [0.3, -0.2, 0.1];
        let mut w = linalg::matvec(phi_w.as_ref(), &y);
        linalg::axpy(1.0, &w0, &mut w);
        let r = m.residual(&w, &w0, 0.5, &mu).unwrap();
        let jphi = m
            .residual_jacobian(&w, &w0, 0.5, &mu)
            .unwrap()
            .mul_dense(phi_w.as_ref());
        let zr: Vec<f64> = sets.residual_indices.iter().map(|&i| r[i]).collect();
        let zj = linalg::gather_rows(jphi.as_ref(), &sets.residual_indices);
        let s = gnat_direction(ops.a.as_ref(), ops.b.as_ref(), zj.as_ref(), &zr).unwrap();

        let zphi = linalg::gather_rows(phi_r.as_ref(), &sets.residual_indices);
        let (pinv, _) = linalg::pinv_min_norm(zphi.as_ref()).unwrap();
        let proj = &phi_r * &pinv;
        let rt = linalg::matvec(proj.as_ref(), &zr);
        let jt = &proj * &zj;
        let dense = pg_direction(jt.as_ref(), &rt).unwrap();
        assert!(linalg::norm2(&linalg::sub(&s, &dense)) <= 1e-10 * linalg::norm2(&dense));
    }

    #[test]
    fn masked_cost_is_bounded_per_iteration() {
        let n = 60;
        let m = model(n, 0.5, 5);
        let mu = ParameterPoint::new(3.0, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi_w = orthonormal(n, 3, &mut rng);
        let phi_r = orthonormal(n, 5, &mut rng);
        let nodes = [0, 9, 20, 31, 42, 50, 59];
        let sets = SampleSets::new(&m, &nodes, 1, &OutputSpec::Global).unwrap();
        let w0 = m.initial_condition(&mu);
        let ops =
            compute_online_operators(phi_w.as_ref(), phi_r.as_ref(), phi_r.as_ref(), &sets, &w0)
                .unwrap();
        let g = solve_gnat_online(&mu, &m, &ops, &sets, &SolverConfig::default()).unwrap();
        assert_eq!(g.cost.max_residual_rows_per_iteration, 7);
        assert_eq!(
            g.cost.max_state_entries_per_iteration,
            sets.state_indices.len()
        );
        assert_eq!(g.cost.total_residual_rows, 7 * g.cost.total_iterations);
    }

    #[test]
    fn mismatched_operators_are_rejected() {
        let m = model(10, 0.5, 1);
        let mu = ParameterPoint::new(2.0, 0.0);
        let phi = Mat::<f64>::identity(10, 2);
        let sets = SampleSets::new(&m, &[0, 1, 2], 1, &OutputSpec::Global).unwrap();
        let ops =
            compute_online_operators(phi.as_ref(), phi.as_ref(), phi.as_ref(), &sets, &[1.0; 10])
                .unwrap();
        let other = SampleSets::new(&m, &[0, 4, 8], 1, &OutputSpec::Global).unwrap();
        assert!(solve_gnat_online(&mu, &m, &ops, &other, &SolverConfig::default()).is_err());
    }
}
