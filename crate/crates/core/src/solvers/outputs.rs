use serde::{Deserialize, Serialize};

use super::ReducedTrajectory;
use crate::error::{check_len, Result};
use crate::linalg;
use crate::sampling::{OnlineOperators, SampleSets};

/// Reconstructed state entries at `𝒦`, one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSeries {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Rows `𝒦` of `w⁰ + Φ_w·w_rⁿ` for every step, at `O(|𝒦|·n_w)` per step.
pub fn compute_outputs(
    trajectory: &ReducedTrajectory,
    operators: &OnlineOperators,
    sets: &SampleSets,
) -> Result<OutputSeries> {
    let basis = operators.output_basis.as_ref();
    check_len(
        "output basis rows",
        sets.output_indices.len(),
        basis.nrows(),
    )?;
    check_len(
        "output initial condition",
        sets.output_indices.len(),
        operators.output_initial_condition.len(),
    )?;
    let values = trajectory
        .coords
        .iter()
        .map(|y| {
            check_len("reduced coordinates", basis.ncols(), y.len())?;
            let mut v = linalg::matvec(basis, y);
            linalg::axpy(1.0, &operators.output_initial_condition, &mut v);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutputSeries {
        indices: sets.output_indices.clone(),
        times: trajectory.times.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Burgers, FullOrderModel, Grid1D, ParameterPoint, TimeDiscretization};
    use crate::sampling::{compute_online_operators, OutputSpec};
    use crate::solvers::OnlineCost;
    use faer::Mat;

    fn setup(
        spec: OutputSpec,
        phi: &Mat<f64>,
    ) -> (ReducedTrajectory, OnlineOperators, SampleSets, Vec<f64>) {
        let m = Burgers::new(
            Grid1D::new(11, 100.0).unwrap(),
            TimeDiscretization::new(0.1, 3).unwrap(),
        );
        let sets = SampleSets::new(&m, &(0..10).collect::<Vec<_>>(), 1, &spec).unwrap();
        let w0: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let ops =
            compute_online_operators(phi.as_ref(), phi.as_ref(), phi.as_ref(), &sets, &w0).unwrap();
        let traj = ReducedTrajectory {
            mu: ParameterPoint::new(1.0, 0.0),
            times: m.time().times(),
            coords: (0..4).map(|n| vec![n as f64; phi.ncols()]).collect(),
            stats: Vec::new(),
            cost: OnlineCost::default(),
            iterates: None,
        };
        (traj, ops, sets, w0)
    }

    #[test]
    fn zero_coordinates_give_initial_condition() {
        let phi = Mat::<f64>::identity(10, 2);
        let (mut traj, ops, sets, w0) = setup(OutputSpec::Global, &phi);
        traj.coords.iter_mut().for_each(|c| c.fill(0.0));
        let out = compute_outputs(&traj, &ops, &sets).unwrap();
        assert!(out.values.iter().all(|v| v == &w0));
    }

    #[test]
    fn global_output_matches_full_reconstruction() {
        let phi = Mat::from_fn(10, 3, |i, j| ((i + 1) as f64 / 10.0).powi(j as i32));
        let (traj, ops, sets, w0) = setup(OutputSpec::Global, &phi);
        let out = compute_outputs(&traj, &ops, &sets).unwrap();
        let full = traj.reconstruct(&w0, phi.as_ref());
        assert_eq!(out.values, full);
    }

    #[test]
    fn probe_on_canonical_basis() {
        let mut phi = Mat::<f64>::zeros(10, 1);
        phi[(4, 0)] = 1.0;
        let (traj, ops, sets, w0) = setup(OutputSpec::Probes(vec![4]), &phi);
        let out = compute_outputs(&traj, &ops, &sets).unwrap();
        for (n, v) in out.values.iter().enumerate() {
            assert_eq!(v, &vec![w0[4] + n as f64]);
        }
    }

    #[test]
    fn missing_rows_are_reported() {
        let phi = Mat::<f64>::identity(10, 2);
        let (traj, mut ops, sets, _) = setup(OutputSpec::Global, &phi);
        ops.output_basis = Mat::zeros(3, 2);
        assert!(compute_outputs(&traj, &ops, &sets).is_err());
    }
}
