use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, GnatError, Result};
use crate::linalg;
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// `n_s`, including the seeds.
    pub target_nodes: usize,
    /// Number of leading columns of Φ_R and Φ_J used, `n_c`.
    pub working_columns: usize,
    #[serde(default)]
    pub seed_nodes: Vec<usize>,
    #[serde(default = "one")]
    pub unknowns_per_node: usize,
}

fn one() -> usize {
    1
}

/// One pass of the outer greedy loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub iteration: usize,
    pub working_vectors: usize,
    pub nodes_added: Vec<usize>,
    /// Score of each added node when it was chosen.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySelection {
    /// Seeds first, then nodes in the order they were picked.
    pub nodes: Vec<usize>,
    pub trace: Vec<GreedyIteration>,
    pub warnings: Vec<String>,
}

impl GreedySelection {
    pub fn sorted_nodes(&self) -> Vec<usize> {
        let mut n = self.nodes.clone();
        n.sort_unstable();
        n
    }
}

/// Greedy sample-node selection.
///
/// Each outer iteration fits the next `n_ci` basis vectors of Φ_R and Φ_J
/// by least squares on the rows sampled so far, and then adds the
/// `n_ai` unsampled nodes with the largest summed squared fitting error.
/// Iteration and node counts follow the ceil/floor/mod schedule of the
/// reference listing; ties go to the lowest node index.
pub fn greedy_select(
    phi_r: MatRef<'_, f64>,
    phi_j: MatRef<'_, f64>,
    config: &GreedyConfig,
) -> Result<GreedySelection> {
    let n = phi_r.nrows();
    check_len("Jacobian basis rows", n, phi_j.nrows())?;
    let nu = config.unknowns_per_node;
    if nu == 0 || n % nu != 0 {
        return Err(GnatError::InvalidConfig(format!(
            "{nu} unknowns per node does not divide {n}"
        )));
    }
    let num_nodes = n / nu;
    let ns = config.target_nodes;
    let nc = config.working_columns;
    let mut sampled = vec![false; num_nodes];
    let mut nodes = Vec::with_capacity(ns);
    for &s in &config.seed_nodes {
        if s >= num_nodes {
            return Err(GnatError::IndexOutOfRange {
                index: s,
                dim: num_nodes,
            });
        }
        if !sampled[s] {
            sampled[s] = true;
            nodes.push(s);
        }
    }
    if ns > num_nodes {
        return Err(GnatError::InvalidConfig(format!(
            "{ns} sample nodes requested but the mesh has {num_nodes}"
        )));
    }
    if ns < nodes.len() {
        return Err(GnatError::InvalidConfig(format!(
            "{} seed nodes exceed the target of {ns}",
            nodes.len()
        )));
    }
    if nc == 0 || nc > phi_r.ncols().min(phi_j.ncols()).min(nu * ns) {
        return Err(GnatError::InvalidConfig(format!(
            "working columns {nc} must lie in 1..=min(n_R, n_J, n_u·n_s) = {}",
            phi_r.ncols().min(phi_j.ncols()).min(nu * ns)
        )));
    }

    let na = ns - nodes.len();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    if na == 0 {
        return Ok(GreedySelection {
            nodes,
            trace,
            warnings,
        });
    }
    let n_it = nc.min(na);
    let n_rhs_max = nc.div_ceil(na);
    let nc_min = nc / n_it;
    let na_min = na * n_rhs_max / nc;

    let mut q_tot = 0;
    for it in 1..=n_it {
        let nci = nc_min + usize::from(it <= nc % n_it);
        let nai = na_min + usize::from(n_rhs_max == 1 && it <= na % nc);
        let (r_err, j_err) = if it == 1 {
            (
                phi_r.subcols(0, nci).to_owned(),
                phi_j.subcols(0, nci).to_owned(),
            )
        } else {
            let rows = dofs(&nodes, nu);
            (
                fit_error(phi_r, q_tot, nci, &rows, "residual", it, &mut warnings)?,
                fit_error(phi_j, q_tot, nci, &rows, "Jacobian", it, &mut warnings)?,
            )
        };
        let score = par::map_range(num_nodes, |l| {
            let mut s = 0.0;
            for q in 0..nci {
                let (rc, jc) = (r_err.col_as_slice(q), j_err.col_as_slice(q));
                for i in l * nu..(l + 1) * nu {
                    s += rc[i] * rc[i] + jc[i] * jc[i];
                }
            }
            s
        });
        let mut added = Vec::with_capacity(nai);
        let mut scores = Vec::with_capacity(nai);
        for _ in 0..nai {
            let best = (0..num_nodes)
                .filter(|&l| !sampled[l])
                .fold(None, |acc: Option<usize>, l| match acc {
                    Some(b) if score[b] >= score[l] => Some(b),
                    _ => Some(l),
                })
                .ok_or_else(|| GnatError::InvalidConfig("no unsampled node left".into()))?;
            sampled[best] = true;
            nodes.push(best);
            added.push(best);
            scores.push(score[best]);
        }
        trace.push(GreedyIteration {
            iteration: it,
            working_vectors: nci,
            nodes_added: added,
            scores,
        });
        q_tot += nci;
    }
    if nodes.len() != ns {
        warnings.push(format!(
            "node schedule added {} nodes for a target of {ns}",
            nodes.len()
        ));
    }
    Ok(GreedySelection {
        nodes,
        trace,
        warnings,
    })
}

fn dofs(nodes: &[usize], nu: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = nodes.iter().flat_map(|&l| l * nu..(l + 1) * nu).collect();
    rows.sort_unstable();
    rows
}

/// `φ^{Q+q} − Φ[:, :Q]·α_q` with `α_q` the least-squares fit on `rows`,
/// for `q = 1..=count`.
fn fit_error(
    phi: MatRef<'_, f64>,
    q_tot: usize,
    count: usize,
    rows: &[usize],
    label: &str,
    it: usize,
    warnings: &mut Vec<String>,
) -> Result<Mat<f64>> {
    let fitted = phi.subcols(0, q_tot);
    let restricted = linalg::gather_rows(fitted, rows);
    let (pinv, rank) = linalg::pinv_min_norm(restricted.as_ref())?;
    if rank < q_tot {
        warnings.push(format!(
            "iteration {it}: restricted {label} basis has rank {rank} < {q_tot}; minimum-norm fit"
        ));
    }
    let targets = linalg::gather_rows(phi.subcols(q_tot, count), rows);
    let alpha = &pinv * &targets;
    Ok(phi.subcols(q_tot, count).to_owned() - fitted * &alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(ns: usize, nc: usize, seeds: Vec<usize>) -> GreedyConfig {
        GreedyConfig {
            target_nodes: ns,
            working_columns: nc,
            seed_nodes: seeds,
            unknowns_per_node: 1,
        }
    }

    #[test]
    fn single_canonical_vector() {
        let mut e = Mat::<f64>::zeros(8, 1);
        e[(3, 0)] = 1.0;
        let sel = greedy_select(e.as_ref(), e.as_ref(), &config(1, 1, vec![])).unwrap();
        assert_eq!(sel.nodes, vec![3]);
    }

    #[test]
    fn benchmark_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = Mat::from_fn(400, 80, |_, _| rng.gen_range(-1.0..1.0));
        let sel = greedy_select(phi.as_ref(), phi.as_ref(), &config(160, 70, vec![0])).unwrap();
        assert_eq!(sel.trace.len(), 70);
        assert_eq!(sel.nodes.len(), 160);
        assert_eq!(sel.nodes[0], 0);
        assert!(sel.trace.iter().all(|t| t.working_vectors == 1));
        let three = sel
            .trace
            .iter()
            .filter(|t| t.nodes_added.len() == 3)
            .count();
        assert_eq!(three, 19);
        assert!(sel.warnings.is_empty());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let phi = Mat::from_fn(6, 1, |_, _| 1.0);
        let sel = greedy_select(phi.as_ref(), phi.as_ref(), &config(2, 1, vec![])).unwrap();
        assert_eq!(sel.nodes, vec![0, 1]);
    }

    #[test]
    fn seeds_survive_and_are_not_repeated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = Mat::from_fn(20, 4, |_, _| rng.gen_range(-1.0..1.0));
        let sel = greedy_select(phi.as_ref(), phi.as_ref(), &config(6, 4, vec![7, 2])).unwrap();
        assert_eq!(&sel.nodes[..2], &[7, 2]);
        let mut s = sel.sorted_nodes();
        s.dedup();
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = Mat::from_fn(30, 5, |_, _| rng.gen_range(-1.0..1.0));
        let j = Mat::from_fn(30, 6, |_, _| rng.gen_range(-1.0..1.0));
        let a = greedy_select(r.as_ref(), j.as_ref(), &config(8, 5, vec![])).unwrap();
        let b = greedy_select(r.as_ref(), j.as_ref(), &config(8, 5, vec![])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multiple_unknowns_per_node_sum_their_rows() {
        // node 1 owns rows 2,3; each holds 0.8 → beats the single 1.0 at row 0
        let mut phi = Mat::<f64>::zeros(6, 1);
        phi[(0, 0)] = 1.0;
        phi[(2, 0)] = 0.8;
        phi[(3, 0)] = 0.8;
        let cfg = GreedyConfig {
            unknowns_per_node: 2,
            ..config(1, 1, vec![])
        };
        let sel = greedy_select(phi.as_ref(), phi.as_ref(), &cfg).unwrap();
        assert_eq!(sel.nodes, vec![1]);
    }

    #[test]
    fn infeasible_configs() {
        let phi = Mat::<f64>::identity(5, 3);
        assert!(greedy_select(phi.as_ref(), phi.as_ref(), &config(6, 1, vec![])).is_err());
        assert!(greedy_select(phi.as_ref(), phi.as_ref(), &config(2, 3, vec![])).is_err());
        assert!(greedy_select(phi.as_ref(), phi.as_ref(), &config(2, 0, vec![])).is_err());
        assert!(greedy_select(phi.as_ref(), phi.as_ref(), &config(2, 1, vec![9])).is_err());
    }
}
