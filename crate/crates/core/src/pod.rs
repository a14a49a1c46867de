//! Proper orthogonal decomposition of snapshot matrices.

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{GnatError, Result};
use crate::snapshots::{Provenance, SnapshotKind, SnapshotMatrix};

/// Default energy fraction for [`Truncation::Energy`].
pub const DEFAULT_ENERGY: f64 = 0.9999;

/// The Gram-matrix route is used only up to this many snapshots.
const GRAM_MAX_SNAPSHOTS: usize = 2000;
/// ... and only when `σ_min/σ_max` exceeds this.
const GRAM_MIN_CONDITION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Truncation {
    /// Smallest basis whose retained energy `Σσᵢ²/Σσ²` reaches the fraction.
    Energy(f64),
    /// Exactly this many vectors (clamped to the numerical rank).
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// Orthonormal columns.
    pub basis: Mat<f64>,
    /// All singular values of the snapshot matrix, non-increasing; one per
    /// snapshot.
    pub singular_values: Vec<f64>,
    pub energy_fraction: f64,
    pub warnings: Vec<String>,
}

impl PodBasis {
    pub fn size(&self) -> usize {
        self.basis.ncols()
    }

    /// Sum of the squared singular values left out of the basis.
    pub fn neglected_energy(&self) -> f64 {
        self.singular_values[self.size()..]
            .iter()
            .map(|s| s * s)
            .sum()
    }

    pub fn to_snapshot(&self) -> SnapshotMatrix {
        let provenance = (0..self.size())
            .map(|mode| Provenance::Mode { mode })
            .collect();
        let mut m = SnapshotMatrix::new(SnapshotKind::Basis, self.basis.clone(), provenance)
            .expect("one record per mode");
        m.extras.insert(
            "singular_values".into(),
            serde_json::json!(self.singular_values),
        );
        m.extras.insert(
            "energy_fraction".into(),
            serde_json::json!(self.energy_fraction),
        );
        m
    }

    pub fn from_snapshot(m: &SnapshotMatrix) -> Result<Self> {
        if m.kind != SnapshotKind::Basis {
            return Err(GnatError::InvalidConfig(format!(
                "expected a basis file, found {:?}",
                m.kind
            )));
        }
        let field = |k: &str| {
            m.extras
                .get(k)
                .cloned()
                .ok_or_else(|| GnatError::InvalidConfig(format!("basis file lacks {k}")))
        };
        let singular_values: Vec<f64> = serde_json::from_value(field("singular_values")?)
            .map_err(|e| GnatError::InvalidConfig(e.to_string()))?;
        let energy_fraction: f64 = serde_json::from_value(field("energy_fraction")?)
            .map_err(|e| GnatError::InvalidConfig(e.to_string()))?;
        Ok(PodBasis {
            basis: m.columns.clone(),
            singular_values,
            energy_fraction,
            warnings: Vec::new(),
        })
    }
}

/// Truncated left singular vectors of `w`, with the sign of each column
/// fixed so that its largest-magnitude entry is positive.
pub fn compute_pod(w: MatRef<'_, f64>, truncation: Truncation) -> Result<PodBasis> {
    let (m, n) = (w.nrows(), w.ncols());
    if m == 0 || n == 0 || w.norm_max() == 0.0 {
        return Err(GnatError::ZeroMatrix);
    }
    if let Truncation::Energy(f) = truncation {
        if !(f > 0.0 && f <= 1.0) {
            return Err(GnatError::InvalidConfig(format!(
                "energy fraction must lie in (0, 1], got {f}"
            )));
        }
    }
    if let Truncation::Fixed(0) = truncation {
        return Err(GnatError::InvalidConfig(
            "basis size must be positive".into(),
        ));
    }

    let (u, mut sigma) = match gram_route(w) {
        Some(found) => found,
        None => {
            let svd = w
                .thin_svd()
                .map_err(|e| GnatError::Linalg(format!("svd: {e:?}")))?;
            let s = svd.S().column_vector();
            let sigma: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
            (svd.U().to_owned(), sigma)
        }
    };
    sigma.resize(n, 0.0);

    let tol = sigma[0] * (m.max(n) as f64) * f64::EPSILON;
    let rank = sigma.iter().take_while(|&&s| s > tol).count().max(1);
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let mut warnings = Vec::new();
    let size = match truncation {
        Truncation::Fixed(k) if k > rank => {
            warnings.push(format!(
                "requested {k} basis vectors but the numerical rank is {rank}; clamped"
            ));
            rank
        }
        Truncation::Fixed(k) => k,
        Truncation::Energy(f) => {
            let mut acc = 0.0;
            let mut k = 0;
            while k < rank {
                acc += sigma[k] * sigma[k];
                k += 1;
                if acc >= f * total {
                    break;
                }
            }
            k
        }
    };
    let retained: f64 = sigma[..size].iter().map(|s| s * s).sum();
    let mut basis = u.subcols(0, size).to_owned();
    for j in 0..size {
        let col = basis.col_as_slice_mut(j);
        let lead = col.iter().copied().fold(
            0.0f64,
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
        if lead < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(PodBasis {
        basis,
        singular_values: sigma,
        energy_fraction: retained / total,
        warnings,
    })
}

/// Left singular vectors from the eigenpairs of `WᵀW`, when the snapshot
/// count and conditioning allow it.
fn gram_route(w: MatRef<'_, f64>) -> Option<(Mat<f64>, Vec<f64>)> {
    let n = w.ncols();
    if n > GRAM_MAX_SNAPSHOTS || n > w.nrows() {
        return None;
    }
    let gram = w.transpose() * w;
    let eig = gram.self_adjoint_eigen(Side::Lower).ok()?;
    let lambda = eig.S().column_vector();
    // eigenvalues come in non-decreasing order
    let order: Vec<usize> = (0..n).rev().collect();
    let sigma: Vec<f64> = order.iter().map(|&i| lambda[i].max(0.0).sqrt()).collect();
    if !(sigma[n - 1] > GRAM_MIN_CONDITION * sigma[0]) {
        return None;
    }
    let v = eig.U();
    let vs = Mat::from_fn(n, n, |i, k| v[(i, order[k])] / sigma[k]);
    Some((w * &vs, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn projection_error(w: &Mat<f64>, phi: &Mat<f64>) -> f64 {
        let r = w - phi * (phi.transpose() * w);
        r.norm_l2().powi(2)
    }

    #[test]
    fn single_column() {
        let w = Mat::from_fn(3, 1, |i, _| [3.0, 0.0, -4.0][i]);
        let p = compute_pod(w.as_ref(), Truncation::Fixed(1)).unwrap();
        assert!((p.singular_values[0] - 5.0).abs() < 1e-14);
        let b = p.basis.col_as_slice(0);
        // sign: largest-magnitude entry positive
        assert!((b[0] + 0.6).abs() < 1e-14 && (b[2] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_columns() {
        let w = Mat::from_fn(3, 2, |i, j| [[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]][i][j]);
        let p = compute_pod(w.as_ref(), Truncation::Fixed(2)).unwrap();
        assert!((p.singular_values[0] - 2.0).abs() < 1e-14);
        assert!((p.singular_values[1] - 1.0).abs() < 1e-14);
        assert!((p.basis[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_rank_reconstruction() {
        let w = random(50, 20, 1);
        let p = compute_pod(w.as_ref(), Truncation::Fixed(20)).unwrap();
        assert!(projection_error(&w, &p.basis).sqrt() <= 1e-10);
        let gram = p.basis.transpose() * &p.basis;
        assert!((gram - Mat::<f64>::identity(20, 20)).norm_max() < 1e-10);
    }

    #[test]
    fn optimality_and_monotonicity() {
        // both SVD routes: well-conditioned (Gram) and rank-deficient (full)
        let lowrank = &random(40, 3, 5) * &random(3, 12, 6);
        for w in [random(40, 12, 2), lowrank] {
            let mut last = f64::INFINITY;
            for k in 1..=3 {
                let p = compute_pod(w.as_ref(), Truncation::Fixed(k)).unwrap();
                let err = projection_error(&w, &p.basis);
                let tail = p.neglected_energy();
                assert!(
                    (err - tail).abs() <= 1e-8 * tail.max(1e-12),
                    "k={k}: {err} vs {tail}"
                );
                assert!(err <= last);
                last = err;
                assert!(p.singular_values.windows(2).all(|s| s[0] >= s[1]));
                assert_eq!(p.singular_values.len(), 12);
            }
        }
    }

    #[test]
    fn energy_criterion_is_minimal() {
        let w = Mat::from_fn(
            4,
            4,
            |i, j| if i == j { [4.0, 2.0, 1.0, 0.5][i] } else { 0.0 },
        );
        let total = 16.0 + 4.0 + 1.0 + 0.25;
        let p = compute_pod(w.as_ref(), Truncation::Energy(20.0 / total)).unwrap();
        assert_eq!(p.size(), 2);
        let p = compute_pod(w.as_ref(), Truncation::Energy(20.01 / total)).unwrap();
        assert_eq!(p.size(), 3);
        assert!((p.energy_fraction - 21.0 / total).abs() < 1e-14);
    }

    #[test]
    fn oversized_request_is_clamped() {
        let w = &random(30, 2, 3) * &random(2, 8, 4);
        let p = compute_pod(w.as_ref(), Truncation::Fixed(6)).unwrap();
        assert_eq!(p.size(), 2);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn errors() {
        let z = Mat::<f64>::zeros(5, 3);
        assert!(matches!(
            compute_pod(z.as_ref(), Truncation::Fixed(1)),
            Err(GnatError::ZeroMatrix)
        ));
        let w = random(5, 3, 1);
        assert!(compute_pod(w.as_ref(), Truncation::Energy(0.0)).is_err());
        assert!(compute_pod(w.as_ref(), Truncation::Energy(1.5)).is_err());
    }

    #[test]
    fn deterministic_bytes() {
        let w = random(60, 25, 9);
        let a = compute_pod(w.as_ref(), Truncation::Energy(DEFAULT_ENERGY)).unwrap();
        let b = compute_pod(w.as_ref(), Truncation::Energy(DEFAULT_ENERGY)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn basis_file_round_trip() {
        let w = random(10, 4, 2);
        let p = compute_pod(w.as_ref(), Truncation::Fixed(3)).unwrap();
        let back = PodBasis::from_snapshot(&p.to_snapshot()).unwrap();
        assert_eq!(back, p);
    }
}
