//! Small dense and banded kernels shared by the solvers.

use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, MatRef};

use crate::error::{check_len, GnatError, Result};

/// Relative rank tolerance for pivoted-QR pseudo-inverses.
pub const PINV_RANK_TOL: f64 = 1e-12;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Column `j` of a column-major matrix as a slice.
pub fn col(m: &Mat<f64>, j: usize) -> &[f64] {
    m.col_as_slice(j)
}

pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(nrows, columns.len(), |i, j| columns[j][i])
}

/// `m * x` for a dense matrix and a plain vector.
pub fn matvec(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let c = m.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += c[i] * xj;
        }
    }
    y
}

/// `mᵀ * x`.
pub fn matvec_t(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| {
            let c = m.col(j);
            (0..m.nrows()).map(|i| c[i] * x[i]).sum()
        })
        .collect()
}

/// Rows `rows` of `m`, in the given order.
pub fn gather_rows(m: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Solution of `min ‖a x − b‖₂` by Householder QR. Fails when `a` is
/// numerically rank deficient.
pub fn lstsq(a: MatRef<'_, f64>, b: &[f64], what: &'static str) -> Result<Vec<f64>> {
    check_len("least-squares right-hand side", a.nrows(), b.len())?;
    if a.ncols() > a.nrows() {
        return Err(GnatError::RankDeficient {
            what,
            rank: a.nrows(),
            required: a.ncols(),
        });
    }
    let qr = a.qr();
    let r = qr.thin_R();
    let rank = numerical_rank_from_r(r);
    if rank < a.ncols() {
        return Err(GnatError::RankDeficient {
            what,
            rank,
            required: a.ncols(),
        });
    }
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = qr.solve_lstsq(&rhs);
    Ok((0..a.ncols()).map(|i| x[(i, 0)]).collect())
}

fn numerical_rank_from_r(r: MatRef<'_, f64>) -> usize {
    let n = r.nrows().min(r.ncols());
    let rmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if rmax == 0.0 {
        return 0;
    }
    (0..n)
        .filter(|&i| r[(i, i)].abs() > PINV_RANK_TOL * rmax)
        .count()
}

/// Moore–Penrose pseudo-inverse of a full-column-rank matrix via QR with
/// column pivoting. Rank is decided with tolerance `1e-12·|r₁₁|`.
pub fn pinv_full_rank(a: MatRef<'_, f64>, what: &'static str) -> Result<Mat<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > m {
        return Err(GnatError::RankDeficient {
            what,
            rank: m,
            required: n,
        });
    }
    let qr = a.col_piv_qr();
    let rank = numerical_rank_from_r(qr.thin_R());
    if rank < n {
        return Err(GnatError::RankDeficient {
            what,
            rank,
            required: n,
        });
    }
    let eye = Mat::<f64>::identity(m, m);
    Ok(qr.solve_lstsq(&eye))
}

/// Minimum-norm pseudo-inverse via SVD, with the numerical rank it used.
pub fn pinv_min_norm(a: MatRef<'_, f64>) -> Result<(Mat<f64>, usize)> {
    let rel_tol = (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    pinv_truncated(a, rel_tol)
}

/// Pseudo-inverse that drops singular values at or below `rel_tol·σ_max`.
pub fn pinv_truncated(a: MatRef<'_, f64>, rel_tol: f64) -> Result<(Mat<f64>, usize)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok((Mat::zeros(n, m), 0));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| GnatError::Linalg(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let smax = if k > 0 { s[0] } else { 0.0 };
    let tol = smax * rel_tol;
    let rank = (0..k).filter(|&i| s[i] > tol).count();
    let u = svd.U();
    let v = svd.V();
    let out = Mat::from_fn(n, m, |i, j| {
        (0..rank).map(|l| v[(i, l)] * u[(j, l)] / s[l]).sum()
    });
    Ok((out, rank))
}

/// Smallest singular value of a tall matrix.
pub fn sigma_min(a: MatRef<'_, f64>) -> Result<f64> {
    let s = a
        .singular_values()
        .map_err(|e| GnatError::Linalg(format!("svd: {e:?}")))?;
    Ok(s.last().copied().unwrap_or(0.0))
}

/// Tridiagonal matrix with `sub[i] = A[i+1,i]`, `diag[i] = A[i,i]`,
/// `sup[i] = A[i,i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn identity(n: usize) -> Self {
        Tridiagonal {
            sub: vec![0.0; n.saturating_sub(1)],
            diag: vec![1.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.sub[j]
        } else if j == i + 1 {
            self.sup[i]
        } else {
            0.0
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// `self * phi` for a dense `n × k` matrix.
    pub fn mul_dense(&self, phi: MatRef<'_, f64>) -> Mat<f64> {
        let n = self.dim();
        let mut out = Mat::<f64>::zeros(n, phi.ncols());
        for j in 0..phi.ncols() {
            let src = phi.col(j);
            let dst = out.col_as_slice_mut(j);
            for (i, d) in dst.iter_mut().enumerate() {
                let mut v = self.diag[i] * src[i];
                if i > 0 {
                    v += self.sub[i - 1] * src[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * src[i + 1];
                }
                *d = v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Solves `self * x = rhs` by Gaussian elimination with partial pivoting
    /// (the banded scheme of LAPACK `gtsv`). Returns `None` on an exactly
    /// singular pivot.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut dl = self.sub.clone();
        let mut d = self.diag.clone();
        let mut du = self.sup.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if dl[i].abs() <= d[i].abs() {
                // no interchange
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                let tb = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tb - fact * b[i + 1];
            }
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
        if b.iter().all(|v| v.is_finite()) {
            Some(b)
        } else {
            None
        }
    }
}
