//! Cyclic Jacobi eigensolver for small dense Hermitian matrices.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::policy::NumericPolicy;

const MAX_SWEEPS: usize = 64;

/// Eigen-pairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMat,
}

impl EigenDecomposition {
    /// `U · diag(λ) · U†`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.values.len();
        let scaled = CMat::from_fn(n, n, |i, k| self.vectors[(i, k)] * self.values[k]);
        scaled * self.vectors.adjoint()
    }
}

/// Diagonalizes a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The result is deterministic for identical input.
pub fn hermitian_eig(m: &CMat) -> Result<EigenDecomposition> {
    hermitian_eig_with(m, &NumericPolicy::default())
}

pub fn hermitian_eig_with(m: &CMat, policy: &NumericPolicy) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if !linalg::is_finite(m) {
        return Err(Error::NonFinite("eigensolver input".into()));
    }
    let scale = linalg::frobenius(m);
    let deviation = linalg::hermitian_deviation(m);
    if deviation > policy.eig_hermitian_tol * scale {
        return Err(Error::NotHermitian { deviation });
    }

    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v = linalg::identity(n);
    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= 0.5 * f64::EPSILON * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                acc += a[(p, q)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Annihilates `a[p,q]` with the unitary `J = diag(1, e^{−iφ})·R(θ)` acting on
/// rows/columns `p, q`, where `a[p,q] = |a[p,q]|·e^{iφ}`.
fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = linalg::ZERO;
        a[(q, p)] = linalg::ZERO;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let cr = C64::new(c, 0.0);
    let sr = C64::new(s, 0.0);
    let back = phase.conj();

    let n = a.nrows();
    for k in 0..n {
        let x = a[(k, p)];
        let y = a[(k, q)];
        a[(k, p)] = cr * x - sr * back * y;
        a[(k, q)] = sr * x + cr * back * y;
    }
    for k in 0..n {
        let x = a[(p, k)];
        let y = a[(q, k)];
        a[(p, k)] = cr * x - sr * phase * y;
        a[(q, k)] = sr * x + cr * phase * y;
    }
    a[(p, q)] = linalg::ZERO;
    a[(q, p)] = linalg::ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..v.nrows() {
        let x = v[(k, p)];
        let y = v[(k, q)];
        v[(k, p)] = cr * x - sr * back * y;
        v[(k, q)] = sr * x + cr * back * y;
    }
}
