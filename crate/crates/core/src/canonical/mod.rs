//! The canonical form: diagonalizing the decoherence matrix.
//!
//! With `d_ij = Σ_k U_ik γ_k U_jk*`, the channel operators
//! `L_k = Σ_{i≥1} U_ik G_i` are traceless and Hilbert–Schmidt orthonormal,
//! and the rates `γ_k` are the (real, possibly negative) eigenvalues of `d`.
//! The rates are unique; the operators are unique up to phase and rotations
//! inside degenerate eigenspaces. Output is made deterministic by rotating
//! each eigenvector's largest component to be real positive and ordering
//! channels by descending rate.

mod eigen;

pub use eigen::{hermitian_eig, hermitian_eig_with, EigenDecomposition};

use nalgebra::DVector;

use crate::basis::{vec, OperatorBasis};
use crate::error::{Error, Result};
use crate::generator::{dissipator_superop, extract_c_with, split_with, TransferMatrix};
use crate::linalg::{self, CMat, C64};
use crate::policy::NumericPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub rate: f64,
    /// Traceless operator `L_k` with unit Hilbert–Schmidt norm.
    pub operator: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    /// Traceless Hermitian Hamiltonian.
    pub hamiltonian: CMat,
    /// Channels with nonzero rate, sorted by descending rate.
    pub channels: Vec<Channel>,
    pub time: f64,
}

impl CanonicalForm {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.rate).collect()
    }

    /// Number of channels with negative rate.
    pub fn negative_count(&self) -> usize {
        self.channels.iter().filter(|c| c.rate < 0.0).count()
    }
}

/// Every eigen-pair of the decoherence matrix, zero rates included.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FullDecomposition {
    pub hamiltonian: CMat,
    /// Rates in descending order.
    pub rates: Vec<f64>,
    /// Gauge-fixed eigenvectors as columns, aligned with `rates`.
    pub vectors: CMat,
    /// Spectral norm of the decoherence matrix.
    pub dmat_norm: f64,
}

pub(crate) fn decompose(
    s: &TransferMatrix,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
) -> Result<FullDecomposition> {
    let c = extract_c_with(s, basis, policy)?;
    let sp = split_with(&c, basis, policy)?;
    let eig = hermitian_eig_with(&sp.dmat, policy)?;
    let m = eig.values.len();
    let rates: Vec<f64> = eig.values.iter().rev().copied().collect();
    let mut vectors = CMat::from_fn(m, m, |i, k| eig.vectors[(i, m - 1 - k)]);
    for k in 0..m {
        fix_gauge(&mut vectors, k);
    }
    let dmat_norm = rates.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok(FullDecomposition {
        hamiltonian: sp.hamiltonian,
        rates,
        vectors,
        dmat_norm,
    })
}

/// Rotates column `k` so that its largest-magnitude entry (first one on ties)
/// is real and positive.
pub(crate) fn fix_gauge(vectors: &mut CMat, k: usize) {
    let col = vectors.column(k);
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = col
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    let z = col[pivot];
    let phase = z.conj() / z.norm();
    vectors.column_mut(k).iter_mut().for_each(|x| *x *= phase);
}

/// `Σ_{i≥1} u_{i−1} G_i` for a coefficient vector over the traceless basis.
pub(crate) fn channel_operator(basis: &OperatorBasis, coeffs: impl Iterator<Item = C64>) -> CMat {
    basis.combine(coeffs.enumerate().map(|(i, z)| (i + 1, z)))
}

/// Reduces a generator to its canonical form with default tolerances.
pub fn canonicalize(s: &TransferMatrix, basis: &OperatorBasis) -> Result<CanonicalForm> {
    canonicalize_with(s, basis, &NumericPolicy::default())
}

pub fn canonicalize_with(
    s: &TransferMatrix,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
) -> Result<CanonicalForm> {
    let full = decompose(s, basis, policy)?;
    let threshold = policy.zero_rate_threshold(full.dmat_norm);
    let channels = full
        .rates
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() >= threshold)
        .map(|(k, &rate)| Channel {
            rate,
            operator: channel_operator(basis, full.vectors.column(k).iter().copied()),
        })
        .collect();
    Ok(CanonicalForm {
        hamiltonian: full.hamiltonian,
        channels,
        time: s.time(),
    })
}

/// Rebuilds the generator `−i[H, ·] + Σ γ_k (L_k · L_k† − ½{L_k† L_k, ·})`.
///
/// Channel operators within `renormalize_tol` of unit norm are renormalized;
/// larger deviations and non-traceless operators are rejected.
pub fn assemble(cf: &CanonicalForm, basis: &OperatorBasis) -> Result<TransferMatrix> {
    assemble_with(cf, basis, &NumericPolicy::default())
}

pub fn assemble_with(
    cf: &CanonicalForm,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
) -> Result<TransferMatrix> {
    basis.check_dim(&cf.hamiltonian)?;
    let deviation = linalg::hermitian_deviation(&cf.hamiltonian);
    if deviation > policy.hamiltonian_tol * linalg::frobenius(&cf.hamiltonian).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let mut mat = linalg::commutator_superop(&cf.hamiltonian);
    for ch in &cf.channels {
        basis.check_dim(&ch.operator)?;
        let trace = linalg::trace(&ch.operator).norm();
        if trace > 1e-12 {
            return Err(Error::NotTraceless { trace });
        }
        let norm = linalg::frobenius(&ch.operator);
        let op = if (norm - 1.0).abs() <= 1e-11 {
            ch.operator.clone()
        } else if (norm - 1.0).abs() <= policy.renormalize_tol {
            log::warn!("renormalizing channel operator with norm {norm}");
            &ch.operator / C64::new(norm, 0.0)
        } else {
            return Err(Error::NotNormalized { norm });
        };
        mat += dissipator_superop(&op) * C64::new(ch.rate, 0.0);
    }
    TransferMatrix::new(mat, cf.time)
}

/// Gauge-aware distance between two canonical forms of the same dimension.
///
/// Returns the largest of: the sorted-rate differences (missing channels
/// count as zero rates), the Hamiltonian difference in Frobenius norm, and
/// the largest principal angle between corresponding degenerate-block
/// channel subspaces.
pub fn compare_canonical(a: &CanonicalForm, b: &CanonicalForm) -> f64 {
    let policy = NumericPolicy::default();
    fn sorted(cf: &CanonicalForm) -> Vec<(f64, Option<&CMat>)> {
        let mut v: Vec<(f64, Option<&CMat>)> = cf
            .channels
            .iter()
            .map(|c| (c.rate, Some(&c.operator)))
            .collect();
        v.sort_by(|x, y| y.0.total_cmp(&x.0));
        v
    }
    let mut ra = sorted(a);
    let mut rb = sorted(b);
    let len = ra.len().max(rb.len());
    for v in [&mut ra, &mut rb] {
        v.resize(len, (0.0, None));
        v.sort_by(|x, y| y.0.total_cmp(&x.0));
    }

    let mut dist = ra
        .iter()
        .zip(rb.iter())
        .map(|(x, y)| (x.0 - y.0).abs())
        .fold(0.0, f64::max);
    if a.hamiltonian.shape() == b.hamiltonian.shape() {
        dist = dist.max(linalg::frobenius(&(&a.hamiltonian - &b.hamiltonian)));
    } else {
        return f64::INFINITY;
    }

    let scale = ra.iter().fold(0.0f64, |m, x| m.max(x.0.abs())).max(1.0);
    let gap = policy.degeneracy_rel * scale;
    let mut start = 0;
    while start < len {
        let mut end = start + 1;
        while end < len && (ra[end - 1].0 - ra[end].0).abs() < gap {
            end += 1;
        }
        let block_a: Option<Vec<&CMat>> = ra[start..end].iter().map(|x| x.1).collect();
        let block_b: Option<Vec<&CMat>> = rb[start..end].iter().map(|x| x.1).collect();
        if let (Some(ba), Some(bb)) = (block_a, block_b) {
            dist = dist.max(principal_angle(&ba, &bb));
        }
        start = end;
    }
    dist
}

/// Largest principal angle between the spans of two operator sets.
fn principal_angle(a: &[&CMat], b: &[&CMat]) -> f64 {
    if a == b {
        return 0.0;
    }
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let residual = &qa - &qb * (qb.adjoint() * &qa);
    let sin = residual
        .singular_values()
        .iter()
        .fold(0.0f64, |m, &s| m.max(s))
        .min(1.0);
    sin.asin()
}

fn orthonormal_columns(ops: &[&CMat]) -> CMat {
    let cols: Vec<DVector<C64>> = ops.iter().map(|m| vec(m)).collect();
    let m = CMat::from_columns(&cols);
    m.qr().q()
}
