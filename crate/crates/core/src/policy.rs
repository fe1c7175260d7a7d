//! Numeric tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// One record holding every tolerance the library uses.
///
/// Relative tolerances are scaled by the Frobenius norm of the object being
/// checked unless noted otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericPolicy {
    /// Hermiticity of input Hamiltonians (relative, floor 1).
    pub hamiltonian_tol: f64,
    /// Hermiticity of the extracted coefficient matrix (relative).
    pub c_hermitian_tol: f64,
    /// Trace condition `C + C† = −Σ d_ij G_j G_i` checked by `split` (relative).
    pub trace_tol: f64,
    /// Hermiticity required of eigensolver input (relative).
    pub eig_hermitian_tol: f64,
    /// Channels with `|γ| < max(zero_rate_rel·‖d‖, zero_rate_abs)` are dropped.
    pub zero_rate_rel: f64,
    pub zero_rate_abs: f64,
    /// Relative eigenvalue gap below which rates count as degenerate.
    pub degeneracy_rel: f64,
    /// Channel operators off unit norm by less than this are renormalized.
    pub renormalize_tol: f64,
    /// Condition number above which a dynamical map is flagged singular.
    pub cond_max: f64,
    /// Hermiticity/trace preservation of sampled maps.
    pub map_tol: f64,
    /// Deviation of the first sampled map from the identity.
    pub map_identity_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            hamiltonian_tol: 1e-13,
            c_hermitian_tol: 1e-12,
            trace_tol: 1e-9,
            eig_hermitian_tol: 1e-10,
            zero_rate_rel: 1e-10,
            zero_rate_abs: 1e-14,
            degeneracy_rel: 1e-8,
            renormalize_tol: 1e-6,
            cond_max: 1e8,
            map_tol: 1e-10,
            map_identity_tol: 1e-12,
        }
    }
}

impl NumericPolicy {
    /// Threshold below which a rate is treated as zero, given the spectral
    /// norm of the decoherence matrix.
    pub fn zero_rate_threshold(&self, dmat_norm: f64) -> f64 {
        (self.zero_rate_rel * dmat_norm).max(self.zero_rate_abs)
    }
}
