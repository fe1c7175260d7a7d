//! Time-local generators as transfer matrices, and their reduction to a
//! Hermitian coefficient matrix `c` split into Hamiltonian and
//! decoherence-matrix parts.
//!
//! A generator `ρ̇ = Σ_k A_k ρ B_k†` expands in the operator basis as
//! `ρ̇ = Σ_ij c_ij G_i ρ G_j`. Hermiticity preservation makes `c` Hermitian;
//! trace annihilation then fixes the anti-commutator part of
//! `C = ½(c_00/d)·I + Σ_{i≥1} (c_i0/√d)·G_i` in terms of the decoherence
//! block `d_ij = c_ij (i, j ≥ 1)`, leaving
//!
//! ```text
//! ρ̇ = −i[H, ρ] + Σ_{ij≥1} d_ij ( G_i ρ G_j − ½{G_j G_i, ρ} ),   H = (i/2)(C − C†).
//! ```

use nalgebra::DVector;

use crate::basis::{vec, OperatorBasis};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::policy::NumericPolicy;

/// Raw terms of `ρ̇ = Σ_k A_k ρ B_k†` at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerms {
    pub terms: Vec<(CMat, CMat)>,
    pub time: f64,
}

/// Lindblad-like input `ρ̇ = −i[H, ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})`.
///
/// Rates may be negative. With `legacy_halved_rates` each rate instead
/// multiplies `2 L ρ L† − {L†L, ρ}`, the bracket convention used by some
/// textbook forms; this is the same as doubling every rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTerms {
    pub hamiltonian: CMat,
    pub channels: Vec<(f64, CMat)>,
    pub legacy_halved_rates: bool,
    pub time: f64,
}

impl LindbladTerms {
    pub fn new(hamiltonian: CMat, channels: Vec<(f64, CMat)>) -> Self {
        Self {
            hamiltonian,
            channels,
            legacy_halved_rates: false,
            time: 0.0,
        }
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn legacy(mut self) -> Self {
        self.legacy_halved_rates = true;
        self
    }
}

/// Matrix of a linear map acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    mat: CMat,
    time: f64,
    dim: usize,
}

impl TransferMatrix {
    pub fn new(mat: CMat, time: f64) -> Result<Self> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.ncols(),
            });
        }
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n {
            return Err(Error::NotSquareLength(n));
        }
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { mat, time, dim })
    }

    pub fn zero(dim: usize, time: f64) -> Self {
        Self {
            mat: linalg::zeros(dim * dim),
            time,
            dim,
        }
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Hilbert-space dimension `d` (the matrix is `d² × d²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.mat)
    }

    /// Applies the map to an operator.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        let out = &self.mat * vec(rho);
        Ok(CMat::from_column_slice(self.dim, self.dim, out.as_slice()))
    }

    /// `‖vec(I)† · M‖`, zero for trace-annihilating maps.
    pub fn trace_residual(&self) -> f64 {
        self.trace_row().norm()
    }

    /// `vec(I)† · M`, the row vector giving `Tr[M(ρ)]` as a function of `vec(ρ)`.
    pub fn trace_row(&self) -> DVector<C64> {
        let n = self.mat.ncols();
        DVector::from_fn(n, |s, _| {
            (0..self.dim).map(|a| self.mat[(a * self.dim + a, s)]).sum()
        })
    }

    /// `‖M − M^#‖_F`, where `M^#(ρ) = M(ρ†)†`; zero for Hermiticity-preserving maps.
    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::frobenius(&(&self.mat - linalg::conjugate_map(&self.mat)))
    }

    pub fn is_finite(&self) -> bool {
        linalg::is_finite(&self.mat)
    }
}

impl std::ops::Add for &TransferMatrix {
    type Output = TransferMatrix;

    fn add(self, rhs: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            mat: &self.mat + &rhs.mat,
            time: self.time,
            dim: self.dim,
        }
    }
}

/// Hermitian `N × N` coefficient matrix of a generator in the operator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub c: CMat,
}

impl CMatrix {
    /// Reassembles `Σ_ij c_ij (G_jᵀ ⊗ G_i)`.
    pub fn to_transfer(&self, basis: &OperatorBasis, time: f64) -> Result<TransferMatrix> {
        let n = basis.len();
        if self.c.nrows() != n || self.c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.c.nrows(),
            });
        }
        let mut mat = linalg::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let cij = self.c[(i, j)];
                if cij != linalg::ZERO {
                    mat += basis.superop_element(i, j) * cij;
                }
            }
        }
        TransferMatrix::new(mat, time)
    }
}

/// Hamiltonian and decoherence matrix of a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGenerator {
    /// Traceless Hermitian `d × d` Hamiltonian.
    pub hamiltonian: CMat,
    /// `(N−1) × (N−1)` Hermitian decoherence matrix `d_ij`, `i, j ≥ 1`.
    pub dmat: CMat,
    /// The operator `C` rebuilt from the first column of `c`.
    pub c_op: CMat,
}

impl SplitGenerator {
    /// `−Σ_{ij≥1} d_ij G_j G_i`, which must equal `C + C†`.
    pub fn anticommutator_operator(&self, basis: &OperatorBasis) -> CMat {
        let mut k = linalg::zeros(basis.dim());
        for i in 1..basis.len() {
            for j in 1..basis.len() {
                let dij = self.dmat[(i - 1, j - 1)];
                if dij != linalg::ZERO {
                    k -= basis.op(j) * basis.op(i) * dij;
                }
            }
        }
        k
    }

    /// `‖C + C† + Σ d_ij G_j G_i‖_F`.
    pub fn trace_condition_residual(&self, basis: &OperatorBasis) -> f64 {
        let lhs = &self.c_op + self.c_op.adjoint();
        linalg::frobenius(&(lhs - self.anticommutator_operator(basis)))
    }

    /// Rebuilds `−i[H, ·] + Σ d_ij (G_i · G_j − ½{G_j G_i, ·})`.
    pub fn to_transfer(&self, basis: &OperatorBasis, time: f64) -> Result<TransferMatrix> {
        let d = basis.dim();
        let n = basis.len();
        let mut mat = linalg::commutator_superop(&self.hamiltonian);
        let mut k = linalg::zeros(d);
        for i in 1..n {
            for j in 1..n {
                let dij = self.dmat[(i - 1, j - 1)];
                if dij != linalg::ZERO {
                    mat += basis.superop_element(i, j) * dij;
                    k += basis.op(j) * basis.op(i) * dij;
                }
            }
        }
        mat -= anticommutator_superop(&k) * C64::new(0.5, 0.0);
        TransferMatrix::new(mat, time)
    }
}

/// Transfer matrix of `ρ ↦ K ρ + ρ K`.
pub(crate) fn anticommutator_superop(k: &CMat) -> CMat {
    let id = linalg::identity(k.nrows());
    linalg::kron(&id, k) + linalg::kron(&k.transpose(), &id)
}

/// Transfer matrix of `ρ ↦ L ρ L† − ½{L†L, ρ}`.
pub(crate) fn dissipator_superop(l: &CMat) -> CMat {
    let ldl = l.adjoint() * l;
    linalg::kron(&l.map(|z| z.conj()), l) - anticommutator_superop(&ldl) * C64::new(0.5, 0.0)
}

fn check_square(m: &CMat, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if m.nrows() != d { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// `Σ_k conj(B_k) ⊗ A_k`, the transfer matrix of `ρ ↦ Σ_k A_k ρ B_k†`.
pub fn transfer_from_terms(g: &GeneratorTerms) -> Result<TransferMatrix> {
    let d = match g.terms.first() {
        Some((a, _)) => a.nrows(),
        None => return Err(Error::Config("generator needs at least one term".into())),
    };
    let mut mat = linalg::zeros(d * d);
    for (a, b) in &g.terms {
        check_square(a, d)?;
        check_square(b, d)?;
        mat += linalg::kron(&b.map(|z| z.conj()), a);
    }
    TransferMatrix::new(mat, g.time)
}

/// Transfer matrix of a Lindblad-like equation with arbitrary-sign rates.
pub fn transfer_from_lindblad(l: &LindbladTerms) -> Result<TransferMatrix> {
    let h = &l.hamiltonian;
    let d = h.nrows();
    check_square(h, d)?;
    let deviation = linalg::hermitian_deviation(h);
    if deviation > NumericPolicy::default().hamiltonian_tol * linalg::frobenius(h).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let scale = if l.legacy_halved_rates { 2.0 } else { 1.0 };
    let mut mat = linalg::commutator_superop(h);
    for (rate, op) in &l.channels {
        check_square(op, d)?;
        if *rate != 0.0 {
            mat += dissipator_superop(op) * C64::new(scale * rate, 0.0);
        }
    }
    TransferMatrix::new(mat, l.time)
}

/// Coefficients `c_ij = ⟨G_jᵀ ⊗ G_i, S⟩` with Hermiticity check.
pub fn extract_c(s: &TransferMatrix, basis: &OperatorBasis) -> Result<CMatrix> {
    extract_c_with(s, basis, &NumericPolicy::default())
}

pub fn extract_c_with(
    s: &TransferMatrix,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
) -> Result<CMatrix> {
    let d = basis.dim();
    if s.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s.dim(),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("transfer matrix".into()));
    }
    let n = basis.len();
    let m = s.mat();

    // (G_jᵀ ⊗ G_i)[b·d + a, b'·d + a'] = G_j[b', b]·G_i[a, a'], so the projection
    // factorizes through partial contractions over the inner index pair.
    let partial: Vec<CMat> = basis
        .ops()
        .iter()
        .map(|gi| {
            CMat::from_fn(d, d, |b, bp| {
                let mut acc = linalg::ZERO;
                for a in 0..d {
                    for ap in 0..d {
                        let g = gi[(a, ap)];
                        if g != linalg::ZERO {
                            acc += g.conj() * m[(b * d + a, bp * d + ap)];
                        }
                    }
                }
                acc
            })
        })
        .collect();
    let c = CMat::from_fn(n, n, |i, j| {
        let gj = basis.op(j);
        let ti = &partial[i];
        let mut acc = linalg::ZERO;
        for b in 0..d {
            for bp in 0..d {
                acc += gj[(b, bp)] * ti[(b, bp)];
            }
        }
        acc
    });

    let deviation = linalg::hermitian_deviation(&c);
    if deviation > policy.c_hermitian_tol * linalg::frobenius(&c) {
        return Err(Error::NotHermiticityPreserving { deviation });
    }
    // exact symmetrization so downstream Hermitian algebra sees no rounding skew
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
    Ok(CMatrix { c })
}

/// Splits `c` into the traceless Hamiltonian and the decoherence matrix.
pub fn split(c: &CMatrix, basis: &OperatorBasis) -> Result<SplitGenerator> {
    split_with(c, basis, &NumericPolicy::default())
}

pub fn split_with(
    c: &CMatrix,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
) -> Result<SplitGenerator> {
    let n = basis.len();
    let d = basis.dim();
    let cm = &c.c;
    if cm.nrows() != n || cm.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cm.nrows(),
        });
    }
    let sqrt_d = (d as f64).sqrt();
    let mut c_op = linalg::identity(d) * (cm[(0, 0)] * C64::new(0.5 / d as f64, 0.0));
    for i in 1..n {
        c_op += basis.op(i) * (cm[(i, 0)] / sqrt_d);
    }

    let mut h = (&c_op - c_op.adjoint()) * C64::new(0.0, 0.5);
    h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let shift = linalg::trace(&h) / C64::new(d as f64, 0.0);
    h -= linalg::identity(d) * shift;

    let dmat = cm.view((1, 1), (n - 1, n - 1)).into_owned();
    let out = SplitGenerator {
        hamiltonian: h,
        dmat,
        c_op,
    };
    let residual = out.trace_condition_residual(basis);
    if residual > policy.trace_tol * linalg::frobenius(cm) {
        return Err(Error::NotTraceAnnihilating { residual });
    }
    Ok(out)
}
