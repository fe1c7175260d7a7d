//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// `A ⊗ B` with the convention `(A ⊗ B)[(i1·nB + i2), (j1·nB + j2)] = A[i1,j1]·B[i2,j2]`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖A − A†‖_F`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Transfer matrix of `ρ ↦ −i[H, ρ]` on column-stacked `ρ`.
pub fn commutator_superop(h: &CMat) -> CMat {
    let d = h.nrows();
    let id = identity(d);
    let left = kron(&id, h);
    let right = kron(&h.transpose(), &id);
    (left - right) * C64::new(0.0, -1.0)
}

/// Transfer matrix of `ρ ↦ A ρ B`.
pub fn sandwich_superop(a: &CMat, b: &CMat) -> CMat {
    kron(&b.transpose(), a)
}

/// Transfer matrix of `ρ ↦ Λ[ρ†]†`, the Hermitian conjugate of a map.
///
/// A map preserves Hermiticity iff it equals its conjugate.
pub fn conjugate_map(m: &CMat) -> CMat {
    let n = m.nrows();
    let d = (n as f64).sqrt().round() as usize;
    let swap = |r: usize| (r % d) * d + r / d;
    CMat::from_fn(n, n, |r, s| m[(swap(r), swap(s))].conj())
}

/// Conjugates a transfer matrix by the unitary `V`: `Λ ↦ 𝒱 Λ 𝒱†` with `𝒱[ρ] = V ρ V†`.
pub fn conjugate_by_unitary(m: &CMat, v: &CMat) -> CMat {
    let u = sandwich_superop(v, &v.adjoint());
    &u * m * u.adjoint()
}

fn qubit(entries: [C64; 4]) -> CMat {
    CMat::from_row_slice(2, 2, &entries)
}

pub fn sigma_x() -> CMat {
    qubit([ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMat {
    qubit([ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMat {
    qubit([ONE, ZERO, ZERO, -ONE])
}

/// `σ+ = |1⟩⟨0|`; `|1⟩` is the excited level throughout.
pub fn sigma_plus() -> CMat {
    qubit([ZERO, ZERO, ONE, ZERO])
}

/// `σ− = |0⟩⟨1|`, the decay operator taking `|1⟩` to `|0⟩`.
pub fn sigma_minus() -> CMat {
    qubit([ZERO, ONE, ZERO, ZERO])
}

/// Unitary `exp(−i·θ·σz)`.
pub fn z_rotation(theta: f64) -> CMat {
    let p = C64::from_polar(1.0, -theta);
    qubit([p, ZERO, ZERO, p.conj()])
}
