//! Orthonormal Hermitian operator basis and vectorization conventions.
//!
//! The basis is the generalized Gell-Mann construction, normalized so that
//! `Tr[G_m G_n] = δ_mn`, in this fixed order:
//!
//! 1. `G_0 = I/√d`;
//! 2. symmetric off-diagonals `(E_jk + E_kj)/√2` for `j < k`, row-major;
//! 3. antisymmetric off-diagonals `−i(E_jk − E_kj)/√2` for `j < k`, row-major;
//! 4. diagonals `(Σ_{j<l} E_jj − l·E_ll)/√(l(l+1))` for `l = 1 … d−1`.
//!
//! Vectorization stacks columns: `vec(A)[b·d + a] = A[a, b]`, so that
//! `vec(A ρ B) = (Bᵀ ⊗ A)·vec(ρ)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    ops: Vec<CMat>,
}

impl OperatorBasis {
    /// Builds the generalized Gell-Mann basis for Hilbert-space dimension `d`.
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let n = d * d;
        let mut ops = Vec::with_capacity(n);
        let s = std::f64::consts::FRAC_1_SQRT_2;

        ops.push(linalg::identity(d) * C64::new(1.0 / (d as f64).sqrt(), 0.0));
        for j in 0..d {
            for k in (j + 1)..d {
                let mut g = linalg::zeros(d);
                g[(j, k)] = C64::new(s, 0.0);
                g[(k, j)] = C64::new(s, 0.0);
                ops.push(g);
            }
        }
        for j in 0..d {
            for k in (j + 1)..d {
                let mut g = linalg::zeros(d);
                g[(j, k)] = C64::new(0.0, -s);
                g[(k, j)] = C64::new(0.0, s);
                ops.push(g);
            }
        }
        for l in 1..d {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut g = linalg::zeros(d);
            for j in 0..l {
                g[(j, j)] = C64::new(norm, 0.0);
            }
            g[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
            ops.push(g);
        }
        debug_assert_eq!(ops.len(), n);
        Ok(Self { dim: d, ops })
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis operators `N = d²`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    pub fn op(&self, m: usize) -> &CMat {
        &self.ops[m]
    }

    /// Expansion coefficients `⟨G_m, A⟩ = Tr[G_m A]`.
    pub fn coords(&self, a: &CMat) -> Result<HSVector> {
        self.check_dim(a)?;
        let coords = self.ops.iter().map(|g| hs_inner_unchecked(g, a)).collect();
        Ok(HSVector { coords })
    }

    /// Inverse of [`coords`](Self::coords): `Σ_m v_m G_m`.
    pub fn operator(&self, v: &HSVector) -> Result<CMat> {
        if v.coords.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v.coords.len(),
            });
        }
        Ok(self.combine(v.coords.iter().copied().enumerate()))
    }

    /// `Σ_m w_m G_m` over the given `(index, weight)` pairs.
    pub fn combine(&self, weights: impl IntoIterator<Item = (usize, C64)>) -> CMat {
        let mut out = linalg::zeros(self.dim);
        for (m, w) in weights {
            out += &self.ops[m] * w;
        }
        out
    }

    /// Transfer matrix `G_jᵀ ⊗ G_i` of `ρ ↦ G_i ρ G_j`.
    pub fn superop_element(&self, i: usize, j: usize) -> CMat {
        linalg::sandwich_superop(&self.ops[i], &self.ops[j])
    }

    pub(crate) fn check_dim(&self, a: &CMat) -> Result<()> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if a.nrows() != self.dim {
                    a.nrows()
                } else {
                    a.ncols()
                },
            });
        }
        Ok(())
    }
}

/// Coordinates of an operator in an [`OperatorBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct HSVector {
    pub coords: Vec<C64>,
}

impl HSVector {
    /// Largest imaginary part; zero for Hermitian operators.
    pub fn max_imag(&self) -> f64 {
        self.coords.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.re).collect()
    }
}

/// A density matrix. Hermiticity and unit trace are checked; positivity is not.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    matrix: CMat,
}

impl State {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let deviation = linalg::hermitian_deviation(&matrix);
        if deviation > 1e-13 {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = linalg::trace(&matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::Config(format!("state trace is {tr}, expected 1")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonFinite("pure state amplitude norm".into()));
        }
        let v = v / C64::new(norm, 0.0);
        let m = &v * v.adjoint();
        // exact Hermitian symmetrization removes rounding asymmetry
        Self::new((&m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: linalg::identity(d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Hilbert–Schmidt inner product `Tr[A† B]`.
pub fn hs_inner(a: &CMat, b: &CMat) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(hs_inner_unchecked(a, b))
}

pub(crate) fn hs_inner_unchecked(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Column-stacking vectorization.
pub fn vec(a: &CMat) -> DVector<C64> {
    // nalgebra storage is column-major, which is exactly column stacking
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<C64>) -> Result<CMat> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::NotSquareLength(n));
    }
    Ok(CMat::from_column_slice(d, d, v.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_small_dimension() {
        assert_eq!(OperatorBasis::new(1), Err(Error::InvalidDimension(1)));
        assert_eq!(OperatorBasis::new(0), Err(Error::InvalidDimension(0)));
    }

    #[test]
    fn qubit_basis_is_scaled_paulis() {
        let b = OperatorBasis::new(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            linalg::identity(2) * c(s, 0.0),
            sigma_x() * c(s, 0.0),
            sigma_y() * c(s, 0.0),
            sigma_z() * c(s, 0.0),
        ];
        for (g, e) in b.ops().iter().zip(expected.iter()) {
            assert!(linalg::frobenius(&(g - e)) < 1e-15);
        }
    }

    #[test]
    fn qutrit_basis_is_gell_mann_over_root_two() {
        let b = OperatorBasis::new(3).unwrap();
        assert_eq!(b.len(), 9);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let m = |e: [C64; 9]| CMat::from_row_slice(3, 3, &e);
        let r3 = 1.0 / 3f64.sqrt();
        // order: symmetric (01,02,12), antisymmetric (01,02,12), diagonal
        let gell_mann = [
            m([z, o, z, o, z, z, z, z, z]),
            m([z, z, o, z, z, z, o, z, z]),
            m([z, z, z, z, z, o, z, o, z]),
            m([z, -i, z, i, z, z, z, z, z]),
            m([z, z, -i, z, z, z, i, z, z]),
            m([z, z, z, z, z, -i, z, i, z]),
            m([o, z, z, z, -o, z, z, z, z]),
            m([c(r3, 0.0), z, z, z, c(r3, 0.0), z, z, z, c(-2.0 * r3, 0.0)]),
        ];
        for (g, lambda) in b.ops()[1..].iter().zip(gell_mann.iter()) {
            assert!(linalg::frobenius(&(g - lambda * c(s, 0.0))) < 1e-15);
        }
    }

    #[test]
    fn basis_invariants_hold() {
        for d in 2..=5 {
            let b = OperatorBasis::new(d).unwrap();
            let g0 = linalg::identity(d) * c(1.0 / (d as f64).sqrt(), 0.0);
            assert!(linalg::max_abs(&(b.op(0) - g0)) <= 1e-15);
            for g in &b.ops()[1..] {
                assert!(linalg::trace(g).norm() <= 1e-14);
                assert!(linalg::max_abs(&(g - g.adjoint())) <= 1e-14);
            }
            for (m, gm) in b.ops().iter().enumerate() {
                for (n, gn) in b.ops().iter().enumerate() {
                    let tr = linalg::trace(&(gm * gn));
                    let delta = if m == n { 1.0 } else { 0.0 };
                    assert!((tr - c(delta, 0.0)).norm() <= 1e-13, "d={d} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn gram_matrix_d4_is_identity() {
        let b = OperatorBasis::new(4).unwrap();
        let n = b.len();
        let gram = CMat::from_fn(n, n, |m, k| hs_inner(b.op(m), b.op(k)).unwrap());
        assert!(linalg::max_abs(&(gram - linalg::identity(n))) <= 1e-13);
    }

    #[test]
    fn hs_inner_examples() {
        let b = OperatorBasis::new(2).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((hs_inner(b.op(m), b.op(n)).unwrap() - c(expected, 0.0)).norm() < 1e-15);
            }
        }
        let i3 = linalg::identity(3);
        assert_eq!(hs_inner(&i3, &i3).unwrap(), c(3.0, 0.0));
        assert_eq!(
            hs_inner(&sigma_plus(), &sigma_minus()).unwrap(),
            c(0.0, 0.0)
        );
        assert_eq!(hs_inner(&sigma_plus(), &sigma_plus()).unwrap(), c(1.0, 0.0));
        assert!(matches!(
            hs_inner(&linalg::identity(2), &i3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn vec_stacks_columns() {
        let a = CMat::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        let v = vec(&a);
        let expected: Vec<C64> = [1.0, 3.0, 2.0, 4.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(v.as_slice(), expected.as_slice());
        assert_eq!(unvec(&v).unwrap(), a);
    }

    #[test]
    fn unvec_rejects_non_square_length() {
        let v = DVector::from_element(5, c(0.0, 0.0));
        assert_eq!(unvec(&v), Err(Error::NotSquareLength(5)));
    }

    #[test]
    fn vec_sandwich_identity() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let a = random_complex(&mut rng, 2);
            let rho = random_complex(&mut rng, 2);
            let bm = random_complex(&mut rng, 2);
            let lhs = vec(&(&a * &rho * &bm));
            let rhs = linalg::kron(&bm.transpose(), &a) * vec(&rho);
            assert!((lhs - rhs).norm() <= 1e-13);
        }
        let a = random_complex(&mut rng, 3);
        assert_eq!(unvec(&vec(&a)).unwrap(), a);
    }

    #[test]
    fn completeness_and_round_trip() {
        let mut rng = seeded(5);
        for d in 2..=4 {
            let b = OperatorBasis::new(d).unwrap();
            let h = random_hermitian(&mut rng, d);
            let v = b.coords(&h).unwrap();
            assert!(v.max_imag() <= 1e-13);
            let back = b.operator(&v).unwrap();
            assert!(linalg::frobenius(&(&back - &h)) <= 1e-12 * linalg::frobenius(&h));

            let a = random_complex(&mut rng, d);
            let back = b.operator(&b.coords(&a).unwrap()).unwrap();
            assert!(linalg::frobenius(&(&back - &a)) <= 1e-12 * linalg::frobenius(&a));
        }
    }

    #[test]
    fn superop_elements_are_orthonormal() {
        for d in 2..=3 {
            let b = OperatorBasis::new(d).unwrap();
            let n = b.len();
            let elems: Vec<CMat> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| b.superop_element(i, j))
                .collect();
            for (p, ep) in elems.iter().enumerate() {
                for (q, eq) in elems.iter().enumerate() {
                    let expected = if p == q { 1.0 } else { 0.0 };
                    assert!((hs_inner(ep, eq).unwrap() - c(expected, 0.0)).norm() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn state_validation() {
        assert!(State::new(linalg::identity(2) * c(0.5, 0.0)).is_ok());
        assert!(State::new(linalg::identity(2)).is_err());
        assert!(matches!(
            State::new(sigma_plus() + linalg::identity(2) * c(0.5, 0.0)),
            Err(Error::NotHermitian { .. })
        ));
        let s = State::pure(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert!((linalg::trace(s.matrix()) - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(State::maximally_mixed(3).dim(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn basis_round_trip_random(seed in any::<u64>(), d in 2usize..=4) {
                let mut rng = seeded(seed);
                let b = OperatorBasis::new(d).unwrap();
                let a = random_complex(&mut rng, d);
                let back = b.operator(&b.coords(&a).unwrap()).unwrap();
                prop_assert!(linalg::frobenius(&(&back - &a)) <= 1e-12 * linalg::frobenius(&a));
            }
        }
    }
}
