//! Random matrices for unit tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use crate::linalg::{sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z};
use crate::linalg::{CMat, C64};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex<R: Rng>(rng: &mut R, n: usize) -> CMat {
    DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = random_complex(rng, n);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_traceless_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let h = random_hermitian(rng, n);
    let tr = crate::linalg::trace(&h) / C64::new(n as f64, 0.0);
    h - crate::linalg::identity(n) * tr
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let qr = random_complex(rng, n).qr();
    let (q, r) = qr.unpack();
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let z = r[(i, i)];
            z / C64::new(z.norm(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    q * phases
}

/// Random canonical data: traceless Hermitian `H`, `channels` orthonormal
/// traceless operators and rates uniform in `[−1, 1]`.
pub fn random_canonical<R: Rng>(
    rng: &mut R,
    basis: &crate::basis::OperatorBasis,
    channels: usize,
) -> crate::canonical::CanonicalForm {
    let d = basis.dim();
    let m = basis.len() - 1;
    let u = random_unitary(rng, m);
    let channels = (0..channels)
        .map(|k| crate::canonical::Channel {
            rate: rng.random_range(-1.0..1.0),
            operator: basis.combine((0..m).map(|i| (i + 1, u[(i, k)]))),
        })
        .collect();
    crate::canonical::CanonicalForm {
        hamiltonian: random_traceless_hermitian(rng, d),
        channels,
        time: 0.0,
    }
}
