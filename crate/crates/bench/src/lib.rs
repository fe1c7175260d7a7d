//! Seeded fixtures shared by the benchmarks.

use canonme::{assemble, CMat, CanonicalForm, Channel, OperatorBasis, TransferMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Hermitian `n × n` matrix from a fixed seed.
pub fn hermitian(n: usize, seed: u64) -> CMat {
    random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Generator with a full set of channels for dimension `d`.
pub fn generator(d: usize, seed: u64) -> TransferMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = OperatorBasis::new(d).expect("d ≥ 2");
    let m = d * d - 1;
    let q = random_hermitian(&mut rng, m).symmetric_eigen().eigenvectors;
    let channels = (0..m)
        .map(|k| Channel {
            rate: rng.random_range(-1.0..1.0),
            operator: basis.combine((0..m).map(|i| (i + 1, q[(i, k)]))),
        })
        .collect();
    let mut h = random_hermitian(&mut rng, d);
    let shift = h.trace() / C64::new(d as f64, 0.0);
    for i in 0..d {
        h[(i, i)] -= shift;
    }
    let cf = CanonicalForm {
        hamiltonian: h,
        channels,
        time: 0.0,
    };
    assemble(&cf, &basis).expect("valid canonical data")
}
