//! Closed-form maps and kernels for the built-in models.
//!
//! Qubit conventions: `|1⟩` is the excited level and `σ− = |0⟩⟨1|`.

use crate::dynamics::ExponentialKernel;
use crate::linalg::{self, CMat, C64};

fn idx(a: usize, b: usize) -> usize {
    b * 2 + a
}

/// Pure dephasing map: populations fixed, `ρ01 ↦ q·ρ01`, `ρ10 ↦ q*·ρ10`.
pub fn dephasing_map(q: C64) -> CMat {
    let mut m = linalg::zeros(4);
    m[(idx(0, 0), idx(0, 0))] = linalg::ONE;
    m[(idx(1, 1), idx(1, 1))] = linalg::ONE;
    m[(idx(0, 1), idx(0, 1))] = q;
    m[(idx(1, 0), idx(1, 0))] = q.conj();
    m
}

/// Amplitude-damping map with excited-state amplitude `g`:
/// `ρ11 ↦ |g|²ρ11`, `ρ00 ↦ ρ00 + (1 − |g|²)ρ11`, `ρ01 ↦ g·ρ01`.
pub fn amplitude_damping_map(g: C64) -> CMat {
    let p = g.norm_sqr();
    let mut m = linalg::zeros(4);
    m[(idx(0, 0), idx(0, 0))] = linalg::ONE;
    m[(idx(0, 0), idx(1, 1))] = C64::new(1.0 - p, 0.0);
    m[(idx(1, 1), idx(1, 1))] = C64::new(p, 0.0);
    m[(idx(0, 1), idx(0, 1))] = g;
    m[(idx(1, 0), idx(1, 0))] = g.conj();
    m
}

/// Excited-state amplitude of a resonant two-level atom in a Lorentzian
/// reservoir of width `lambda` and coupling `gamma0`:
/// `G(t) = e^{−λt/2}[cosh(δt/2) + (λ/δ)·sinh(δt/2)]`, `δ = √(λ² − 2γ₀λ)`.
///
/// Strong coupling (`2γ₀ > λ`) makes `δ` imaginary and `G` oscillates through zero.
pub fn jc_amplitude(t: f64, lambda: f64, gamma0: f64) -> f64 {
    let disc = lambda * lambda - 2.0 * gamma0 * lambda;
    let envelope = (-0.5 * lambda * t).exp();
    if disc > 0.0 {
        let delta = disc.sqrt();
        envelope * ((0.5 * delta * t).cosh() + lambda / delta * (0.5 * delta * t).sinh())
    } else if disc < 0.0 {
        let omega = (-disc).sqrt();
        envelope * ((0.5 * omega * t).cos() + lambda / omega * (0.5 * omega * t).sin())
    } else {
        envelope * (1.0 + 0.5 * lambda * t)
    }
}

/// First `count` zeros of [`jc_amplitude`]; empty unless `2γ₀ > λ`.
pub fn jc_zeros(lambda: f64, gamma0: f64, count: usize) -> Vec<f64> {
    let disc = lambda * lambda - 2.0 * gamma0 * lambda;
    if disc >= 0.0 {
        return Vec::new();
    }
    let omega = (-disc).sqrt();
    let first = std::f64::consts::PI - (omega / lambda).atan();
    (0..count)
        .map(|m| 2.0 * (first + m as f64 * std::f64::consts::PI) / omega)
        .collect()
}

/// Dephasing kernel `K(s,t) = k·e^{−λ(t−s)}·(σz·σz − id)`.
pub fn dephasing_kernel(k: f64, lambda: f64) -> ExponentialKernel {
    let sz = linalg::sigma_z();
    let superop = linalg::sandwich_superop(&sz, &sz) - linalg::identity(4);
    ExponentialKernel {
        amplitude: k,
        decay: lambda,
        superop,
    }
}

/// Coherence of the dephasing-kernel model, the solution of
/// `ċ = −2k·u`, `u̇ = c − λu`, `c(0) = 1`, `u(0) = 0`.
pub fn kernel_coherence(t: f64, k: f64, lambda: f64) -> f64 {
    let disc = lambda * lambda - 8.0 * k;
    if disc > 0.0 {
        let s = disc.sqrt();
        let (r1, r2) = (0.5 * (-lambda + s), 0.5 * (-lambda - s));
        (r2 * (r1 * t).exp() - r1 * (r2 * t).exp()) / (r2 - r1)
    } else if disc < 0.0 {
        let omega = 0.5 * (-disc).sqrt();
        (-0.5 * lambda * t).exp() * ((omega * t).cos() + lambda / (2.0 * omega) * (omega * t).sin())
    } else {
        (-0.5 * lambda * t).exp() * (1.0 + 0.5 * lambda * t)
    }
}

/// First `count` zeros of [`kernel_coherence`]; empty unless `8k > λ²`.
pub fn kernel_coherence_zeros(k: f64, lambda: f64, count: usize) -> Vec<f64> {
    let disc = lambda * lambda - 8.0 * k;
    if disc >= 0.0 {
        return Vec::new();
    }
    let omega = 0.5 * (-disc).sqrt();
    let first = std::f64::consts::PI - (2.0 * omega / lambda).atan();
    (0..count)
        .map(|m| (first + m as f64 * std::f64::consts::PI) / omega)
        .collect()
}
