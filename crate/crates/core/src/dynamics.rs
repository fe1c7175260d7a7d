//! Time-local generators from dynamical maps, and memory-kernel propagation.
//!
//! For an invertible family `ρ(t) = φ_t[ρ(0)]` the time-local generator is
//! `Λ_t = φ̇_t ∘ φ_t⁻¹`. The derivative is taken with second-order
//! three-point stencils (central in the interior, one-sided at the ends, with
//! weights for non-uniform spacing), and `Λ_t φ_t = φ̇_t` is solved by LU
//! rather than forming the inverse.
//!
//! Memory-kernel equations `Φ̇(t) = ℒ_H Φ(t) + ∫₀ᵗ K(s,t) Φ(s) ds` are solved
//! with a trapezoidal predictor–corrector: the memory integral uses the
//! trapezoid rule on the grid, and the corrector is iterated to the implicit
//! trapezoid fixed point.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::TransferMatrix;
use crate::linalg::{self, CMat, C64};
use crate::policy::NumericPolicy;

const MAX_CORRECTIONS: usize = 16;
/// Below this many history terms the memory sum runs sequentially.
const PARALLEL_HISTORY: usize = 512;

/// Strictly increasing sequence of sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite time".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `steps` equal intervals from `t0` to `t1` (so `steps + 1` points).
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be positive".into()));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidGrid(format!("empty interval [{t0}, {t1}]")));
        }
        let h = (t1 - t0) / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * h).collect();
        points[steps] = t1;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// The common step if the grid is uniform to relative `1e-9`.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = (self.end() - self.start()) / (self.len() - 1) as f64;
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
            .then_some(h)
    }
}

/// Sampled dynamical maps `φ_{t_i}` on a grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    grid: TimeGrid,
    maps: Vec<TransferMatrix>,
}

impl MapFamily {
    /// Validates that `φ_0` is the identity and that every map preserves
    /// Hermiticity and trace.
    pub fn new(grid: TimeGrid, maps: Vec<CMat>) -> Result<Self> {
        Self::with_policy(grid, maps, &NumericPolicy::default())
    }

    pub fn with_policy(grid: TimeGrid, maps: Vec<CMat>, policy: &NumericPolicy) -> Result<Self> {
        if maps.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: maps.len(),
            });
        }
        if grid.start() != 0.0 {
            return Err(Error::InvalidGrid(
                "map families must start at t = 0".into(),
            ));
        }
        let n = maps[0].nrows();
        let mut out = Vec::with_capacity(maps.len());
        for (index, (m, &t)) in maps.into_iter().zip(grid.points()).enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
            if !linalg::is_finite(&m) {
                return Err(Error::NonFinite(format!("map at index {index}")));
            }
            let tm = TransferMatrix::new(m, t)?;
            let scale = tm.norm().max(1.0);
            if tm.hermiticity_deviation() > policy.map_tol * scale {
                return Err(Error::InvalidMap {
                    index,
                    reason: "does not preserve Hermiticity".into(),
                });
            }
            let id_row = crate::basis::vec(&linalg::identity(tm.dim()));
            let trace_dev = (tm.trace_row() - id_row).norm();
            if trace_dev > policy.map_tol * scale {
                return Err(Error::InvalidMap {
                    index,
                    reason: format!("does not preserve the trace (deviation {trace_dev:e})"),
                });
            }
            out.push(tm);
        }
        if linalg::max_abs(&(out[0].mat() - linalg::identity(n))) > policy.map_identity_tol {
            return Err(Error::InvalidMap {
                index: 0,
                reason: "first map must be the identity".into(),
            });
        }
        Ok(Self { grid, maps: out })
    }

    /// Samples `f(t)` on the grid.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> CMat) -> Result<Self> {
        let maps = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, maps)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn maps(&self) -> &[TransferMatrix] {
        &self.maps
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// Conditioning of a sampled map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvertibilityReport {
    pub time: f64,
    /// Spectral condition number `σ_max / σ_min`; infinite for exactly singular maps.
    pub condition_number: f64,
    pub singular: bool,
}

pub fn invertibility_report(f: &MapFamily, i: usize) -> InvertibilityReport {
    invertibility_report_with(f, i, &NumericPolicy::default())
}

pub fn invertibility_report_with(
    f: &MapFamily,
    i: usize,
    policy: &NumericPolicy,
) -> InvertibilityReport {
    let m = &f.maps[i];
    let condition_number = condition_number(m.mat());
    InvertibilityReport {
        time: m.time(),
        condition_number,
        singular: !(condition_number <= policy.cond_max),
    }
}

fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Derivative weights at `at` for the quadratic through three nodes.
fn stencil_weights(nodes: [f64; 3], at: f64) -> [f64; 3] {
    let [a, b, c] = nodes;
    [
        ((at - b) + (at - c)) / ((a - b) * (a - c)),
        ((at - a) + (at - c)) / ((b - a) * (b - c)),
        ((at - a) + (at - b)) / ((c - a) * (c - b)),
    ]
}

/// `dφ/dt` at grid index `i` from a three-point second-order stencil.
pub fn map_derivative(f: &MapFamily, i: usize) -> Result<CMat> {
    let m = f.len();
    if m < 3 {
        return Err(Error::InvalidGrid(
            "derivatives need at least three points".into(),
        ));
    }
    if i >= m {
        return Err(Error::InvalidGrid(format!("index {i} out of range")));
    }
    let start = i.saturating_sub(1).min(m - 3);
    let t = f.grid.points();
    let w = stencil_weights([t[start], t[start + 1], t[start + 2]], t[i]);
    let mut out = f.maps[start].mat() * C64::new(w[0], 0.0);
    out += f.maps[start + 1].mat() * C64::new(w[1], 0.0);
    out += f.maps[start + 2].mat() * C64::new(w[2], 0.0);
    Ok(out)
}

/// `Λ_{t_i} = φ̇_{t_i} ∘ φ_{t_i}⁻¹`.
pub fn generator_from_maps(f: &MapFamily, i: usize) -> Result<TransferMatrix> {
    generator_from_maps_with(f, i, &NumericPolicy::default())
}

pub fn generator_from_maps_with(
    f: &MapFamily,
    i: usize,
    policy: &NumericPolicy,
) -> Result<TransferMatrix> {
    let dphi = map_derivative(f, i)?;
    let report = invertibility_report_with(f, i, policy);
    if report.singular {
        return Err(Error::Singular(report));
    }
    let phi = f.maps[i].mat();
    // Λ φ = φ̇  ⇔  φᵀ Λᵀ = φ̇ᵀ
    let lambda_t = phi
        .transpose()
        .lu()
        .solve(&dphi.transpose())
        .ok_or(Error::Singular(report))?;
    let lambda = lambda_t.transpose();
    if !linalg::is_finite(&lambda) {
        return Err(Error::NonFinite(format!(
            "generator at t = {}",
            report.time
        )));
    }
    let raw = TransferMatrix::new(lambda, report.time)?;
    let residual = raw.trace_residual();
    let allowed = 1e-8 * raw.norm().max(1.0) * report.condition_number;
    if residual > allowed {
        return Err(Error::NotTraceAnnihilating { residual });
    }
    Ok(project_generator(raw))
}

/// Removes rounding-level violations of Hermiticity preservation and trace
/// annihilation.
fn project_generator(raw: TransferMatrix) -> TransferMatrix {
    let d = raw.dim();
    let time = raw.time();
    let mat = raw.into_mat();
    let mut sym = (&mat + linalg::conjugate_map(&mat)) * C64::new(0.5, 0.0);
    let id = crate::basis::vec(&linalg::identity(d));
    let row = id.adjoint() * &sym;
    sym -= (&id * row) * C64::new(1.0 / d as f64, 0.0);
    TransferMatrix::new(sym, time).expect("shape preserved")
}

/// Integrates `Φ̇ = Λ_t Φ` with the explicit midpoint rule over step `2h`,
/// taking the midpoint generator from the odd grid points. Returns `Φ` at
/// the final time. The grid must be uniform with an even number of steps.
pub fn reintegrate(generators: &[TransferMatrix], grid: &TimeGrid) -> Result<CMat> {
    if generators.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: generators.len(),
        });
    }
    let h = grid
        .uniform_step()
        .ok_or_else(|| Error::InvalidGrid("reintegration needs a uniform grid".into()))?;
    if !(grid.len() - 1).is_multiple_of(2) {
        return Err(Error::InvalidGrid(
            "reintegration needs an even number of steps".into(),
        ));
    }
    let n = generators[0].mat().nrows();
    let mut phi = linalg::identity(n);
    let hc = C64::new(h, 0.0);
    for k in (0..grid.len() - 1).step_by(2) {
        let half = &phi + generators[k].mat() * &phi * hc;
        phi += generators[k + 1].mat() * half * (hc * 2.0);
    }
    Ok(phi)
}

/// A memory kernel `K(s, t)`, `s ≤ t`, as a transfer matrix.
pub trait MemoryKernel: Sync {
    fn at(&self, s: f64, t: f64) -> CMat;

    /// Kernels of the form `k·e^{−λ(t−s)}·D` expose their factors so the
    /// memory sum can be updated recursively instead of re-summed each step.
    fn exponential(&self) -> Option<&ExponentialKernel> {
        None
    }
}

/// `K(s, t) = amplitude · e^{−decay·(t−s)} · superop`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialKernel {
    pub amplitude: f64,
    pub decay: f64,
    pub superop: CMat,
}

impl MemoryKernel for ExponentialKernel {
    fn at(&self, s: f64, t: f64) -> CMat {
        &self.superop * C64::new(self.amplitude * (-self.decay * (t - s)).exp(), 0.0)
    }

    fn exponential(&self) -> Option<&ExponentialKernel> {
        Some(self)
    }
}

/// Adapts a closure into a [`MemoryKernel`].
pub struct FnKernel<F>(pub F);

impl<F: Fn(f64, f64) -> CMat + Sync> MemoryKernel for FnKernel<F> {
    fn at(&self, s: f64, t: f64) -> CMat {
        (self.0)(s, t)
    }
}

/// Forces the generic memory sum even for exponential kernels.
pub struct Generic<K>(pub K);

impl<K: MemoryKernel> MemoryKernel for Generic<K> {
    fn at(&self, s: f64, t: f64) -> CMat {
        self.0.at(s, t)
    }
}

pub struct MemoryKernelSpec {
    pub hamiltonian: CMat,
    pub kernel: Box<dyn MemoryKernel>,
}

fn check_kernel(k: &CMat, n: usize, s: f64, t: f64) -> Result<()> {
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    if !linalg::is_finite(k) {
        return Err(Error::NonFinite(format!(
            "memory kernel at (s, t) = ({s}, {t})"
        )));
    }
    let tm = TransferMatrix::new(k.clone(), t)?;
    let scale = tm.norm().max(1.0);
    let tol = NumericPolicy::default().map_tol * scale;
    if tm.hermiticity_deviation() > tol {
        return Err(Error::NotHermiticityPreserving {
            deviation: tm.hermiticity_deviation(),
        });
    }
    if tm.trace_residual() > tol {
        return Err(Error::NotTraceAnnihilating {
            residual: tm.trace_residual(),
        });
    }
    Ok(())
}

/// History part of the trapezoidal memory integral at `t_n`, i.e. every term
/// except the `j = n` endpoint.
struct History<'a> {
    kernel: &'a dyn MemoryKernel,
    exp: Option<&'a ExponentialKernel>,
    /// Recursive sum `Σ_{j<n} ω_j e^{−λ(t_n−t_j)} Φ_j` for exponential kernels.
    running: CMat,
    h: f64,
}

impl<'a> History<'a> {
    fn memory_without_endpoint(&self, phis: &[CMat], t: &[f64], n: usize) -> Result<CMat> {
        let dim = phis[0].nrows();
        if n == 0 {
            return Ok(linalg::zeros(dim));
        }
        if let Some(e) = self.exp {
            return Ok(&e.superop * &self.running * C64::new(self.h * e.amplitude, 0.0));
        }
        let term = |j: usize| -> Result<CMat> {
            let k = self.kernel.at(t[j], t[n]);
            if !linalg::is_finite(&k) {
                return Err(Error::NonFinite(format!(
                    "memory kernel at (s, t) = ({}, {})",
                    t[j], t[n]
                )));
            }
            let w = if j == 0 { 0.5 } else { 1.0 };
            Ok(k * &phis[j] * C64::new(w * self.h, 0.0))
        };
        let terms: Vec<CMat> = if n >= PARALLEL_HISTORY {
            (0..n).into_par_iter().map(term).collect::<Result<_>>()?
        } else {
            (0..n).map(term).collect::<Result<_>>()?
        };
        // sequential reduction keeps the sum independent of thread count
        Ok(terms.into_iter().fold(linalg::zeros(dim), |acc, x| acc + x))
    }

    fn advance(&mut self, phi_n: &CMat, n: usize) {
        if let Some(e) = self.exp {
            let w = if n == 0 { 0.5 } else { 1.0 };
            let decay = (-e.decay * self.h).exp();
            self.running = (&self.running + phi_n * C64::new(w, 0.0)) * C64::new(decay, 0.0);
        }
    }
}

/// Solves `Φ̇(t) = ℒ_H Φ(t) + ∫₀ᵗ K(s,t) Φ(s) ds`, `Φ(0) = I`, on a uniform grid.
pub fn propagate_memory_kernel(spec: &MemoryKernelSpec, grid: &TimeGrid) -> Result<MapFamily> {
    let h = grid.uniform_step().ok_or_else(|| {
        Error::InvalidGrid("memory-kernel propagation needs a uniform grid".into())
    })?;
    if grid.start() != 0.0 {
        return Err(Error::InvalidGrid("propagation starts at t = 0".into()));
    }
    let ham = &spec.hamiltonian;
    let deviation = linalg::hermitian_deviation(ham);
    if deviation > NumericPolicy::default().hamiltonian_tol * linalg::frobenius(ham).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let d = ham.nrows();
    let n = d * d;
    let lh = linalg::commutator_superop(ham);
    let t = grid.points();
    let kernel = spec.kernel.as_ref();
    let exp = kernel.exponential();

    check_kernel(&kernel.at(0.0, 0.0), n, 0.0, 0.0)?;
    if let Some(e) = exp {
        check_kernel(&e.superop, n, 0.0, 0.0)?;
    }

    let mut phis: Vec<CMat> = Vec::with_capacity(t.len());
    phis.push(linalg::identity(n));
    let mut history = History {
        kernel,
        exp,
        running: linalg::zeros(n),
        h,
    };
    let hc = C64::new(h, 0.0);
    let half_h = C64::new(0.5 * h, 0.0);

    // M_n = history_n + (h/2)·K(t_n, t_n)·Φ_n for n ≥ 1, and M_0 = 0
    let mut hist_n = linalg::zeros(n);
    let mut endpoint_n = linalg::zeros(n);
    for step in 0..t.len() - 1 {
        let phi_n = &phis[step];
        let f_n = &lh * phi_n + &hist_n + &endpoint_n * phi_n;

        history.advance(phi_n, step);
        let next = step + 1;
        let hist_next = history.memory_without_endpoint(&phis, t, next)?;
        let k_diag = kernel.at(t[next], t[next]);
        if next % 64 == 0 || next == t.len() - 1 {
            check_kernel(&k_diag, n, t[next], t[next])?;
        } else if !linalg::is_finite(&k_diag) {
            return Err(Error::NonFinite(format!(
                "memory kernel at t = {}",
                t[next]
            )));
        }
        let endpoint_next = k_diag * half_h;
        let implicit = &lh + &endpoint_next;

        let base = phi_n + (&f_n + &hist_next) * half_h;
        let mut phi = phi_n + &f_n * hc;
        let mut last_delta = f64::INFINITY;
        let mut converged = false;
        for iter in 0..MAX_CORRECTIONS {
            let updated = &base + &implicit * &phi * half_h;
            let delta = linalg::frobenius(&(&updated - &phi));
            phi = updated;
            if !delta.is_finite() || (iter >= 1 && delta > last_delta) {
                return Err(Error::Divergence {
                    time: t[next],
                    step: h,
                });
            }
            if delta <= 1e-14 * linalg::frobenius(&phi) {
                converged = true;
                break;
            }
            last_delta = delta;
        }
        if !converged && last_delta > 1e-10 * linalg::frobenius(&phi) {
            return Err(Error::Divergence {
                time: t[next],
                step: h,
            });
        }
        if !linalg::is_finite(&phi) {
            return Err(Error::NonFinite(format!(
                "propagated map at t = {}",
                t[next]
            )));
        }
        hist_n = hist_next;
        endpoint_n = endpoint_next;
        phis.push(phi);
    }
    MapFamily::new(grid.clone(), phis)
}
