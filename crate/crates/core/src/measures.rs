//! Canonical rates along a time grid and the non-Markovianity measures built
//! from them.
//!
//! [`canonical_series`] canonicalizes every grid point (in parallel) keeping
//! all `N − 1` eigen-pairs, then follows the branches through time with an
//! optimal bijective assignment on squared eigenvector overlaps. Inside a
//! degenerate block the vectors are rotated to stay as close as possible to
//! the previous time, so labels survive exact crossings. A degenerate block
//! at the first time of a run is resolved against the following time.
//!
//! Times where the provider reports a singular map are flagged. They carry
//! no rates, integrals skip every grid interval touching them, and branch
//! labels are re-seeded at the next regular time.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::OperatorBasis;
use crate::canonical::{self, CanonicalForm, Channel};
use crate::dynamics::{generator_from_maps_with, InvertibilityReport, MapFamily, TimeGrid};
use crate::error::{Error, Result};
use crate::generator::TransferMatrix;
use crate::linalg::{CMat, C64};
use crate::policy::NumericPolicy;

/// Largest drift of a branch vector still counted as a constant channel.
const CONSTANT_CHANNEL_DRIFT: f64 = 1e-8;

/// Anything that yields the generator at grid index `i` (time `t`).
pub trait GeneratorSource: Sync {
    fn dim(&self) -> usize;
    fn generator(&self, i: usize, t: f64, policy: &NumericPolicy) -> Result<TransferMatrix>;
}

impl GeneratorSource for MapFamily {
    fn dim(&self) -> usize {
        MapFamily::dim(self)
    }

    fn generator(&self, i: usize, _t: f64, policy: &NumericPolicy) -> Result<TransferMatrix> {
        generator_from_maps_with(self, i, policy)
    }
}

/// Adapter for closures `t → generator`.
pub struct FnSource<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> FnSource<F>
where
    F: Fn(f64) -> Result<TransferMatrix> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> GeneratorSource for FnSource<F>
where
    F: Fn(f64) -> Result<TransferMatrix> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn generator(&self, _i: usize, t: f64, _policy: &NumericPolicy) -> Result<TransferMatrix> {
        (self.f)(t)
    }
}

/// Canonical data at one regular grid point, branches in tracked order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPoint {
    pub rates: Vec<f64>,
    /// Column `k` holds the coordinates of `L_k` over `G_1 … G_{N−1}`.
    pub vectors: CMat,
    pub hamiltonian: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    grid: TimeGrid,
    dim: usize,
    points: Vec<Option<TrackedPoint>>,
    reports: Vec<Option<InvertibilityReport>>,
}

impl RateSeries {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of tracked branches, `d² − 1`.
    pub fn branch_count(&self) -> usize {
        self.dim * self.dim - 1
    }

    pub fn point(&self, i: usize) -> Option<&TrackedPoint> {
        self.points[i].as_ref()
    }

    pub fn rates(&self, i: usize) -> Option<&[f64]> {
        self.points[i].as_ref().map(|p| p.rates.as_slice())
    }

    pub fn is_singular(&self, i: usize) -> bool {
        self.points[i].is_none()
    }

    pub fn singular_flags(&self) -> Vec<bool> {
        self.points.iter().map(Option::is_none).collect()
    }

    /// Invertibility reports of the flagged times.
    pub fn flagged(&self) -> impl Iterator<Item = &InvertibilityReport> {
        self.reports.iter().flatten()
    }

    /// One branch over time, `None` at flagged times.
    pub fn branch(&self, k: usize) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.as_ref().map(|p| p.rates[k]))
            .collect()
    }

    /// Largest `|γ|` over the whole series.
    pub fn max_abs_rate(&self) -> f64 {
        self.points
            .iter()
            .flatten()
            .flat_map(|p| p.rates.iter())
            .fold(0.0, |a, r| a.max(r.abs()))
    }

    /// Canonical form at a regular time with every branch, zero rates included.
    pub fn canonical_form(&self, i: usize, basis: &OperatorBasis) -> Option<CanonicalForm> {
        let p = self.points[i].as_ref()?;
        let channels = p
            .rates
            .iter()
            .enumerate()
            .map(|(k, &rate)| Channel {
                rate,
                operator: canonical::channel_operator(basis, p.vectors.column(k).iter().copied()),
            })
            .collect();
        Some(CanonicalForm {
            hamiltonian: p.hamiltonian.clone(),
            channels,
            time: self.grid.points()[i],
        })
    }
}

pub fn canonical_series(source: &dyn GeneratorSource, grid: &TimeGrid) -> Result<RateSeries> {
    canonical_series_with(source, grid, &NumericPolicy::default())
}

/// Canonicalizes at every grid point and tracks branches through time.
///
/// A provider error of class [`Error::Singular`] flags that time; any other
/// error aborts.
pub fn canonical_series_with(
    source: &dyn GeneratorSource,
    grid: &TimeGrid,
    policy: &NumericPolicy,
) -> Result<RateSeries> {
    let dim = source.dim();
    let basis = OperatorBasis::new(dim)?;
    let raw: Vec<Result<Sample>> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, &t)| sample(source, &basis, policy, i, t))
        .collect();

    let mut points = Vec::with_capacity(raw.len());
    let mut reports = Vec::with_capacity(raw.len());
    for r in raw {
        match r? {
            Sample::Regular(p) => {
                points.push(Some(p));
                reports.push(None);
            }
            Sample::Flagged(rep) => {
                points.push(None);
                reports.push(Some(rep));
            }
        }
    }
    track(&mut points, policy);
    Ok(RateSeries {
        grid: grid.clone(),
        dim,
        points,
        reports,
    })
}

enum Sample {
    Regular(TrackedPoint),
    Flagged(InvertibilityReport),
}

fn sample(
    source: &dyn GeneratorSource,
    basis: &OperatorBasis,
    policy: &NumericPolicy,
    i: usize,
    t: f64,
) -> Result<Sample> {
    let s = match source.generator(i, t, policy) {
        Ok(s) => s,
        Err(Error::Singular(rep)) => return Ok(Sample::Flagged(rep)),
        Err(e) => return Err(e),
    };
    if s.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: s.dim(),
        });
    }
    let full = canonical::decompose(&s, basis, policy)?;
    let threshold = policy.zero_rate_threshold(full.dmat_norm);
    let rates = full
        .rates
        .iter()
        .map(|&r| if r.abs() < threshold { 0.0 } else { r })
        .collect();
    Ok(Sample::Regular(TrackedPoint {
        rates,
        vectors: full.vectors,
        hamiltonian: full.hamiltonian,
    }))
}

/// Sequential sweep relabelling each regular point to follow its predecessor.
fn track(points: &mut [Option<TrackedPoint>], policy: &NumericPolicy) {
    let mut prev: Option<usize> = None;
    for i in 0..points.len() {
        if points[i].is_none() {
            prev = None;
            continue;
        }
        if prev.is_none() && i + 1 < points.len() && points[i + 1].is_some() {
            let (head, tail) = points.split_at_mut(i + 1);
            let next = tail[0].as_ref().expect("regular");
            seed(head[i].as_mut().expect("regular"), next, policy);
        }
        if let Some(j) = prev {
            let (head, tail) = points.split_at_mut(i);
            let before = head[j].as_ref().expect("regular");
            let current = tail[0].as_mut().expect("regular");
            follow(before, current, policy);
        }
        prev = Some(i);
    }
}

/// Degenerate blocks `lo..hi` of a descending spectrum.
fn blocks(rates: &[f64], policy: &NumericPolicy) -> Vec<(usize, usize)> {
    let m = rates.len();
    let scale = rates.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let gap = (policy.degeneracy_rel * scale).max(policy.zero_rate_abs);
    let mut out = Vec::new();
    let mut start = 0;
    for l in 1..=m {
        if l == m || (rates[l - 1] - rates[l]).abs() > gap {
            out.push((start, l));
            start = l;
        }
    }
    out
}

/// Fixes the basis inside degenerate blocks of the first point of a run by
/// looking one step ahead, so initial labels do not depend on the frame.
fn seed(cur: &mut TrackedPoint, next: &TrackedPoint, policy: &NumericPolicy) {
    for (lo, hi) in blocks(&cur.rates, policy) {
        if hi - lo < 2 {
            continue;
        }
        let span: Vec<_> = (lo..hi)
            .map(|l| cur.vectors.column(l).into_owned())
            .collect();
        let project = |l: usize| {
            let u = next.vectors.column(l);
            span.iter()
                .fold(nalgebra::DVector::zeros(u.len()), |acc, s| {
                    acc + s * s.dotc(&u)
                })
        };
        let mut order: Vec<(usize, f64)> = (0..next.rates.len())
            .map(|l| (l, project(l).norm()))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut chosen: Vec<usize> = order.iter().take(hi - lo).map(|&(l, _)| l).collect();
        chosen.sort_unstable();
        let mut done: Vec<nalgebra::DVector<C64>> = Vec::new();
        let mut fallback = span.iter();
        for (slot, &l) in (lo..hi).zip(&chosen) {
            let mut v = project(l);
            while !orthonormalize(&mut v, &done) {
                v = fallback.next().expect("block spans its members").clone();
            }
            let z = v.dotc(&next.vectors.column(l));
            if z.norm() > 1e-12 {
                v *= z / z.norm();
            }
            cur.vectors.set_column(slot, &v);
            done.push(v);
        }
    }
}

fn follow(prev: &TrackedPoint, cur: &mut TrackedPoint, policy: &NumericPolicy) {
    let m = cur.rates.len();
    let blocks = blocks(&cur.rates, policy);

    let overlap =
        |a: &CMat, k: usize, b: &CMat, l: usize| -> C64 { a.column(k).dotc(&b.column(l)) };
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| overlap(&prev.vectors, k, &cur.vectors, l).norm_sqr())
                .collect()
        })
        .collect();
    let assignment = max_weight_assignment(&weights);

    let mut vectors = cur.vectors.clone();
    let mut rates = vec![0.0; m];
    for &(lo, hi) in &blocks {
        let members: Vec<usize> = (0..m)
            .filter(|&k| (lo..hi).contains(&assignment[k]))
            .collect();
        if hi - lo > 1 {
            realign(&prev.vectors, &cur.vectors, &members, lo, hi, &mut vectors);
        } else {
            let k = members[0];
            vectors.set_column(k, &cur.vectors.column(lo));
        }
        for &k in &members {
            rates[k] = cur.rates[assignment[k]];
        }
    }
    for k in 0..m {
        let z = overlap(&vectors, k, &prev.vectors, k);
        if z.norm() > 1e-12 {
            let phase = z / z.norm();
            vectors.column_mut(k).iter_mut().for_each(|x| *x *= phase);
        }
    }
    cur.rates = rates;
    cur.vectors = vectors;
}

/// Rotates the degenerate block `lo..hi` of `cur` so that branch `members[i]`
/// is the orthonormalized projection of its previous vector onto the block.
fn realign(prev: &CMat, cur: &CMat, members: &[usize], lo: usize, hi: usize, out: &mut CMat) {
    let span: Vec<_> = (lo..hi).map(|l| cur.column(l).into_owned()).collect();
    let mut done: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut fallback = span.iter();
    for &k in members {
        let u = prev.column(k);
        let mut v = span
            .iter()
            .fold(nalgebra::DVector::zeros(u.len()), |acc, s| {
                acc + s * s.dotc(&u)
            });
        let mut ok = orthonormalize(&mut v, &done);
        while !ok {
            // Projection lost in the complement; take any remaining span vector.
            v = fallback.next().expect("block spans its members").clone();
            ok = orthonormalize(&mut v, &done);
        }
        out.set_column(k, &v);
        done.push(v);
    }
}

fn orthonormalize(v: &mut nalgebra::DVector<C64>, against: &[nalgebra::DVector<C64>]) -> bool {
    for _ in 0..2 {
        for q in against {
            let c = q.dotc(v);
            *v -= q * c;
        }
    }
    let n = v.norm();
    if n < 1e-6 {
        return false;
    }
    *v /= C64::new(n, 0.0);
    true
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method,
/// O(n³)). Returns `assignment[row] = column`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// `f_k(t) = min(γ_k(t), 0)` per time, `None` at flagged times.
pub fn f_of(series: &RateSeries) -> Vec<Option<Vec<f64>>> {
    series
        .points
        .iter()
        .map(|p| {
            p.as_ref()
                .map(|p| p.rates.iter().map(|&r| r.min(0.0)).collect())
        })
        .collect()
}

/// Trapezoidal integrals of `f_k` from the first grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratedF {
    /// `running[i][k]` is `F_k(t_i)`; held constant across excluded intervals.
    pub running: Vec<Vec<f64>>,
    pub finals: Vec<f64>,
    pub sum_running: Vec<f64>,
    pub sum_final: f64,
    /// Maximal intervals skipped because an endpoint is flagged.
    pub excluded: Vec<(f64, f64)>,
}

pub fn integrated_f(series: &RateSeries) -> IntegratedF {
    let f = f_of(series);
    let t = series.times();
    let m = series.branch_count();
    let mut acc = vec![0.0; m];
    let mut running = Vec::with_capacity(t.len());
    let mut excluded: Vec<(f64, f64)> = Vec::new();
    running.push(acc.clone());
    for i in 1..t.len() {
        match (&f[i - 1], &f[i]) {
            (Some(a), Some(b)) => {
                let h = t[i] - t[i - 1];
                for k in 0..m {
                    acc[k] += 0.5 * h * (a[k] + b[k]);
                }
            }
            _ => match excluded.last_mut() {
                Some(last) if last.1 == t[i - 1] => last.1 = t[i],
                _ => excluded.push((t[i - 1], t[i])),
            },
        }
        running.push(acc.clone());
    }
    let sum_running = running.iter().map(|r| r.iter().sum()).collect();
    let sum_final = acc.iter().sum();
    IntegratedF {
        running,
        finals: acc,
        sum_running,
        sum_final,
        excluded,
    }
}

/// Default negativity tolerance `1e−10·max|γ|`.
pub fn default_tol_neg(series: &RateSeries) -> f64 {
    (1e-10 * series.max_abs_rate()).max(f64::MIN_POSITIVE)
}

/// Number of branches with `γ_k < −tol_neg` per time, `None` at flagged times.
pub fn nm_index(series: &RateSeries, tol_neg: f64) -> Vec<Option<usize>> {
    series
        .points
        .iter()
        .map(|p| {
            p.as_ref()
                .map(|p| p.rates.iter().filter(|&&r| r < -tol_neg).count())
        })
        .collect()
}

/// Measures that coincide with state-distinguishability ones when a single
/// fixed channel carries all the dissipation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalents {
    pub branch: usize,
    /// `−γ(t)·exp(−∫₀ᵗ γ)`.
    pub trace_distance: Vec<f64>,
    /// `−2∫ min(γ, 0)`.
    pub entanglement: f64,
}

pub fn single_channel_equivalents(series: &RateSeries) -> Result<Equivalents> {
    if series.points.iter().any(Option::is_none) {
        return Err(Error::NotApplicable(
            "series contains singular times".into(),
        ));
    }
    let points: Vec<&TrackedPoint> = series.points.iter().flatten().collect();
    let active: Vec<usize> = (0..series.branch_count())
        .filter(|&k| points.iter().any(|p| p.rates[k] != 0.0))
        .collect();
    let branch = match active.as_slice() {
        [k] => *k,
        [] => return Err(Error::NotApplicable("no dissipative channel".into())),
        _ => {
            return Err(Error::NotApplicable(format!(
                "{} channels carry nonzero rates",
                active.len()
            )))
        }
    };
    let mut reference: Option<nalgebra::DVector<C64>> = None;
    for p in points.iter().filter(|p| p.rates[branch] != 0.0) {
        let v = p.vectors.column(branch).into_owned();
        match &reference {
            None => reference = Some(v),
            Some(r) => {
                let z = r.dotc(&v);
                let phase = if z.norm() > 0.0 {
                    z / z.norm()
                } else {
                    C64::new(1.0, 0.0)
                };
                let drift = (&v - r * phase).norm();
                if drift >= CONSTANT_CHANNEL_DRIFT {
                    return Err(Error::NotApplicable(format!(
                        "channel operator drifts by {drift:e}"
                    )));
                }
            }
        }
    }

    let t = series.times();
    let gamma: Vec<f64> = points.iter().map(|p| p.rates[branch]).collect();
    let mut integral = 0.0;
    let mut negative = 0.0;
    let mut trace_distance = Vec::with_capacity(t.len());
    trace_distance.push(-gamma[0]);
    for i in 1..t.len() {
        let h = t[i] - t[i - 1];
        integral += 0.5 * h * (gamma[i - 1] + gamma[i]);
        negative += 0.5 * h * (gamma[i - 1].min(0.0) + gamma[i].min(0.0));
        trace_distance.push(-gamma[i] * (-integral).exp());
    }
    Ok(Equivalents {
        branch,
        trace_distance,
        entanglement: -2.0 * negative,
    })
}

/// Everything derived from one rate series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub f_series: Vec<Option<Vec<f64>>>,
    pub f_sum_series: Vec<Option<f64>>,
    pub integrated: IntegratedF,
    pub tol_neg: f64,
    pub nm_index_series: Vec<Option<usize>>,
    /// `None` when the single-channel preconditions fail.
    pub equivalents: Option<Equivalents>,
}

impl MeasureReport {
    pub fn new(series: &RateSeries, tol_neg: Option<f64>) -> Self {
        let tol_neg = tol_neg.unwrap_or_else(|| default_tol_neg(series));
        let f_series = f_of(series);
        let f_sum_series = f_series
            .iter()
            .map(|f| f.as_ref().map(|f| f.iter().sum()))
            .collect();
        Self {
            f_series,
            f_sum_series,
            integrated: integrated_f(series),
            tol_neg,
            nm_index_series: nm_index(series, tol_neg),
            equivalents: single_channel_equivalents(series).ok(),
        }
    }

    pub fn f_values(&self) -> &[f64] {
        &self.integrated.finals
    }

    pub fn f_sum(&self) -> f64 {
        self.integrated.sum_final
    }
}
