//! Measure comparison: volume doubling, Poincaré constants, differentiation
//! and maximal functions, concentration of energy measures, heat-kernel
//! envelopes.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::chainmetric::FiniteMetricSpace;
use crate::error::{LabError, Result};
use crate::forms::{vertex_energy_measure, QuadraticForm};
use crate::measure::{CellMeasure, VertexMeasure};
use crate::model::GasketModel;
use crate::scaling::{phi_eval, ScaleFunction};
use crate::stochastic::{build_walk, heat_kernel_rows};

/// Ball scans use every center up to this many points.
pub const ALL_CENTERS_LIMIT: usize = 2000;

/// Default tail for [`concentration_profile`].
pub const DEFAULT_TAIL: f64 = 0.01;

/// Centers scanned for a space: all of them, or an evenly strided subset of
/// [`ALL_CENTERS_LIMIT`] points.
pub fn scan_centers(n: usize) -> Vec<usize> {
    if n <= ALL_CENTERS_LIMIT {
        (0..n).collect()
    } else {
        (0..ALL_CENTERS_LIMIT).map(|i| i * n / ALL_CENTERS_LIMIT).collect()
    }
}

/// `r, 2r, 4r, ...` from the resolution up to (and including) the first radius
/// at or above the diameter.
pub fn resolution_radii(space: &FiniteMetricSpace) -> Vec<f64> {
    let diameter = space.diameter();
    let mut r = space.resolution();
    let mut out = vec![r];
    while r < diameter {
        r *= 2.0;
        out.push(r);
    }
    out
}

/// `max m(B(x, 2r)) / m(B(x, r))` over scanned centers and the given radii.
pub fn vd_constant(space: &FiniteMetricSpace, radii: &[f64]) -> Result<f64> {
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    scan_centers(space.len())
        .into_par_iter()
        .map(|x| -> Result<f64> {
            radii.iter().try_fold(1.0f64, |acc, &r| {
                let small = space.ball_mass(x, r);
                if !(small > 0.0) {
                    return Err(LabError::EmptyBall { center: x, radius: r });
                }
                Ok(acc.max(space.ball_mass(x, 2.0 * r) / small))
            })
        })
        .try_reduce(|| 1.0, |a, b| Ok(a.max(b)))
}

/// Enlargement of the energy ball in the Poincaré inequality.
pub const POINCARE_ENLARGEMENT: f64 = 2.0;

/// `max int_{B(x,r)} |f - f_B|^2 dm / (Psi(r) Gamma(f)(B(x, 2r)))` over
/// scanned centers and sample functions. Samples with zero energy are skipped.
pub fn poincare_constant<P: ScaleFunction + Sync + ?Sized>(
    form: &QuadraticForm<f64>,
    space: &FiniteMetricSpace,
    psi: &P,
    r: f64,
    samples: &[Vec<f64>],
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    let centers = scan_centers(space.len());
    let mut worst = 0.0f64;
    for f in samples {
        let gamma = vertex_energy_measure(form, f)?;
        if gamma.total() <= 0.0 {
            continue;
        }
        let w = centers
            .par_iter()
            .map(|&x| {
                let ball = space.ball(x, r);
                let mass: f64 = ball.iter().map(|&v| space.mass(v)).sum();
                let mean = ball.iter().map(|&v| f[v] * space.mass(v)).sum::<f64>() / mass;
                let variance: f64 = ball.iter().map(|&v| (f[v] - mean).powi(2) * space.mass(v)).sum();
                if variance == 0.0 {
                    return 0.0;
                }
                let energy = gamma.mass_of(&space.ball(x, POINCARE_ENLARGEMENT * r));
                variance / (psi.psi(r) * energy)
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(w);
    }
    Ok(worst)
}

fn check_lengths(space: &FiniteMetricSpace, nu: &VertexMeasure<f64>, m: &VertexMeasure<f64>) -> Result<()> {
    for len in [nu.len(), m.len()] {
        if len != space.len() {
            return Err(LabError::DimensionMismatch {
                expected: space.len(),
                got: len,
            });
        }
    }
    Ok(())
}

fn ball_ratio(space: &FiniteMetricSpace, nu: &VertexMeasure<f64>, m: &VertexMeasure<f64>, x: usize, r: f64) -> Result<f64> {
    let ball = space.ball(x, r);
    let mass = m.mass_of(&ball);
    if !(mass > 0.0) {
        return Err(LabError::EmptyBall { center: x, radius: r });
    }
    Ok(nu.mass_of(&ball) / mass)
}

/// `nu(B(x, r)) / m(B(x, r))` for each radius.
pub fn differentiation_ratios(
    space: &FiniteMetricSpace,
    nu: &VertexMeasure<f64>,
    m: &VertexMeasure<f64>,
    x: usize,
    radii: &[f64],
) -> Result<Vec<f64>> {
    check_lengths(space, nu, m)?;
    radii.iter().map(|&r| ball_ratio(space, nu, m, x, r)).collect()
}

/// `m`-weighted median over all centers of `nu(B(x, r)) / m(B(x, r))`.
pub fn median_ratio(space: &FiniteMetricSpace, nu: &VertexMeasure<f64>, m: &VertexMeasure<f64>, r: f64) -> Result<f64> {
    check_lengths(space, nu, m)?;
    let mut ratios: Vec<(f64, f64)> = (0..space.len())
        .into_par_iter()
        .map(|x| Ok((ball_ratio(space, nu, m, x, r)?, m.masses()[x])))
        .collect::<Result<_>>()?;
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * m.total();
    let mut acc = 0.0;
    for (q, w) in &ratios {
        acc += w;
        if acc >= half {
            return Ok(*q);
        }
    }
    Ok(ratios.last().map_or(0.0, |p| p.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalReport {
    /// `max_lambda lambda m{M nu > lambda} / nu(X)`.
    pub worst: f64,
    /// Doubling constant over the radii used by the maximal function and their doubles.
    pub doubling: f64,
    /// `doubling^2`.
    pub bound: f64,
    pub per_lambda: Vec<(f64, f64)>,
}

impl MaximalReport {
    pub fn holds(&self) -> bool {
        self.worst <= self.bound
    }
}

/// Weak-type check for the discrete maximal function
/// `M nu(x) = max_r nu(B(x, r)) / m(B(x, r))` over [`resolution_radii`].
pub fn maximal_inequality_check(
    space: &FiniteMetricSpace,
    nu: &VertexMeasure<f64>,
    m: &VertexMeasure<f64>,
    lambdas: &[f64],
) -> Result<MaximalReport> {
    check_lengths(space, nu, m)?;
    let total = nu.total();
    if !(total > 0.0) {
        return Err(LabError::Domain("maximal inequality needs a nonzero measure".into()));
    }
    let radii = resolution_radii(space);
    let maximal: Vec<f64> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            radii.iter().try_fold(0.0f64, |acc, &r| Ok(acc.max(ball_ratio(space, nu, m, x, r)?)))
        })
        .collect::<Result<_>>()?;
    let mut with_doubles = radii.clone();
    with_doubles.extend(radii.iter().map(|r| 2.0 * r));
    with_doubles.extend(radii.iter().map(|r| 4.0 * r));
    let doubling = vd_constant(space, &with_doubles)?;
    let per_lambda: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&lambda| {
            let set: Vec<usize> = (0..space.len()).filter(|&x| maximal[x] > lambda).collect();
            (lambda, lambda * m.mass_of(&set) / total)
        })
        .collect();
    let worst = per_lambda.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(MaximalReport {
        worst,
        doubling,
        bound: doubling * doubling,
        per_lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationProfile {
    pub depth: usize,
    pub tail: f64,
    /// Normalized densities `Gamma^(w) / m^(w)`, descending.
    pub densities: Vec<f64>,
    /// `(cumulative m, cumulative Gamma)` along the descending order, from `(0, 0)`.
    pub lorenz: Vec<(f64, f64)>,
    /// Least `m`-mass carrying `1 - tail` of `Gamma`, splitting the last cell.
    pub minimal_mass: f64,
    /// `(1/n) sum_w Gamma^(w) ln(Gamma^(w) / m^(w))`, the plain divergence at depth 0.
    pub entropy_rate: f64,
}

pub fn concentration_profile(gamma: &CellMeasure<f64>, m: &CellMeasure<f64>, tail: f64) -> Result<ConcentrationProfile> {
    if gamma.len() != m.len() || gamma.depth() != m.depth() {
        return Err(LabError::DimensionMismatch {
            expected: m.len(),
            got: gamma.len(),
        });
    }
    if !(tail > 0.0 && tail < 1.0) {
        return Err(LabError::Domain(format!("tail must lie in (0, 1), got {tail}")));
    }
    if !(gamma.total() > 0.0) {
        return Err(LabError::Domain("energy measure has zero total mass".into()));
    }
    if !(m.total() > 0.0) {
        return Err(LabError::Domain("reference measure has zero total mass".into()));
    }
    let g = gamma.normalized();
    let mm = m.normalized();
    let mut cells: Vec<(f64, f64)> = g
        .masses()
        .iter()
        .zip(mm.masses())
        .map(|(&a, &b)| (a, b))
        .collect();
    let density = |c: &(f64, f64)| if c.1 > 0.0 { c.0 / c.1 } else { f64::INFINITY };
    cells.sort_by(|a, b| density(b).total_cmp(&density(a)));

    let target = 1.0 - tail;
    let mut lorenz = Vec::with_capacity(cells.len() + 1);
    lorenz.push((0.0, 0.0));
    let (mut cm, mut cg) = (0.0, 0.0);
    let mut minimal_mass = None;
    for c in &cells {
        if minimal_mass.is_none() && cg + c.0 >= target {
            minimal_mass = Some(cm + c.1 * (target - cg) / c.0);
        }
        cm += c.1;
        cg += c.0;
        lorenz.push((cm, cg));
    }
    let divergence: f64 = cells
        .iter()
        .filter(|c| c.0 > 0.0)
        .map(|c| c.0 * (c.0 / c.1).ln())
        .sum();
    Ok(ConcentrationProfile {
        depth: gamma.depth(),
        tail,
        densities: cells.iter().map(density).collect(),
        lorenz,
        minimal_mass: minimal_mass.unwrap_or(cm).min(1.0),
        entropy_rate: divergence.max(0.0) / gamma.depth().max(1) as f64,
    })
}

/// One `(t, x, y)` triple of a discrete heat kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelSample {
    pub depth: usize,
    pub time: f64,
    pub x: usize,
    pub y: usize,
    pub distance: f64,
    /// `p_t(x, y)`.
    pub density: f64,
    /// `m(B(x, Psi^{-1}(t)))`.
    pub volume: f64,
}

/// Heat-kernel samples of the lazy walk on `model` from every vertex at the
/// requested continuum times.
pub fn sample_heat_kernel(model: &GasketModel, laziness: f64, times: &[f64]) -> Result<Vec<HeatKernelSample>> {
    let walk = build_walk(&model.form, laziness)?;
    let space = model.space()?;
    let steps: Vec<usize> = times
        .iter()
        .map(|&t| walk.steps_for_time(t, model.time_scale()))
        .collect();
    let actual: Vec<f64> = steps
        .iter()
        .map(|&k| walk.continuum_time(k, model.time_scale()))
        .collect();
    let depth = model.depth();
    let rows: Vec<Vec<HeatKernelSample>> = (0..walk.len())
        .into_par_iter()
        .map(|x| -> Result<Vec<HeatKernelSample>> {
            let kernels = heat_kernel_rows(&walk, x, &steps, &model.vertex_mass)?;
            let mut out = Vec::with_capacity(kernels.len() * walk.len());
            for (row, &t) in kernels.iter().zip(&actual) {
                let volume = space.ball_mass(x, model.profile.psi_inverse(t));
                for (y, &p) in row.iter().enumerate() {
                    out.push(HeatKernelSample {
                        depth,
                        time: t,
                        x,
                        y,
                        distance: space.distance(x, y),
                        density: p,
                        volume,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Near-diagonal window `d <= delta Psi^{-1}(t)`.
    pub delta: f64,
    /// `min p_t V` over the window.
    pub c3: f64,
    /// Smallest and largest window minimum over `(depth, t)` groups.
    pub c3_group_range: (f64, f64),
    /// Decay rate in `exp(-c1 Phi(c2 d, t))`.
    pub c1: f64,
    pub c2: f64,
    /// Prefactor of the upper envelope.
    pub big_c1: f64,
    /// Least-squares slope of `ln(p_t V)` against `Phi(c2 d, t)` off the diagonal.
    pub slope: f64,
    /// Share of consecutive distance shells, per `(depth, t, x)`, along which the
    /// largest `ln(p_t V)` does not increase.
    pub monotone_fraction: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub samples: usize,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.c3 > 0.0 && self.c1 > 0.0 && self.lower_violations == 0 && self.upper_violations == 0
    }
}

type GroupKey = (usize, u64);

fn group_key(s: &HeatKernelSample) -> GroupKey {
    (s.depth, s.time.to_bits())
}

/// Fits `c3` over `d <= delta Psi^{-1}(t)`, and `c1`, `C1` with `c2 = 1` by
/// regressing `ln(p_t V)` on `Phi(d, t)`, then counts violations of
/// `p_t V >= c3` (near diagonal) and `p_t V <= C1 exp(-c1 Phi(c2 d, t))`.
pub fn heat_kernel_envelope_check<P: ScaleFunction + Sync + ?Sized>(
    samples: &[HeatKernelSample],
    psi: &P,
    delta: f64,
) -> Result<EnvelopeReport> {
    if samples.is_empty() {
        return Err(LabError::Domain("no heat-kernel samples".into()));
    }
    let c2 = 1.0;
    let mut keys: Vec<(u64, u64)> = samples
        .iter()
        .map(|s| (s.distance.to_bits(), s.time.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let phi: HashMap<(u64, u64), f64> = keys
        .par_iter()
        .map(|&(d, t)| {
            let (d, t) = (f64::from_bits(d), f64::from_bits(t));
            let value = if d == 0.0 { Ok(0.0) } else { phi_eval(psi, c2 * d, t) };
            value.map(|v| ((d.to_bits(), t.to_bits()), v))
        })
        .collect::<Result<_>>()?;
    let phi_of = |s: &HeatKernelSample| phi[&(s.distance.to_bits(), s.time.to_bits())];
    let scaled = |s: &HeatKernelSample| s.density * s.volume;

    let radius: HashMap<u64, f64> = keys
        .iter()
        .map(|&(_, t)| (t, psi.psi_inverse(f64::from_bits(t))))
        .collect();
    let window = |s: &HeatKernelSample| s.distance <= delta * radius[&s.time.to_bits()];
    let mut group_min: HashMap<GroupKey, f64> = HashMap::new();
    for s in samples.iter().filter(|s| window(s)) {
        let e = group_min.entry(group_key(s)).or_insert(f64::INFINITY);
        *e = e.min(scaled(s));
    }
    let c3 = group_min.values().copied().fold(f64::INFINITY, f64::min);
    let c3_group_range = (c3, group_min.values().copied().fold(0.0, f64::max));
    let lower_violations = samples.iter().filter(|s| window(s) && !(scaled(s) >= c3)).count();

    let tail: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.distance > 0.0 && s.density > 0.0)
        .map(|s| (phi_of(s), scaled(s).ln()))
        .collect();
    let slope = least_squares_slope(&tail);
    let c1 = (-slope).max(0.0);
    let big_c1 = samples
        .iter()
        .map(|s| scaled(s) * (c1 * phi_of(s)).exp())
        .fold(0.0, f64::max);
    let upper_violations = samples
        .iter()
        .filter(|s| scaled(s) > big_c1 * (-c1 * phi_of(s)).exp() * (1.0 + 1e-12))
        .count();

    let mut shells: HashMap<(GroupKey, usize), Vec<(f64, f64)>> = HashMap::new();
    for s in samples.iter().filter(|s| s.density > 0.0) {
        shells
            .entry((group_key(s), s.x))
            .or_default()
            .push((s.distance, scaled(s).ln()));
    }
    let (mut steps, mut monotone) = (0usize, 0usize);
    for list in shells.values_mut() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Vec<(f64, f64)> = Vec::new();
        for &(d, v) in list.iter() {
            match best.last_mut() {
                Some(last) if last.0 == d => last.1 = last.1.max(v),
                _ => best.push((d, v)),
            }
        }
        for pair in best.windows(2) {
            steps += 1;
            if pair[1].1 <= pair[0].1 + 1e-12 {
                monotone += 1;
            }
        }
    }
    Ok(EnvelopeReport {
        delta,
        c3,
        c3_group_range,
        c1,
        c2,
        big_c1,
        slope,
        monotone_fraction: if steps == 0 { 1.0 } else { monotone as f64 / steps as f64 },
        lower_violations,
        upper_violations,
        samples: samples.len(),
    })
}

/// Slope of the least-squares line through `points`; zero when degenerate.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
