//! Walk dimensions, space-time scale functions and the regime test.
//!
//! `Psi_l(s) = (L_n s)^{beta_{l_n}} / T_n` for `1/L_n <= s <= 1/L_{n-1}` and
//! `s^{beta_min}` for `s >= 1`, with `T_n = M_n / R_n`. All evaluation goes
//! through `ln Psi`, which is piecewise linear in `ln s`; this keeps the
//! regime scan over hundreds of octaves free of underflow.

use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::forms::resistance_scale;
use crate::geometry::{simplex_count, GasketSpec};
use crate::scalar::Scalar;
use crate::Rational;

/// Golden-section iteration cap for [`phi_eval`].
pub const PHI_MAX_ITERATIONS: usize = 200;

/// Threshold used by [`classify_regime`] for both limit quantities.
pub const REGIME_THRESHOLD: f64 = 1e-3;

/// Octaves scanned by [`classify_regime`] in `lambda` and in `r`.
pub const REGIME_OCTAVES: u32 = 256;

/// A continuous strictly increasing `Psi: [0, inf) -> [0, inf)` with `Psi(0) = 0`.
pub trait ScaleFunction {
    /// `ln Psi(s)` for `s > 0`.
    fn ln_psi(&self, s: f64) -> f64;

    fn psi(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            self.ln_psi(s).exp()
        }
    }

    /// The `s` with `Psi(s) = t`, found by bisection in `ln s`.
    fn psi_inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let target = t.ln();
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while self.ln_psi(lo.exp()) > target && lo > -700.0 {
            lo *= 2.0;
        }
        while self.ln_psi(hi.exp()) < target && hi < 700.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_psi(mid.exp()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

/// `Psi(r) = r^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub beta: f64,
}

impl ScaleFunction for PowerLaw {
    fn ln_psi(&self, s: f64) -> f64 {
        self.beta * s.ln()
    }

    fn psi_inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(1.0 / self.beta)
        }
    }
}

/// `beta_l` together with the elementary comparison `#S_l / r_l > l^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkDimension {
    pub dimension: usize,
    pub level: u32,
    pub resistance_scale: Rational,
    /// `#S_l / r_l`, exact.
    pub growth: Rational,
    pub beta: f64,
}

/// `beta_l = ln(#S_l / r_l) / ln l`, checked to exceed 2 both through the
/// logarithm and through the exact inequality `#S_l / r_l > l^2`.
pub fn walk_dimension(dimension: usize, level: u32) -> Result<WalkDimension> {
    let r = resistance_scale::<Rational>(dimension, level)?;
    let growth = Rational::from_count(simplex_count(level, dimension)?) / r.clone();
    let beta = ratio_ln(&growth) / (level as f64).ln();
    let square = Rational::from_count(level as u128 * level as u128);
    if beta <= 2.0 || growth <= square {
        return Err(LabError::WalkDimension(beta));
    }
    Ok(WalkDimension {
        dimension,
        level,
        resistance_scale: r,
        growth,
        beta,
    })
}

fn ratio_ln(x: &Rational) -> f64 {
    let num = x.numer().to_f64().unwrap_or(f64::INFINITY);
    let den = x.denom().to_f64().unwrap_or(f64::INFINITY);
    if num.is_finite() && den.is_finite() {
        (num / den).ln()
    } else {
        x.as_f64().ln()
    }
}

/// `L_n`, `T_n`, `beta_{l_n}` per depth and the resulting `Psi_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingProfile {
    dimension: usize,
    levels: Vec<u32>,
    /// `beta_{l_n}` for `n = 1..=depth` (index `n - 1`).
    betas: Vec<f64>,
    /// `ln L_n` for `n = 0..=depth`.
    ln_side: Vec<f64>,
    /// `ln T_n` for `n = 0..=depth`.
    ln_time: Vec<f64>,
    beta_min: f64,
    beta_max: f64,
}

impl ScalingProfile {
    pub fn new(spec: &GasketSpec) -> Result<Self> {
        let dimension = spec.dimension();
        let mut cache: Vec<(u32, WalkDimension)> = Vec::new();
        let mut betas = Vec::with_capacity(spec.max_depth());
        let mut ln_side = vec![0.0];
        let mut ln_time = vec![0.0];
        for &l in spec.levels() {
            let w = match cache.iter().find(|(k, _)| *k == l) {
                Some((_, w)) => w.clone(),
                None => {
                    let w = walk_dimension(dimension, l)?;
                    cache.push((l, w.clone()));
                    w
                }
            };
            let ln_l = (l as f64).ln();
            betas.push(w.beta);
            ln_side.push(ln_side.last().expect("non-empty") + ln_l);
            ln_time.push(ln_time.last().expect("non-empty") + w.beta * ln_l);
        }
        let beta_min = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let beta_max = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            dimension,
            levels: spec.levels().to_vec(),
            betas,
            ln_side,
            ln_time,
            beta_min,
            beta_max,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `beta_{l_n}` for `1 <= n <= depth`.
    pub fn beta_at(&self, n: usize) -> f64 {
        self.betas[n - 1]
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn side(&self, n: usize) -> f64 {
        self.ln_side[n].exp()
    }

    /// `T_n = M_n / R_n`.
    pub fn time_scale(&self, n: usize) -> f64 {
        self.ln_time[n].exp()
    }

    /// Breakpoints `1/L_n`, `n = 0..=depth`.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.ln_side.iter().map(|l| (-l).exp()).collect()
    }

    /// `ln Psi` on the branch belonging to depth `n` (used for continuity checks).
    pub fn ln_branch(&self, n: usize, s: f64) -> f64 {
        self.betas[n - 1] * (self.ln_side[n] + s.ln()) - self.ln_time[n]
    }
}

impl ScaleFunction for ScalingProfile {
    fn ln_psi(&self, s: f64) -> f64 {
        let u = s.ln();
        if u >= 0.0 {
            return self.beta_min * u;
        }
        // the branch n with -ln L_n <= u <= -ln L_{n-1}, or the last one below
        let depth = self.depth();
        let n = (1..=depth)
            .find(|&n| u >= -self.ln_side[n])
            .unwrap_or(depth);
        self.ln_branch(n, s)
    }
}

/// `Psi(s)`, rejecting negative or non-finite lengths.
pub fn psi_eval<P: ScaleFunction + ?Sized>(psi: &P, s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(LabError::Domain(format!("Psi needs a finite s >= 0, got {s}")));
    }
    Ok(psi.psi(s))
}

/// `Phi(R, t) = sup_{r > 0} (R/r - t/Psi(r))`.
///
/// The maximizer is bracketed by a doubling walk in `ln r` and refined by
/// golden-section search.
pub fn phi_eval<P: ScaleFunction + ?Sized>(psi: &P, big_r: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(big_r >= 0.0) {
        return Err(LabError::Domain(format!(
            "Phi needs t > 0 and R >= 0, got R = {big_r}, t = {t}"
        )));
    }
    if big_r == 0.0 {
        return Ok(0.0);
    }
    let g = |u: f64| big_r * (-u).exp() - t * (-psi.ln_psi(u.exp())).exp();

    // three-point bracket around u0, then walk uphill with doubling steps
    let u0 = big_r.ln();
    let (left, mid, right) = (g(u0 - 1.0), g(u0), g(u0 + 1.0));
    let (a, gb, c) = if mid >= left && mid >= right {
        (u0 - 1.0, mid, u0 + 1.0)
    } else {
        let dir = if right > left { 1.0 } else { -1.0 };
        let (mut a, mut b, mut gb) = (u0, u0 + dir, if right > left { right } else { left });
        let mut step = 1.0;
        let mut c = b + dir * 2.0 * step;
        let mut gc = g(c);
        let mut iterations = 0;
        while gc >= gb {
            iterations += 1;
            if iterations > PHI_MAX_ITERATIONS || !c.is_finite() || c.abs() > 700.0 {
                return Err(LabError::NonConvergence {
                    solver: "Phi bracketing",
                    residual: gc,
                    iterations,
                });
            }
            step *= 2.0;
            a = b;
            b = c;
            gb = gc;
            c = b + dir * 2.0 * step;
            gc = g(c);
        }
        (a, gb, c)
    };
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..PHI_MAX_ITERATIONS {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    Ok(g1.max(g2).max(gb).max(0.0))
}

/// `Phi` for `Psi(r) = r^beta`, `beta > 1`.
pub fn phi_closed_form(beta: f64, big_r: f64, t: f64) -> f64 {
    let e = beta / (beta - 1.0);
    (beta - 1.0) * beta.powf(-e) * (big_r.powf(beta) / t).powf(1.0 / (beta - 1.0))
}

/// Empirical regularity exponents and constant over a radius grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub beta0: f64,
    pub beta1: f64,
    pub constant: f64,
}

/// Minimum ratio `R/r` of the pairs that determine the exponents.
const LONG_RANGE_RATIO: f64 = 100.0;

/// Fits `C^{-1} (R/r)^{beta0} <= Psi(R)/Psi(r) <= C (R/r)^{beta1}` over all
/// grid pairs. The exponents are the extreme average slopes over long-range
/// pairs and `C >= 1` absorbs the rest.
pub fn verify_regularity<P: ScaleFunction + ?Sized>(psi: &P, grid: &[f64]) -> Result<RegularityEstimate> {
    let mut radii: Vec<f64> = grid.iter().copied().filter(|r| *r > 0.0).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    radii.dedup();
    let (Some(&first), Some(&last)) = (radii.first(), radii.last()) else {
        return Err(LabError::Domain("empty radius grid".into()));
    };
    if last / first < 1e4 {
        return Err(LabError::Domain(format!(
            "radius grid spans {:.2} decades, at least 4 are needed",
            (last / first).log10()
        )));
    }
    let ln_psi: Vec<f64> = radii.iter().map(|&r| psi.ln_psi(r)).collect();
    let mut beta0 = f64::INFINITY;
    let mut beta1 = f64::NEG_INFINITY;
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            let ln_ratio = (radii[j] / radii[i]).ln();
            let rise = ln_psi[j] - ln_psi[i];
            if !(rise > 0.0) {
                return Err(LabError::Regularity {
                    r: radii[i],
                    big_r: radii[j],
                });
            }
            if ln_ratio >= LONG_RANGE_RATIO.ln() {
                beta0 = beta0.min(rise / ln_ratio);
                beta1 = beta1.max(rise / ln_ratio);
            }
        }
    }
    let mut ln_c: f64 = 0.0;
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            let ln_ratio = (radii[j] / radii[i]).ln();
            let rise = ln_psi[j] - ln_psi[i];
            ln_c = ln_c.max(beta0 * ln_ratio - rise).max(rise - beta1 * ln_ratio);
        }
    }
    Ok(RegularityEstimate {
        beta0,
        beta1,
        constant: ln_c.exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Singular,
    Gaussian,
    Inconclusive,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Singular => "singular",
            Regime::Gaussian => "gaussian",
            Regime::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Grid estimate of `liminf_lambda liminf_r lambda^2 Psi(r/lambda) / Psi(r)`.
    pub double_liminf: f64,
    /// Grid estimate of `limsup_r Psi(r) / r^2`.
    pub limsup_ratio: f64,
    pub threshold: f64,
    pub octaves: u32,
}

/// Finite-grid version of the two limit conditions separating the regimes.
///
/// Both limits are taken over the upper half of dyadic grids
/// `lambda = 2^j`, `r = 2^{-k}`, `1 <= j, k <= REGIME_OCTAVES`.
pub fn classify_regime<P: ScaleFunction + ?Sized>(psi: &P) -> RegimeReport {
    let ln2 = std::f64::consts::LN_2;
    let half = REGIME_OCTAVES / 2;
    let tail = half..=REGIME_OCTAVES;

    let mut double_liminf = f64::INFINITY;
    for j in tail.clone() {
        let ln_lambda = j as f64 * ln2;
        let mut inner = f64::INFINITY;
        for k in tail.clone() {
            let ln_r = -(k as f64) * ln2;
            let v = 2.0 * ln_lambda + psi.ln_psi((ln_r - ln_lambda).exp()) - psi.ln_psi(ln_r.exp());
            inner = inner.min(v);
        }
        double_liminf = double_liminf.min(inner);
    }
    let double_liminf = double_liminf.exp();

    let limsup_ratio = tail
        .map(|k| {
            let ln_r = -(k as f64) * ln2;
            psi.ln_psi(ln_r.exp()) - 2.0 * ln_r
        })
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();

    let regime = if double_liminf < REGIME_THRESHOLD && limsup_ratio < REGIME_THRESHOLD {
        Regime::Singular
    } else if limsup_ratio >= REGIME_THRESHOLD && double_liminf >= REGIME_THRESHOLD {
        Regime::Gaussian
    } else {
        Regime::Inconclusive
    };
    RegimeReport {
        regime,
        double_liminf,
        limsup_ratio,
        threshold: REGIME_THRESHOLD,
        octaves: REGIME_OCTAVES,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sg_beta() -> f64 {
        5f64.log2()
    }

    #[test]
    fn sg_walk_dimension() {
        let w = walk_dimension(2, 2).unwrap();
        assert_eq!(w.resistance_scale, Rational::ratio(3, 5));
        assert_eq!(w.growth, Rational::from_int(5));
        assert_relative_eq!(w.beta, sg_beta(), epsilon = 1e-12);
    }

    #[test]
    fn constant_profile_is_power_law() {
        for l in [2u32, 3] {
            let spec = GasketSpec::constant(2, l, 5).unwrap();
            let p = ScalingProfile::new(&spec).unwrap();
            let beta = p.beta_at(1);
            for s in [1e-6, 1e-3, 0.01, 0.3, 1.0, 4.0] {
                assert_relative_eq!(p.psi(s), s.powf(beta), max_relative = 1e-12);
            }
            assert_eq!(p.psi(0.0), 0.0);
        }
    }

    #[test]
    fn breakpoints_and_continuity() {
        let spec = GasketSpec::new(2, vec![2, 3, 4, 2]).unwrap();
        let p = ScalingProfile::new(&spec).unwrap();
        let bps = p.breakpoints();
        for n in 1..=p.depth() {
            assert_relative_eq!(p.psi(bps[n]), 1.0 / p.time_scale(n), max_relative = 1e-12);
            // both branches meeting at 1/L_{n-1}
            if n > 1 {
                let left = p.ln_branch(n, bps[n - 1]);
                let right = p.ln_branch(n - 1, bps[n - 1]);
                assert!((left - right).abs() < 1e-12);
            }
        }
        assert!(p.ln_branch(1, 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_special_values() {
        let quad = PowerLaw { beta: 2.0 };
        assert_relative_eq!(phi_eval(&quad, 2.0, 1.0).unwrap(), 1.0, max_relative = 1e-10);
        assert_eq!(phi_eval(&quad, 0.0, 3.0).unwrap(), 0.0);
        assert!(phi_eval(&quad, 1.0, 0.0).is_err());
        assert_relative_eq!(phi_closed_form(2.0, 2.0, 1.0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn phi_matches_closed_form() {
        for beta in [2.0, 2.5, sg_beta()] {
            let psi = PowerLaw { beta };
            for &r in &[0.05, 0.3, 1.0, 4.0] {
                for &t in &[0.01, 0.2, 1.0, 7.0] {
                    let num = phi_eval(&psi, r, t).unwrap();
                    let exact = phi_closed_form(beta, r, t);
                    assert_relative_eq!(num, exact, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn phi_maximizer_near_start() {
        // maximizer lies just above ln R while g(ln R + 1) < g(ln R)
        let psi = PowerLaw { beta: 2.5 };
        let (r, t) = (10f64.powf(-0.4), 10f64.powf(-1.2));
        assert_relative_eq!(phi_eval(&psi, r, t).unwrap(), phi_closed_form(2.5, r, t), max_relative = 1e-10);
        let grid: Vec<f64> = (0..10).map(|i| 10f64.powf(-2.0 + 0.4 * i as f64)).collect();
        for beta in [2.0, 2.5, sg_beta()] {
            let psi = PowerLaw { beta };
            for &r in &grid {
                for &t in &grid {
                    assert_relative_eq!(phi_eval(&psi, r, t).unwrap(), phi_closed_form(beta, r, t), max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn regularity_of_power_law_and_mixed() {
        let grid: Vec<f64> = (0..=60).map(|k| 2f64.powi(-k / 3) * 8.0).collect();
        let est = verify_regularity(&PowerLaw { beta: 2.5 }, &grid).unwrap();
        assert_relative_eq!(est.beta0, 2.5, epsilon = 1e-12);
        assert_relative_eq!(est.beta1, 2.5, epsilon = 1e-12);
        assert!(est.constant >= 1.0 && est.constant < 1.0 + 1e-9);

        let spec = GasketSpec::new(2, vec![2, 3, 2, 3, 2, 3, 2, 3]).unwrap();
        let p = ScalingProfile::new(&spec).unwrap();
        let est = verify_regularity(&p, &grid).unwrap();
        let (b2, b3) = (p.beta_at(1), p.beta_at(2));
        assert!(est.beta0 >= b2.min(b3) - 1e-12 && est.beta1 <= b2.max(b3) + 1e-12);
        assert!(est.constant >= 1.0);

        assert!(verify_regularity(&p, &[0.1, 0.5, 1.0]).is_err());
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&PowerLaw { beta: 2.5 }).regime, Regime::Singular);
        assert_eq!(classify_regime(&PowerLaw { beta: 2.0 }).regime, Regime::Gaussian);
        let p = ScalingProfile::new(&GasketSpec::new(2, vec![2, 3, 4]).unwrap()).unwrap();
        assert_eq!(classify_regime(&p).regime, Regime::Singular);
        assert_eq!(Regime::Inconclusive.to_string(), "inconclusive");
    }

    #[test]
    fn psi_inverse_round_trip() {
        let p = ScalingProfile::new(&GasketSpec::new(2, vec![2, 3, 2]).unwrap()).unwrap();
        for s in [1e-4, 0.05, 0.4, 2.0] {
            assert_relative_eq!(p.psi_inverse(p.psi(s)), s, max_relative = 1e-10);
        }
        assert!(psi_eval(&p, -1.0).is_err());
    }
}
