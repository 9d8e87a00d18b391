//! Tent functions, Lipschitz partitions of unity, ball-average projections
//! and piecewise-harmonic approximation on a finite gasket.

use rayon::prelude::*;
use serde::Serialize;

use crate::chainmetric::{epsilon_net, FiniteMetricSpace};
use crate::error::{LabError, Result};
use crate::forms::{cell_energy_measure, dirichlet_solve, QuadraticForm};
use crate::model::GasketModel;
use crate::scaling::ScaleFunction;

/// `(1 - d(x, .)/r)^+`.
pub fn tent_function(space: &FiniteMetricSpace, x: usize, r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("tent radius must be positive, got {r}")));
    }
    Ok((0..space.len())
        .map(|v| (1.0 - space.distance(x, v) / r).max(0.0))
        .collect())
}

#[derive(Debug, Clone)]
pub struct PartitionFamily {
    pub epsilon: f64,
    pub net: Vec<usize>,
    /// `functions[i]` is `phi_z` for `z = net[i]`.
    pub functions: Vec<Vec<f64>>,
    /// Smallest value of `sum_w f_{w, 2 eps}`.
    pub min_denominator: f64,
}

/// `phi_z = f_{z, 2 eps} / sum_w f_{w, 2 eps}`.
pub fn partition_of_unity(space: &FiniteMetricSpace, net: &[usize], epsilon: f64) -> Result<PartitionFamily> {
    if net.is_empty() {
        return Err(LabError::Domain("empty net".into()));
    }
    let tents: Vec<Vec<f64>> = net
        .iter()
        .map(|&z| tent_function(space, z, 2.0 * epsilon))
        .collect::<Result<_>>()?;
    let denominators: Vec<f64> = (0..space.len())
        .map(|v| tents.iter().map(|t| t[v]).sum())
        .collect();
    let min_denominator = denominators.iter().copied().fold(f64::INFINITY, f64::min);
    if min_denominator < 0.5 {
        return Err(LabError::NetNotMaximal(min_denominator));
    }
    let functions = tents
        .into_iter()
        .map(|t| t.iter().zip(&denominators).map(|(a, d)| a / d).collect())
        .collect();
    Ok(PartitionFamily {
        epsilon,
        net: net.to_vec(),
        functions,
        min_denominator,
    })
}

impl PartitionFamily {
    /// `max_v |sum_z phi_z(v) - 1|`.
    pub fn sum_defect(&self) -> f64 {
        let n = self.functions.first().map_or(0, Vec::len);
        (0..n)
            .map(|v| (self.functions.iter().map(|f| f[v]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Whether `0 <= phi_z <= 1` with support inside `B(z, 2 eps)`.
    pub fn bounds_hold(&self, space: &FiniteMetricSpace) -> bool {
        self.net.iter().zip(&self.functions).all(|(&z, phi)| {
            phi.iter().enumerate().all(|(v, &p)| {
                (0.0..=1.0).contains(&p) && (p == 0.0 || space.distance(z, v) < 2.0 * self.epsilon)
            })
        })
    }
}

/// Constants of a partition of unity, each normalized by the power of
/// `eps` it should scale with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionConstants {
    /// `eps * max |phi_z(u) - phi_z(v)| / d(u, v)` over graph edges.
    pub lipschitz: f64,
    /// `eps^2 * max Gamma(phi_z)(cell) / m(cell)`.
    pub energy_density: f64,
    /// `eps^2 * max E(phi_z) / m(B(z, eps))`.
    pub energy: f64,
}

pub fn partition_constants(model: &GasketModel, space: &FiniteMetricSpace, family: &PartitionFamily) -> Result<PartitionConstants> {
    let eps = family.epsilon;
    let per_function: Vec<(f64, f64, f64)> = family
        .net
        .par_iter()
        .zip(&family.functions)
        .map(|(&z, phi)| -> Result<(f64, f64, f64)> {
            let lip = space
                .edges()
                .iter()
                .map(|&(u, v)| (phi[u] - phi[v]).abs() / space.distance(u, v))
                .fold(0.0, f64::max);
            let gamma = cell_energy_measure(&model.graph, &model.params, phi)?;
            let density = gamma
                .masses()
                .iter()
                .zip(model.cell_mass.masses())
                .map(|(g, m)| g / m)
                .fold(0.0, f64::max);
            let energy = model.form.energy(phi) / space.ball_mass(z, eps);
            Ok((lip, density, energy))
        })
        .collect::<Result<_>>()?;
    let max = |k: fn(&(f64, f64, f64)) -> f64| per_function.iter().map(k).fold(0.0, f64::max);
    Ok(PartitionConstants {
        lipschitz: eps * max(|t| t.0),
        energy_density: eps * eps * max(|t| t.1),
        energy: eps * eps * max(|t| t.2),
    })
}

/// `sum_z f_{B(z, 1/n)} phi_z` over a `1/n`-net, ball averages taken with the vertex measure.
pub fn ball_average_projection(space: &FiniteMetricSpace, f: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(LabError::Domain("scale index must be positive".into()));
    }
    if f.len() != space.len() {
        return Err(LabError::DimensionMismatch {
            expected: space.len(),
            got: f.len(),
        });
    }
    let eps = 1.0 / n as f64;
    let net = epsilon_net(space, eps)?;
    let family = partition_of_unity(space, &net, eps)?;
    let mut out = vec![0.0; space.len()];
    for (&z, phi) in net.iter().zip(&family.functions) {
        let ball = space.ball(z, eps);
        let mass: f64 = ball.iter().map(|&v| space.mass(v)).sum();
        if !(mass > 0.0) {
            return Err(LabError::EmptyBall { center: z, radius: eps });
        }
        let average = ball.iter().map(|&v| f[v] * space.mass(v)).sum::<f64>() / mass;
        for (o, p) in out.iter_mut().zip(phi) {
            *o += average * p;
        }
    }
    Ok(out)
}

/// `sup {|f(z) - f(w)| : d(z, w) < radius}`.
pub fn modulus_of_continuity(space: &FiniteMetricSpace, f: &[f64], radius: f64) -> f64 {
    (0..space.len())
        .into_par_iter()
        .map(|z| {
            (0..space.len())
                .filter(|&w| space.distance(z, w) < radius)
                .map(|w| (f[z] - f[w]).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Which vertices carry `f` exactly at resolution `2^{-n}`: those with
/// `f 2^n` an integer and those with a neighbor in a different band
/// `floor(f 2^n)`.
fn pinned_set(form: &QuadraticForm<f64>, f: &[f64], n: u32) -> Vec<bool> {
    let scale = 2f64.powi(n as i32);
    let band = |x: f64| (x * scale).floor();
    (0..f.len())
        .map(|v| {
            let x = f[v] * scale;
            x == x.floor()
                || form
                    .matrix()
                    .row(v)
                    .any(|(u, c)| u != v && *c != 0.0 && band(f[u]) != band(f[v]))
        })
        .collect()
}

/// Piecewise-harmonic approximation at resolution `2^{-n}`: `f` is kept on
/// the vertices where it crosses or sits on a level of `2^{-n} Z`, and the
/// energy minimizer fills in the rest.
///
/// The pinned sets grow with `n`, so `E(f_n)` is non-decreasing and bounded
/// by `E(f)`. Every free component lies within one band and is bordered by
/// vertices of the same band, so `|f - f_n| <= 2^{-n}` by the maximum
/// principle. Negative values are rejected unless `split` is set, in which
/// case `f^+` and `f^-` are approximated separately.
pub fn piecewise_harmonic_approx(form: &QuadraticForm<f64>, f: &[f64], n: u32, split: bool) -> Result<Vec<f64>> {
    if f.len() != form.dim() {
        return Err(LabError::DimensionMismatch {
            expected: form.dim(),
            got: f.len(),
        });
    }
    if f.iter().any(|&x| x < 0.0) {
        if !split {
            return Err(LabError::Domain(
                "negative input; approximate f+ and f- separately".into(),
            ));
        }
        let plus: Vec<f64> = f.iter().map(|&x| x.max(0.0)).collect();
        let minus: Vec<f64> = f.iter().map(|&x| (-x).max(0.0)).collect();
        let a = piecewise_harmonic_approx(form, &plus, n, false)?;
        let b = piecewise_harmonic_approx(form, &minus, n, false)?;
        return Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect());
    }
    let mut pinned = pinned_set(form, f, n);
    if !pinned.iter().any(|&p| p) {
        if let Some(p) = pinned.first_mut() {
            *p = true;
        }
    }
    let boundary: Vec<usize> = (0..f.len()).filter(|&v| pinned[v]).collect();
    let values: Vec<f64> = boundary.iter().map(|&v| f[v]).collect();
    dirichlet_solve(form, &boundary, &values)
}

/// The layered construction `sum_k f_{n,k}`: `f_{n,k}` is `0` on
/// `{f <= k 2^{-n}}`, `2^{-n}` on `{f >= (k+1) 2^{-n}}` and harmonic in between.
pub fn layered_harmonic_approx(form: &QuadraticForm<f64>, f: &[f64], n: u32) -> Result<Vec<f64>> {
    if f.iter().any(|&x| x < 0.0) {
        return Err(LabError::Domain("negative input to the layered approximation".into()));
    }
    let h = 0.5f64.powi(n as i32);
    let top = f.iter().copied().fold(0.0, f64::max);
    let layers = (top / h).ceil() as usize;
    let parts: Vec<Vec<f64>> = (0..layers)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
            let boundary: Vec<usize> = (0..f.len()).filter(|&v| f[v] <= lo || f[v] >= hi).collect();
            if boundary.is_empty() {
                return Ok(f.iter().map(|&x| x - lo).collect());
            }
            let values: Vec<f64> = boundary.iter().map(|&v| if f[v] <= lo { 0.0 } else { h }).collect();
            dirichlet_solve(form, &boundary, &values)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; f.len()];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    Ok(out)
}

/// `Gamma(h)(B(x, r)) Psi(r) / inf_a int_{B(x,2r) \ B(x,r)} |h - a|^2 dm`.
///
/// Energy measure here is the vertex energy measure. The infimum is attained
/// at the `m`-weighted mean over the annulus.
pub fn reverse_poincare_check<P: ScaleFunction + ?Sized>(
    form: &QuadraticForm<f64>,
    space: &FiniteMetricSpace,
    psi: &P,
    h: &[f64],
    x: usize,
    r: f64,
) -> Result<f64> {
    let gamma = crate::forms::vertex_energy_measure(form, h)?;
    let inner = space.ball(x, r);
    let numerator = gamma.mass_of(&inner) * psi.psi(r);
    let annulus: Vec<usize> = (0..space.len())
        .filter(|&v| {
            let d = space.distance(x, v);
            d >= r && d < 2.0 * r
        })
        .collect();
    let mass: f64 = annulus.iter().map(|&v| space.mass(v)).sum();
    if !(mass > 0.0) {
        return Err(LabError::EmptyBall { center: x, radius: 2.0 * r });
    }
    let mean = annulus.iter().map(|&v| h[v] * space.mass(v)).sum::<f64>() / mass;
    let denominator: f64 = annulus
        .iter()
        .map(|&v| (h[v] - mean).powi(2) * space.mass(v))
        .sum();
    if numerator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

/// Largest harmonic residual of `h` on the interior of `B(x, 2r)`, i.e. at
/// ball vertices whose neighbors all lie in the ball.
pub fn ball_harmonic_residual(form: &QuadraticForm<f64>, space: &FiniteMetricSpace, h: &[f64], x: usize, r: f64) -> f64 {
    let ball = space.ball(x, 2.0 * r);
    let mut inside = vec![false; space.len()];
    for &v in &ball {
        inside[v] = true;
    }
    let ah = form.apply(h);
    ball.iter()
        .filter(|&&v| form.matrix().row(v).all(|(u, _)| inside[u]))
        .map(|&v| ah[v].abs())
        .fold(0.0, f64::max)
}

/// The function harmonic in the interior of `B(x, 2r)` that agrees with `g`
/// elsewhere.
pub fn harmonic_in_ball(form: &QuadraticForm<f64>, space: &FiniteMetricSpace, g: &[f64], x: usize, r: f64) -> Result<Vec<f64>> {
    let ball = space.ball(x, 2.0 * r);
    let mut inside = vec![false; space.len()];
    for &v in &ball {
        inside[v] = true;
    }
    let interior: Vec<bool> = (0..space.len())
        .map(|v| inside[v] && form.matrix().row(v).all(|(u, _)| inside[u]))
        .collect();
    let boundary: Vec<usize> = (0..space.len()).filter(|&v| !interior[v]).collect();
    let values: Vec<f64> = boundary.iter().map(|&v| g[v]).collect();
    dirichlet_solve(form, &boundary, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(depth: usize) -> (GasketModel, FiniteMetricSpace) {
        let m = GasketModel::constant(2, 2, depth).unwrap();
        let s = m.space().unwrap();
        (m, s)
    }

    #[test]
    fn tent_values() {
        let (_, s) = setup(4);
        let t = tent_function(&s, 5, 0.5).unwrap();
        assert_eq!(t[5], 1.0);
        for v in 0..s.len() {
            if s.distance(5, v) >= 0.5 {
                assert_eq!(t[v], 0.0);
            }
        }
        assert!(tent_function(&s, 0, 0.0).is_err());
    }

    #[test]
    fn single_point_net() {
        let (_, s) = setup(3);
        let fam = partition_of_unity(&s, &[0], 2.0).unwrap();
        assert!(fam.functions[0].iter().all(|&p| (p - 1.0).abs() < 1e-15));
        assert!(matches!(partition_of_unity(&s, &[0], 0.1), Err(LabError::NetNotMaximal(_))));
    }

    #[test]
    fn partition_properties() {
        let (m, s) = setup(4);
        let net = epsilon_net(&s, 0.125).unwrap();
        let fam = partition_of_unity(&s, &net, 0.125).unwrap();
        assert!(fam.sum_defect() < 1e-12);
        assert!(fam.bounds_hold(&s));
        let c = partition_constants(&m, &s, &fam).unwrap();
        assert!(c.lipschitz > 0.0 && c.energy_density > 0.0 && c.energy > 0.0);
    }

    #[test]
    fn projection_of_constant() {
        let (_, s) = setup(4);
        let f = vec![0.7; s.len()];
        let p = ball_average_projection(&s, &f, 4).unwrap();
        assert!(p.iter().all(|x| (x - 0.7).abs() < 1e-14));
    }

    #[test]
    fn approximation_of_harmonic_is_exact() {
        let (m, _) = setup(4);
        let h = m.harmonic(&[1.0, 0.0, 0.0]).unwrap();
        for n in 1..=4 {
            let a = piecewise_harmonic_approx(&m.form, &h, n, false).unwrap();
            assert!(a.iter().zip(&h).all(|(x, y)| (x - y).abs() < 1e-10));
        }
        let neg: Vec<f64> = h.iter().map(|x| x - 0.5).collect();
        assert!(piecewise_harmonic_approx(&m.form, &neg, 2, false).is_err());
        let a = piecewise_harmonic_approx(&m.form, &neg, 2, true).unwrap();
        assert!(a.iter().zip(&neg).all(|(x, y)| (x - y).abs() <= 0.25 + 1e-12));
    }

    #[test]
    fn reverse_poincare_covariance() {
        let (m, s) = setup(5);
        let h = m.harmonic(&[1.0, 0.0, 0.0]).unwrap();
        let x = m.vertex_at(&[16, 16]).unwrap();
        let r = 0.125;
        let base = reverse_poincare_check(&m.form, &s, &m.profile, &h, x, r).unwrap();
        let moved: Vec<f64> = h.iter().map(|v| 3.0 * v - 2.0).collect();
        let other = reverse_poincare_check(&m.form, &s, &m.profile, &moved, x, r).unwrap();
        assert!((base - other).abs() < 1e-9 * base);
        let constant = vec![1.0; s.len()];
        assert_eq!(reverse_poincare_check(&m.form, &s, &m.profile, &constant, x, r).unwrap(), 0.0);
    }
}
