//! The standard experiment suite: one report per acceptance criterion, plus
//! the sweeps the reports are built from.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::approximation::{partition_constants, partition_of_unity, piecewise_harmonic_approx, tent_function};
use crate::chainmetric::{chain_constant, chain_midpoint, epsilon_net, random_pairs};
use crate::diagnostics::{
    concentration_profile, heat_kernel_envelope_check, least_squares_slope, maximal_inequality_check, median_ratio,
    sample_heat_kernel, ConcentrationProfile, EnvelopeReport, MaximalReport, DEFAULT_TAIL,
};
use crate::error::Result;
use crate::forms::{
    assemble_form, cell_energy_measure, dirichlet_solve, leibniz_residual, resistance_scale, trace_proportionality,
    vertex_energy_measure, ScaledFormParams,
};
use crate::geometry::{build_graph, GasketSpec};
use crate::model::{harmonic_tower, GasketModel};
use crate::scalar::Scalar;
use crate::scaling::{
    classify_regime, phi_closed_form, phi_eval, walk_dimension, PowerLaw, Regime, ScaleFunction, ScalingProfile,
};
use crate::stochastic::{build_walk, exit_time_exact};
use crate::Rational;

/// Seed shared by every randomized step of the suite.
pub const SUITE_SEED: u64 = 20_240_917;

/// `(N, l)` pairs covered by the resistance and walk-dimension checks.
pub const FORM_GRID: [(usize, u32); 10] = [(2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 2), (3, 3), (3, 4), (3, 5), (3, 6)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    /// `PASS [ 3] title` or `FAIL [ 5] title: failed check, ...`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            format!("{verdict} [{:>2}] {} ({:.1} s)", self.id, self.title, self.seconds)
        } else {
            format!("{verdict} [{:>2}] {}: {} ({:.1} s)", self.id, self.title, failed.join(", "), self.seconds)
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Builder {
    id: u8,
    title: &'static str,
    start: Instant,
    checks: Vec<Check>,
}

impl Builder {
    fn new(id: u8, title: &'static str) -> Self {
        Self {
            id,
            title,
            start: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn runtime(&mut self, limit: f64) {
        let s = self.start.elapsed().as_secs_f64();
        self.check("runtime", s < limit, format!("limit {limit} s"));
    }

    fn finish(self) -> CriterionReport {
        CriterionReport {
            id: self.id,
            title: self.title.into(),
            passed: self.checks.iter().all(|c| c.passed),
            seconds: self.start.elapsed().as_secs_f64(),
            checks: self.checks,
        }
    }
}

pub fn resistance_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(1, "resistance scale");
    let r = resistance_scale::<Rational>(2, 2)?;
    let oracle = Rational::ratio(3, 5);
    b.check("exact r(2,2)", r == oracle, format!("r = {r}"));
    let r64 = resistance_scale::<f64>(2, 2)?;
    b.check("float r(2,2)", (r64 - 0.6).abs() < 1e-12, format!("r = {r64}"));
    let mut worst = 0.0f64;
    for (n, l) in FORM_GRID {
        worst = worst.max(trace_proportionality::<f64>(n, l)?.1);
    }
    b.check("trace proportionality", worst < 1e-10, format!("max residual {worst:e}"));
    b.runtime(10.0);
    Ok(b.finish())
}

pub fn walk_dimension_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(2, "walk dimension");
    let w = walk_dimension(2, 2)?;
    let target = 5f64.log2();
    b.check("beta_2 = log2 5", (w.beta - target).abs() < 1e-9, format!("beta = {:.12}", w.beta));
    let mut all = true;
    let mut details = Vec::new();
    for (n, l) in FORM_GRID {
        let w = walk_dimension(n, l)?;
        let log_form = (w.growth.as_f64()).ln() / (l as f64).ln();
        let exact = w.growth > Rational::from_int((l * l) as i64);
        let ok = w.beta > 2.0 && exact && (log_form - w.beta).abs() < 1e-9;
        all &= ok;
        details.push(format!("({n},{l}) beta={:.4}", w.beta));
    }
    b.check("beta > 2 on grid", all, details.join(" "));
    Ok(b.finish())
}

pub fn harmonic_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(3, "harmonic extension");
    let spec = GasketSpec::constant(2, 2, 1)?;
    let g1 = build_graph(&spec, 1)?;
    let params = ScaledFormParams::<Rational>::new(&spec)?;
    let form = assemble_form(&g1, &params)?;
    let data = vec![Rational::from_int(1), Rational::from_int(0), Rational::from_int(0)];
    let h = dirichlet_solve(&form, g1.boundary(), &data)?;
    let mut mids: Vec<Rational> = (0..g1.vertex_count())
        .filter(|v| !g1.boundary().contains(v))
        .map(|v| h[v].clone())
        .collect();
    mids.sort();
    let expected = vec![Rational::ratio(1, 5), Rational::ratio(2, 5), Rational::ratio(2, 5)];
    let shown: Vec<String> = mids.iter().map(ToString::to_string).collect();
    b.check("midpoints 2/5, 2/5, 1/5", mids == expected, shown.join(", "));

    let spec = GasketSpec::constant(2, 2, 6)?;
    let params = ScaledFormParams::<f64>::new(&spec)?;
    let tower = harmonic_tower(&spec, 6, &[1.0, 0.0, 0.0])?;
    let mut drift = 0.0f64;
    for (graph, f) in &tower {
        drift = drift.max((assemble_form(graph, &params)?.energy(f) - 2.0).abs());
    }
    b.check("energy constant through depth 6", drift < 1e-9, format!("drift {drift:e}"));
    Ok(b.finish())
}

pub fn energy_measure_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(4, "energy measure identities");
    let m = GasketModel::constant(2, 2, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let n = m.graph.vertex_count();
    let (mut leibniz, mut total) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        leibniz = leibniz.max(leibniz_residual(&m.form, &f, &g)?);
        let e = m.form.energy(&f);
        let cells = cell_energy_measure(&m.graph, &m.params, &f)?;
        total = total.max((cells.total() - e).abs() / e.max(1.0));
    }
    b.check("Leibniz identity", leibniz < 1e-12, format!("max residual {leibniz:e}"));
    b.check("cell measure total", total < 1e-10, format!("max relative gap {total:e}"));
    Ok(b.finish())
}

/// Corner data `(1, 0, ..., 0)`.
pub fn unit_corner(dimension: usize) -> Vec<f64> {
    let mut c = vec![0.0; dimension + 1];
    c[0] = 1.0;
    c
}

/// Concentration profiles of the harmonic function with corners
/// `(1, 0, ..., 0)` against the uniform cell measure, one per depth.
pub fn singularity_sweep(
    spec: &GasketSpec,
    depths: std::ops::RangeInclusive<usize>,
    tail: f64,
) -> Result<Vec<ConcentrationProfile>> {
    let max = *depths.end();
    let params = ScaledFormParams::<f64>::new(spec)?;
    let tower = harmonic_tower(spec, max, &unit_corner(spec.dimension()))?;
    depths
        .map(|n| {
            let (graph, h) = &tower[n];
            let gamma = cell_energy_measure(graph, &params, h)?;
            let m = crate::measure::uniform_cell_measure::<f64>(graph);
            concentration_profile(&gamma, &m, tail)
        })
        .collect()
}

pub fn singularity_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(5, "singularity trend");
    let spec = GasketSpec::constant(2, 2, 1)?;
    let g1 = build_graph(&spec, 1)?;
    let params = ScaledFormParams::<Rational>::new(&spec)?;
    let form = assemble_form(&g1, &params)?;
    let data = vec![Rational::from_int(1), Rational::from_int(0), Rational::from_int(0)];
    let h = dirichlet_solve(&form, g1.boundary(), &data)?;
    let cells = cell_energy_measure(&g1, &params, &h)?.normalized();
    let mut shares = cells.masses().to_vec();
    shares.sort();
    let expected = vec![Rational::ratio(1, 5), Rational::ratio(1, 5), Rational::ratio(3, 5)];
    let shown: Vec<String> = shares.iter().map(ToString::to_string).collect();
    b.check("depth-1 shares 0.6, 0.2, 0.2", shares == expected, shown.join(", "));

    let profiles = singularity_sweep(&GasketSpec::constant(2, 2, 7)?, 1..=7, DEFAULT_TAIL)?;
    let rate1 = profiles[0].entropy_rate;
    b.check("depth-1 entropy rate", (rate1 - 0.1484).abs() < 1e-3, format!("{rate1:.6}"));
    let masses: Vec<f64> = profiles.iter().map(|p| p.minimal_mass).collect();
    let rates: Vec<f64> = profiles.iter().map(|p| p.entropy_rate).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    b.check(
        "minimal mass strictly decreasing",
        masses.windows(2).all(|w| w[1] < w[0]),
        fmt(&masses),
    );
    let last = masses[masses.len() - 1];
    b.check("minimal mass below 0.5 by depth 7", last < 0.5, format!("{last:.4} at depth 7"));
    b.check(
        "entropy rate non-decreasing",
        rates.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        fmt(&rates),
    );
    b.runtime(60.0);
    Ok(b.finish())
}

pub fn scale_function_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(6, "scale functions");
    let p = ScalingProfile::new(&GasketSpec::new(2, vec![2, 3, 4, 2])?)?;
    let bps = p.breakpoints();
    let mut gap = 0.0f64;
    for n in 1..=p.depth() {
        gap = gap.max((p.ln_psi(bps[n]) + p.time_scale(n).ln()).abs());
        if n > 1 {
            gap = gap.max((p.ln_branch(n, bps[n - 1]) - p.ln_branch(n - 1, bps[n - 1])).abs());
        }
    }
    b.check("breakpoint continuity", gap < 1e-12, format!("max gap {gap:e}"));

    let grid: Vec<f64> = (0..10).map(|i| 10f64.powf(-2.0 + 0.4 * i as f64)).collect();
    let mut worst = 0.0f64;
    for beta in [2.0, 2.5, 5f64.log2()] {
        let psi = PowerLaw { beta };
        for &r in &grid {
            for &t in &grid {
                let exact = phi_closed_form(beta, r, t);
                worst = worst.max((phi_eval(&psi, r, t)? - exact).abs() / exact);
            }
        }
    }
    b.check("Phi against closed form", worst < 1e-8, format!("max relative error {worst:e}"));

    let profiles = [
        ScalingProfile::new(&GasketSpec::constant(2, 2, 8)?)?,
        ScalingProfile::new(&GasketSpec::new(2, vec![2, 3, 4, 2])?)?,
        ScalingProfile::new(&GasketSpec::constant(3, 2, 8)?)?,
    ];
    let singular = profiles.iter().all(|p| classify_regime(p).regime == Regime::Singular)
        && classify_regime(&PowerLaw { beta: 2.5 }).regime == Regime::Singular;
    b.check("singular when beta > 2", singular, "gasket profiles and r^2.5");
    let quad = classify_regime(&PowerLaw { beta: 2.0 });
    b.check("gaussian for r^2", quad.regime == Regime::Gaussian, format!("{:?}", quad.regime));
    Ok(b.finish())
}

/// `(depth, r, E[tau] / T_n)` for balls around the corner `q_0` with radii
/// `L_j^{-1}`, `j = 1..depth-1`.
pub fn exit_time_sweep(spec: &GasketSpec, depths: std::ops::RangeInclusive<usize>) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    for n in depths {
        let m = GasketModel::build(spec, n)?;
        let walk = build_walk(&m.form, 0.0)?;
        let center = m.graph.boundary()[0];
        for j in 1..n {
            let r = 1.0 / spec.side_denominator(j)? as f64;
            let steps = exit_time_exact(&walk, &m.graph, center, r)?;
            out.push((n, r, steps / m.time_scale()));
        }
    }
    Ok(out)
}

pub fn exit_time_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(7, "exit-time exponent");
    let sweep = exit_time_sweep(&GasketSpec::constant(2, 2, 7)?, 3..=7)?;
    let points: Vec<(f64, f64)> = sweep.iter().map(|&(_, r, tau)| (r.ln(), tau.ln())).collect();
    let slope = least_squares_slope(&points);
    let target = 5f64.log2();
    b.check("slope near log2 5", (slope - target).abs() < 0.15, format!("slope {slope:.4}, target {target:.4}"));
    b.runtime(120.0);
    Ok(b.finish())
}

pub fn chain_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(8, "chain metric and midpoints");
    let m = GasketModel::constant(2, 2, 5)?;
    let s = m.space()?;
    let pairs = random_pairs(s.len(), 200, SUITE_SEED);
    let mut violations = 0;
    for eps in [0.1, 0.25] {
        for &(x, y) in &pairs {
            let mp = chain_midpoint(&s, eps, x, y)?;
            if mp.defect_x > 5.0 * eps || mp.defect_y > 5.0 * eps {
                violations += 1;
            }
        }
    }
    b.check("midpoint bounds", violations == 0, format!("{violations} violations over 400 cases"));
    let c = chain_constant(&s, &[0.04, 0.1, 0.25], SUITE_SEED)?;
    b.check("chain constant is 1", (c - 1.0).abs() < 1e-12, format!("{c}"));
    Ok(b.finish())
}

pub fn partition_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(9, "partition of unity");
    let m = GasketModel::constant(2, 2, 5)?;
    let s = m.space()?;
    let mut constants = Vec::new();
    let (mut sum_ok, mut bounds_ok) = (true, true);
    for eps in [0.25, 0.125, 0.0625] {
        let net = epsilon_net(&s, eps)?;
        let family = partition_of_unity(&s, &net, eps)?;
        sum_ok &= family.sum_defect() < 1e-12;
        bounds_ok &= family.bounds_hold(&s);
        constants.push(partition_constants(&m, &s, &family)?);
    }
    b.check("sums to one", sum_ok, "");
    b.check("range and support", bounds_ok, "");
    let stable = |v: Vec<f64>| {
        let ok = v.windows(2).all(|w| w[1] / w[0] <= 2.0 && w[0] / w[1] <= 2.0);
        (ok, v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" "))
    };
    let (ok, d) = stable(constants.iter().map(|c| c.lipschitz).collect());
    b.check("Lipschitz constant stable", ok, d);
    let (ok, d) = stable(constants.iter().map(|c| c.energy_density).collect());
    b.check("energy density stable", ok, d);
    let (ok, d) = stable(constants.iter().map(|c| c.energy).collect());
    b.check("energy constant stable", ok, d);
    Ok(b.finish())
}

pub fn approximation_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(10, "piecewise-harmonic approximation");
    let m = GasketModel::constant(2, 2, 6)?;
    let s = m.space()?;
    let inputs = [
        ("harmonic", m.harmonic(&[1.0, 0.3, 0.0])?),
        ("tent", tent_function(&s, m.graph.boundary()[0], 0.6)?),
    ];
    for (name, f) in &inputs {
        let e = m.form.energy(f);
        let (mut sup_ok, mut energies) = (true, Vec::new());
        for n in 1..=6u32 {
            let a = piecewise_harmonic_approx(&m.form, f, n, false)?;
            let sup = a.iter().zip(f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            sup_ok &= sup <= 0.5f64.powi(n as i32) + 1e-12;
            energies.push(m.form.energy(&a));
        }
        b.check(&format!("{name}: sup bound"), sup_ok, "");
        let monotone = energies.windows(2).all(|w| w[1] >= w[0] - 1e-10) && energies.iter().all(|x| *x <= e + 1e-10);
        let shown: Vec<String> = energies.iter().map(|x| format!("{x:.4}")).collect();
        b.check(&format!("{name}: energy monotone and bounded"), monotone, format!("{} <= {e:.4}", shown.join(" ")));
    }
    Ok(b.finish())
}

/// Continuum times at which the heat kernel is sampled: `Psi(1/4)`, `Psi(1/8)`, `Psi(1/16)`.
pub fn envelope_times(profile: &ScalingProfile) -> Vec<f64> {
    [0.25, 0.125, 0.0625].iter().map(|&r| profile.psi(r)).collect()
}

/// Near-diagonal window used by the heat-kernel criterion.
pub const ENVELOPE_DELTA: f64 = 0.5;

/// Largest accepted spread between per-scale near-diagonal minima.
pub const ENVELOPE_SPREAD: f64 = 4.0;

pub fn envelope_sweep(spec: &GasketSpec, depths: &[usize]) -> Result<EnvelopeReport> {
    let mut samples = Vec::new();
    let mut profile = None;
    for &n in depths {
        let m = GasketModel::build(spec, n)?;
        samples.extend(sample_heat_kernel(&m, 0.5, &envelope_times(&m.profile))?);
        profile = Some(m.profile);
    }
    let profile = profile.ok_or_else(|| crate::error::LabError::Domain("no depths".into()))?;
    heat_kernel_envelope_check(&samples, &profile, ENVELOPE_DELTA)
}

pub fn heat_kernel_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(11, "heat-kernel shape");
    let r = envelope_sweep(&GasketSpec::constant(2, 2, 5)?, &[4, 5])?;
    let spread = r.c3_group_range.1 / r.c3_group_range.0;
    b.check(
        "near-diagonal lower bound",
        r.c3 > 0.0 && r.lower_violations == 0 && spread <= ENVELOPE_SPREAD,
        format!("c3 {:.4}, per-scale spread {spread:.3}, delta {}", r.c3, r.delta),
    );
    b.check(
        "upper envelope",
        r.c1 > 0.0 && r.upper_violations == 0,
        format!("c1 {:.4}, c2 {}, C1 {:.4}, {} samples", r.c1, r.c2, r.big_c1, r.samples),
    );
    b.runtime(300.0);
    Ok(b.finish())
}

/// Maximal-inequality reports and finest-radius medians of `Gamma(h) / m`
/// for the harmonic function with corners `(1, 0, ..., 0)`.
pub fn differentiation_sweep(spec: &GasketSpec, depths: &[usize]) -> Result<Vec<(usize, MaximalReport, f64)>> {
    let lambdas = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    depths
        .iter()
        .map(|&n| {
            let m = GasketModel::build(spec, n)?;
            let s = m.space()?;
            let h = m.harmonic(&unit_corner(spec.dimension()))?;
            let gamma = vertex_energy_measure(&m.form, &h)?;
            let report = maximal_inequality_check(&s, &gamma, &m.vertex_mass, &lambdas)?;
            let median = median_ratio(&s, &gamma, &m.vertex_mass, s.resolution())?;
            Ok((n, report, median))
        })
        .collect()
}

pub fn differentiation_criterion() -> Result<CriterionReport> {
    let mut b = Builder::new(12, "differentiation and maximal function");
    let sweep = differentiation_sweep(&GasketSpec::constant(2, 2, 7)?, &[4, 5, 6, 7])?;
    let bounded = sweep.iter().all(|(_, r, _)| r.holds());
    let shown: Vec<String> = sweep
        .iter()
        .map(|(n, r, _)| format!("depth {n}: {:.3} <= {:.1}", r.worst, r.bound))
        .collect();
    b.check("maximal inequality", bounded, shown.join(", "));
    let (first, last) = (sweep[0].2, sweep[sweep.len() - 1].2);
    b.check("median ratio decreases", last < first, format!("{first:.4} at depth 4, {last:.4} at depth 7"));
    Ok(b.finish())
}

/// Every criterion in order.
pub fn run_all() -> Result<Vec<CriterionReport>> {
    let runners: [fn() -> Result<CriterionReport>; 12] = [
        resistance_criterion,
        walk_dimension_criterion,
        harmonic_criterion,
        energy_measure_criterion,
        singularity_criterion,
        scale_function_criterion,
        exit_time_criterion,
        chain_criterion,
        partition_criterion,
        approximation_criterion,
        heat_kernel_criterion,
        differentiation_criterion,
    ];
    runners.iter().map(|f| f()).collect()
}
