//! One function per experiment kind.

use std::fs;
use std::path::Path;

use anyhow::Result;
use gasket_core::approximation::{
    ball_average_projection, modulus_of_continuity, partition_constants, partition_of_unity, piecewise_harmonic_approx,
    tent_function,
};
use gasket_core::chainmetric::{chain_constant, chain_midpoint, epsilon_net, random_pairs};
use gasket_core::diagnostics::{least_squares_slope, resolution_radii, vd_constant};
use gasket_core::export::{write_form, write_geometry, write_vector, PlotSeries};
use gasket_core::forms::{
    assemble_form, cell_energy_measure, harmonic_residual, resistance_scale, trace_proportionality, ScaledFormParams,
};
use gasket_core::model::{harmonic_tower, GasketModel};
use gasket_core::scaling::{classify_regime, walk_dimension, ScaleFunction};
use gasket_core::stochastic::{build_walk, exit_time_exact, graph_ball, walk_montecarlo, StopRule};
use gasket_core::suite::{
    envelope_sweep, exit_time_sweep, run_all, singularity_sweep, unit_corner, CriterionReport, ENVELOPE_SPREAD,
};
use gasket_core::{LabError, Rational};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::summary::{Recorder, Summary};

/// Deepest gasket the heat-kernel experiment accepts.
pub const HKE_MAX_DEPTH: usize = 6;
/// Deepest gasket the exit-time experiment accepts.
pub const WALK_MAX_DEPTH: usize = 8;

fn series(name: &str, x: &str, y: &str, expected: impl Into<String>, points: Vec<(f64, f64)>) -> PlotSeries {
    PlotSeries {
        name: name.into(),
        x_label: x.into(),
        y_label: y.into(),
        expected: expected.into(),
        points,
    }
}

fn cap(depth: usize, max: usize, kind: &str) -> Result<()> {
    if depth > max {
        return Err(LabError::ResourceCap(format!("{kind} runs at depth {max} or less, got {depth}")).into());
    }
    Ok(())
}

pub fn build(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    let m = GasketModel::build(&c.spec, c.depth)?;
    for p in write_geometry(out, &m.graph)? {
        rec.path(&p.file_name().expect("file name").to_string_lossy());
    }
    write_form(&rec.path("form.csv"), &m.form)?;
    write_vector(&rec.path("vertex_mass.csv"), "mass", m.vertex_mass.masses())?;
    let inv = m.form.invariants();
    rec.check("form invariants", inv.holds(1e-9), format!("asymmetry {:e}, max row sum {:e}", inv.asymmetry, inv.max_row_sum));
    rec.check("graph connected", m.graph.is_connected(), "");
    let expected = c.spec.cell_count(c.depth)?;
    rec.check(
        "cell count",
        m.graph.cell_count() as u128 == expected,
        format!("{} cells", m.graph.cell_count()),
    );
    let values = json!({
        "vertices": m.graph.vertex_count(),
        "cells": m.graph.cell_count(),
        "edges": m.graph.edges().len(),
        "side_denominator": m.graph.denominator().to_string(),
        "time_scale": m.time_scale(),
    });
    rec.finish("build", c, values)
}

pub fn scale(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    let n = c.spec.dimension();
    let mut distinct: Vec<u32> = c.spec.levels()[..c.depth.max(1)].to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut levels = Vec::new();
    for &l in &distinct {
        let exact = resistance_scale::<Rational>(n, l)?;
        let (_, residual) = trace_proportionality::<f64>(n, l)?;
        let w = walk_dimension(n, l)?;
        rec.check(&format!("l = {l}: proportional trace"), residual < 1e-10, format!("residual {residual:e}"));
        rec.check(&format!("l = {l}: beta > 2"), w.beta > 2.0, format!("beta {:.6}", w.beta));
        levels.push(json!({
            "level": l,
            "r": resistance_scale::<f64>(n, l)?,
            "r_exact": exact.to_string(),
            "growth_exact": w.growth.to_string(),
            "beta": w.beta,
        }));
    }
    let profile = &GasketModel::build(&c.spec, 0)?.profile;
    let regime = classify_regime(profile);
    rec.check(
        "regime",
        regime.regime == gasket_core::scaling::Regime::Singular,
        regime.regime.to_string(),
    );
    let radii: Vec<f64> = (0..=40).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect();
    rec.plots(&[
        series(
            "psi",
            "ln r",
            "ln Psi(r)",
            format!("piecewise linear, slopes between {:.6} and {:.6}", profile.beta_min(), profile.beta_max()),
            radii.iter().map(|&r| (r.ln(), profile.ln_psi(r))).collect(),
        ),
        series(
            "psi_reference_2",
            "ln r",
            "2 ln r",
            "straight line of slope 2",
            radii.iter().map(|&r| (r.ln(), 2.0 * r.ln())).collect(),
        ),
    ])?;
    let mut values = json!({
        "levels": levels,
        "beta_min": profile.beta_min(),
        "beta_max": profile.beta_max(),
        "regime": regime,
    });
    if distinct.len() == 1 {
        values["r"] = levels[0]["r"].clone();
        values["beta"] = levels[0]["beta"].clone();
    }
    rec.finish("scale", c, values)
}

pub fn harmonic(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    let params = ScaledFormParams::<f64>::new(&c.spec)?;
    let corners = unit_corner(c.spec.dimension());
    let tower = harmonic_tower(&c.spec, c.depth, &corners)?;
    let mut energies = Vec::new();
    for (graph, f) in &tower {
        energies.push(assemble_form(graph, &params)?.energy(f));
    }
    let e0 = energies[0];
    let drift = energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    let tol = c.tolerances.energy.unwrap_or(1e-9);
    rec.check("energy constant", drift < tol, format!("relative drift {drift:e}"));
    let (graph, h) = tower.last().expect("depth 0 is always present");
    let form = assemble_form(graph, &params)?;
    let residual = harmonic_residual(&form, graph.boundary(), h);
    rec.check("harmonic residual", residual < 1e-9, format!("{residual:e}"));
    write_vector(&rec.path("harmonic.csv"), "h", h)?;
    let cells = cell_energy_measure(graph, &params, h)?;
    write_vector(&rec.path("cell_energy.csv"), "energy", cells.masses())?;
    rec.plots(&[series(
        "energy_by_depth",
        "depth",
        "energy",
        "constant",
        energies.iter().enumerate().map(|(n, &e)| (n as f64, e)).collect(),
    )])?;
    let values = json!({ "corners": corners, "energies": energies, "drift": drift });
    rec.finish("harmonic", c, values)
}

pub fn singularity(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    if c.depth == 0 {
        return Err(LabError::Domain("singularity needs depth at least 1".into()).into());
    }
    let profiles = singularity_sweep(&c.spec, 1..=c.depth, c.tail)?;
    let mut w = csv::Writer::from_path(rec.path("lorenz.csv"))?;
    w.write_record(["depth", "minimal_mass", "entropy_rate"])?;
    for p in &profiles {
        w.write_record([p.depth.to_string(), format!("{:e}", p.minimal_mass), format!("{:e}", p.entropy_rate)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(rec.path("lorenz_curves.csv"))?;
    w.write_record(["depth", "m", "gamma"])?;
    for p in &profiles {
        for (x, y) in &p.lorenz {
            w.write_record([p.depth.to_string(), format!("{x:e}"), format!("{y:e}")])?;
        }
    }
    w.flush()?;
    let masses: Vec<f64> = profiles.iter().map(|p| p.minimal_mass).collect();
    let rates: Vec<f64> = profiles.iter().map(|p| p.entropy_rate).collect();
    rec.check("minimal mass strictly decreasing", masses.windows(2).all(|w| w[1] < w[0]), format!("{masses:.4?}"));
    rec.check("entropy rate non-decreasing", rates.windows(2).all(|w| w[1] >= w[0] - 1e-12), format!("{rates:.4?}"));
    rec.check("entropy rate positive", rates.iter().all(|&r| r > 0.0), "");
    rec.plots(&[
        series(
            "entropy_rate",
            "depth",
            "entropy rate",
            "non-decreasing",
            rates.iter().enumerate().map(|(i, &r)| ((i + 1) as f64, r)).collect(),
        ),
        series(
            "minimal_mass",
            "depth",
            "minimal m-mass",
            "strictly decreasing",
            masses.iter().enumerate().map(|(i, &r)| ((i + 1) as f64, r)).collect(),
        ),
    ])?;
    let values = json!({ "tail": c.tail, "minimal_mass": masses, "entropy_rate": rates });
    rec.finish("singularity", c, values)
}

pub fn walk(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    cap(c.depth, WALK_MAX_DEPTH, "walk")?;
    if c.depth < 2 {
        return Err(LabError::Domain(format!("walk needs depth at least 2, got {}", c.depth)).into());
    }
    let sweep = exit_time_sweep(&c.spec, c.depth.min(3)..=c.depth)?;
    let mut w = csv::Writer::from_path(rec.path("exit_times.csv"))?;
    w.write_record(["depth", "radius", "mean_exit_time"])?;
    for (n, r, tau) in &sweep {
        w.write_record([n.to_string(), format!("{r:e}"), format!("{tau:e}")])?;
    }
    w.flush()?;
    let points: Vec<(f64, f64)> = sweep.iter().map(|&(_, r, t)| (r.ln(), t.ln())).collect();
    let slope = least_squares_slope(&points);
    let m = GasketModel::build(&c.spec, c.depth)?;
    let (lo, hi) = (m.profile.beta_min(), m.profile.beta_max());
    let tol = c.tolerances.slope.unwrap_or(0.15);
    rec.check(
        "exit-time slope",
        slope >= lo - tol && slope <= hi + tol,
        format!("slope {slope:.4}, walk dimensions [{lo:.4}, {hi:.4}]"),
    );

    let walk = build_walk(&m.form, c.laziness)?;
    let center = m.graph.boundary()[0];
    let radius = 1.0 / c.spec.side_denominator(1)? as f64;
    let exact = exit_time_exact(&walk, &m.graph, center, radius)?;
    let ball = graph_ball(&m.graph, center, radius);
    let stop = StopRule::exit_set(walk.len(), &ball, 1_000_000);
    let mc = walk_montecarlo(&walk, center, &stop, 2000, c.seed)?;
    let gap = (mc.mean - exact).abs();
    rec.check(
        "Monte Carlo agrees with exact solve",
        mc.truncated == 0 && gap <= 5.0 * mc.std_error,
        format!("exact {exact:.3}, simulated {:.3} +- {:.3}", mc.mean, mc.std_error),
    );

    let (x0, x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let anchor = points.first().map_or(0.0, |p| p.1 - lo * p.0);
    let line = |s: f64| vec![(x0, anchor + s * x0), (x1, anchor + s * x1)];
    rec.plots(&[
        series("exit_times", "ln r", "ln E[tau] / T_n", format!("slope near {lo:.4}"), points.clone()),
        series("exit_reference_beta", "ln r", "reference", format!("slope {lo:.4}"), line(lo)),
        series("exit_reference_2", "ln r", "reference", "slope 2", line(2.0)),
    ])?;
    let values = json!({
        "slope": slope,
        "beta_min": lo,
        "beta_max": hi,
        "exact_steps": exact,
        "montecarlo": { "mean": mc.mean, "std_error": mc.std_error, "trials": mc.trials },
    });
    rec.finish("walk", c, values)
}

pub fn metric(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    let m = GasketModel::build(&c.spec, c.depth)?;
    let s = m.space()?;
    let res = s.resolution();
    let epsilons: Vec<f64> = [0.1, 0.25, 0.5].into_iter().filter(|&e| e > res).collect();
    let pairs = random_pairs(s.len(), 200, c.seed);
    let mut violations = 0;
    for &eps in &epsilons {
        for &(x, y) in &pairs {
            let mp = chain_midpoint(&s, eps, x, y)?;
            if mp.defect_x > 5.0 * eps || mp.defect_y > 5.0 * eps {
                violations += 1;
            }
        }
    }
    rec.check("midpoint bounds", violations == 0, format!("{violations} violations"));
    let chain = if epsilons.is_empty() { 1.0 } else { chain_constant(&s, &epsilons, c.seed)? };
    rec.check("chain constant is 1", (chain - 1.0).abs() < 1e-12, format!("{chain}"));
    let radii = resolution_radii(&s);
    let doubling = vd_constant(&s, &radii)?;
    rec.check("volume doubling", doubling.is_finite() && doubling >= 1.0, format!("{doubling:.4}"));
    let nets: Vec<Value> = epsilons
        .iter()
        .map(|&e| Ok(json!({ "epsilon": e, "size": epsilon_net(&s, e)?.len() })))
        .collect::<Result<_>>()?;
    let values = json!({
        "points": s.len(),
        "resolution": res,
        "diameter": s.diameter(),
        "chain_constant": chain,
        "doubling_constant": doubling,
        "nets": nets,
    });
    rec.finish("metric", c, values)
}

pub fn approx(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    let m = GasketModel::build(&c.spec, c.depth)?;
    let s = m.space()?;
    let res = s.resolution();
    let mut constants = Vec::new();
    for eps in [0.25, 0.125, 0.0625].into_iter().filter(|&e| e > res) {
        let net = epsilon_net(&s, eps)?;
        let family = partition_of_unity(&s, &net, eps)?;
        rec.check(&format!("eps = {eps}: partition sums to one"), family.sum_defect() < 1e-12, "");
        rec.check(&format!("eps = {eps}: range and support"), family.bounds_hold(&s), "");
        let k = partition_constants(&m, &s, &family)?;
        constants.push(json!({ "epsilon": eps, "constants": k }));
    }

    let h = m.harmonic(&unit_corner(c.spec.dimension()))?;
    let tent = tent_function(&s, m.graph.boundary()[0], 0.6)?;
    let mut approx = Vec::new();
    for (name, f) in [("harmonic", &h), ("tent", &tent)] {
        let e = m.form.energy(f);
        let mut energies = Vec::new();
        let mut sup_ok = true;
        for n in 1..=6u32 {
            let a = piecewise_harmonic_approx(&m.form, f, n, false)?;
            let sup = a.iter().zip(f.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            sup_ok &= sup <= 0.5f64.powi(n as i32) + 1e-12;
            energies.push(m.form.energy(&a));
        }
        rec.check(&format!("{name}: sup bound"), sup_ok, "");
        rec.check(
            &format!("{name}: energy monotone and bounded"),
            energies.windows(2).all(|w| w[1] >= w[0] - 1e-10) && energies.iter().all(|&x| x <= e + 1e-10),
            format!("{energies:.4?} <= {e:.4}"),
        );
        approx.push(json!({ "input": name, "energy": e, "approximant_energies": energies }));
    }

    let mut projection = Vec::new();
    for n in [2usize, 4, 8].into_iter().filter(|&n| 1.0 / n as f64 > res) {
        let p = ball_average_projection(&s, &h, n)?;
        let err = p.iter().zip(&h).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let modulus = modulus_of_continuity(&s, &h, 3.0 / n as f64);
        rec.check(&format!("projection n = {n}"), err <= modulus + 1e-12, format!("error {err:.4}, modulus {modulus:.4}"));
        projection.push(json!({ "n": n, "sup_error": err, "modulus": modulus, "energy": m.form.energy(&p) }));
    }
    let values = json!({ "partition": constants, "piecewise_harmonic": approx, "projection": projection });
    rec.finish("approx", c, values)
}

pub fn hke(c: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let mut rec = Recorder::new(out)?;
    cap(c.depth, HKE_MAX_DEPTH, "hke")?;
    if c.depth < 2 {
        return Err(LabError::Domain(format!("hke needs depth at least 2, got {}", c.depth)).into());
    }
    let r = envelope_sweep(&c.spec, &[c.depth - 1, c.depth])?;
    let spread = r.c3_group_range.1 / r.c3_group_range.0;
    rec.check(
        "near-diagonal lower bound",
        r.c3 > 0.0 && r.lower_violations == 0 && spread <= ENVELOPE_SPREAD,
        format!("c3 {:.4}, spread {spread:.3}", r.c3),
    );
    rec.check(
        "upper envelope",
        r.c1 > 0.0 && r.upper_violations == 0,
        format!("c1 {:.4}, C1 {:.4}", r.c1, r.big_c1),
    );
    fs::write(rec.path("envelope.json"), serde_json::to_string_pretty(&r)? + "\n")?;
    rec.finish("hke", c, serde_json::to_value(&r)?)
}

/// The full acceptance suite; per-criterion timings go to `timings.json`.
pub fn all(c: &ExperimentConfig, out: &Path) -> Result<(Summary, Vec<CriterionReport>)> {
    let mut rec = Recorder::new(out)?;
    let reports = run_all()?;
    for r in &reports {
        rec.check(&format!("criterion {}: {}", r.id, r.title), r.passed, failed_checks(r));
    }
    let timings: Vec<Value> = reports.iter().map(|r| json!({ "id": r.id, "seconds": r.seconds })).collect();
    fs::write(rec.path("timings.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
    let criteria: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "id": r.id, "title": r.title, "passed": r.passed, "checks": r.checks }))
        .collect();
    let summary = rec.finish("all", c, json!({ "criteria": criteria }))?;
    Ok((summary, reports))
}

fn failed_checks(r: &CriterionReport) -> String {
    r.checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ")
}
