//! The conductance random walk of a form: exit times, transition densities
//! and seeded Monte Carlo.
//!
//! Discrete steps convert to continuum time through `t = k (1 - theta) / T_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::forms::QuadraticForm;
use crate::geometry::GasketGraph;
use crate::linalg::{solve_spd, CsrMatrix};
use crate::measure::VertexMeasure;

/// Cap on the number of matrix applications for one transition row.
pub const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct WalkOperator {
    transition: CsrMatrix<f64>,
    stationary: Vec<f64>,
    laziness: f64,
}

/// `P(u, v) = (1 - theta) c(u, v) / c(u)` off the diagonal and `theta` on it.
pub fn build_walk(form: &QuadraticForm<f64>, laziness: f64) -> Result<WalkOperator> {
    if !(0.0..1.0).contains(&laziness) {
        return Err(LabError::Domain(format!("laziness must lie in [0, 1), got {laziness}")));
    }
    let n = form.dim();
    let a = form.matrix();
    let mut totals = vec![0.0; n];
    for (u, total) in totals.iter_mut().enumerate() {
        for (v, x) in a.row(u) {
            if v != u {
                if *x > 0.0 {
                    return Err(LabError::Domain(format!("negative conductance between {u} and {v}")));
                }
                *total -= x;
            }
        }
        if *total <= 0.0 {
            return Err(LabError::Structural(format!("vertex {u} is isolated")));
        }
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for u in 0..n {
        if laziness > 0.0 {
            triplets.push((u, u, laziness));
        }
        for (v, x) in a.row(u) {
            if v != u {
                triplets.push((u, v, (1.0 - laziness) * -x / totals[u]));
            }
        }
    }
    let sum: f64 = totals.iter().sum();
    Ok(WalkOperator {
        transition: CsrMatrix::from_triplets(n, triplets),
        stationary: totals.into_iter().map(|c| c / sum).collect(),
        laziness,
    })
}

impl WalkOperator {
    pub fn len(&self) -> usize {
        self.transition.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transition(&self) -> &CsrMatrix<f64> {
        &self.transition
    }

    /// Stationary probability, proportional to the vertex conductance totals.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn laziness(&self) -> f64 {
        self.laziness
    }

    pub fn row_sum_residual(&self) -> f64 {
        (0..self.len())
            .map(|u| (self.transition.row(u).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |pi(u) P(u, v) - pi(v) P(v, u)|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        self.transition
            .triplets()
            .map(|(u, v, p)| (self.stationary[u] * p - self.stationary[v] * self.transition.get(v, u)).abs())
            .fold(0.0, f64::max)
    }

    /// One step of a distribution: `mu P`.
    pub fn step(&self, mu: &[f64]) -> Vec<f64> {
        self.transition.vec_mul(mu)
    }

    /// Continuum time of `steps` walk steps at a depth with time scale `T_n`.
    pub fn continuum_time(&self, steps: usize, time_scale: f64) -> f64 {
        steps as f64 * (1.0 - self.laziness) / time_scale
    }

    /// Number of steps closest to continuum time `t`.
    pub fn steps_for_time(&self, t: f64, time_scale: f64) -> usize {
        (t * time_scale / (1.0 - self.laziness)).round().max(1.0) as usize
    }
}

/// Vertices at graph distance strictly below `radius` from `center`.
pub fn graph_ball(graph: &GasketGraph, center: usize, radius: f64) -> Vec<usize> {
    let unit = graph.edge_length();
    graph
        .hop_distances(center)
        .into_iter()
        .enumerate()
        .filter(|(_, h)| (*h as f64) * unit < radius)
        .map(|(v, _)| v)
        .collect()
}

/// Expected number of steps to leave `ball`, for every start in `ball`.
///
/// Solves `(I - P)_{BB} tau = 1` in the symmetrized form `D_pi (I - P)`.
pub fn exit_times(walk: &WalkOperator, ball: &[usize]) -> Result<Vec<f64>> {
    let n = walk.len();
    if ball.len() >= n {
        return Err(LabError::Domain("ball is the whole space; the exit time is infinite".into()));
    }
    if ball.is_empty() {
        return Ok(Vec::new());
    }
    let pi = walk.stationary();
    let mut triplets = Vec::new();
    let mut position = vec![usize::MAX; n];
    for (i, &u) in ball.iter().enumerate() {
        position[u] = i;
    }
    for (i, &u) in ball.iter().enumerate() {
        triplets.push((i, i, pi[u]));
        for (v, p) in walk.transition.row(u) {
            let j = position[v];
            if j != usize::MAX {
                triplets.push((i, j, -pi[u] * p));
            }
        }
    }
    let a = CsrMatrix::from_triplets(ball.len(), triplets);
    let rhs: Vec<f64> = ball.iter().map(|&u| pi[u]).collect();
    solve_spd(&a, &rhs)
}

/// Expected exit time in steps from `B(center, radius)` started at the center.
pub fn exit_time_exact(walk: &WalkOperator, graph: &GasketGraph, center: usize, radius: f64) -> Result<f64> {
    let ball = graph_ball(graph, center, radius);
    let tau = exit_times(walk, &ball)?;
    let i = ball.iter().position(|&v| v == center).ok_or(LabError::EmptyBall { center, radius })?;
    Ok(tau[i])
}

/// `p_k(x, .) = P^k(x, .) / m(.)` for every requested `k` (ascending order
/// not required), computed by repeated left multiplication.
pub fn heat_kernel_rows(
    walk: &WalkOperator,
    source: usize,
    steps: &[usize],
    measure: &VertexMeasure<f64>,
) -> Result<Vec<Vec<f64>>> {
    let n = walk.len();
    if measure.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: measure.len(),
        });
    }
    let max = steps.iter().copied().max().unwrap_or(0);
    if max > MAX_STEPS {
        return Err(LabError::ResourceCap(format!("{max} steps exceed the cap of {MAX_STEPS}")));
    }
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);
    let mut out = vec![Vec::new(); steps.len()];
    let mut mu = vec![0.0; n];
    mu[source] = 1.0;
    let mut done = 0;
    for i in order {
        while done < steps[i] {
            mu = walk.step(&mu);
            done += 1;
        }
        out[i] = mu
            .iter()
            .zip(measure.masses())
            .map(|(p, m)| p / m)
            .collect();
    }
    Ok(out)
}

/// `p_k(x, .)` for a single `k >= 1`.
pub fn heat_kernel_row(walk: &WalkOperator, steps: usize, source: usize, measure: &VertexMeasure<f64>) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(LabError::Domain("heat kernel needs at least one step".into()));
    }
    Ok(heat_kernel_rows(walk, source, &[steps], measure)?.remove(0))
}

/// When a simulated trajectory stops.
#[derive(Debug, Clone)]
pub struct StopRule {
    /// `inside[v]` is true while the walk may continue from `v`.
    pub inside: Vec<bool>,
    /// Trajectories still inside after this many steps are truncated.
    pub max_steps: u64,
}

impl StopRule {
    pub fn exit_set(n: usize, set: &[usize], max_steps: u64) -> Self {
        let mut inside = vec![false; n];
        for &v in set {
            inside[v] = true;
        }
        Self { inside, max_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloStats {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    pub truncated: usize,
}

/// Seeded trajectory sampling; trial `i` draws from stream `i` of the
/// generator seeded with `seed`, so results do not depend on scheduling.
pub fn walk_montecarlo(walk: &WalkOperator, start: usize, stop: &StopRule, trials: usize, seed: u64) -> Result<MonteCarloStats> {
    if trials == 0 {
        return Err(LabError::Domain("at least one trial is required".into()));
    }
    if stop.inside.len() != walk.len() {
        return Err(LabError::DimensionMismatch {
            expected: walk.len(),
            got: stop.inside.len(),
        });
    }
    let n = walk.len();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .map(|u| {
            let mut acc = 0.0;
            walk.transition
                .row(u)
                .map(|(v, p)| {
                    acc += p;
                    (v, acc)
                })
                .unzip()
        })
        .collect();
    let samples: Vec<(u64, bool)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut v = start;
            let mut k = 0u64;
            while stop.inside[v] && k < stop.max_steps {
                let (targets, cumulative) = &rows[v];
                let x: f64 = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= x).min(targets.len() - 1);
                v = targets[i];
                k += 1;
            }
            (k, stop.inside[v])
        })
        .collect();
    let mean = samples.iter().map(|s| s.0 as f64).sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        samples.iter().map(|s| (s.0 as f64 - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(MonteCarloStats {
        trials,
        mean,
        std_error: (var / trials as f64).sqrt(),
        truncated: samples.iter().filter(|s| s.1).count(),
    })
}
