//! Finite metric measure spaces, epsilon-chain metrics and epsilon-nets.
//!
//! Balls are open: `B(x, r) = {y : d(x, y) < r}`. An epsilon-chain hops only
//! between points at distance strictly below `epsilon`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::geometry::GasketGraph;
use crate::measure::VertexMeasure;

/// Largest point set for which a full distance table is materialized.
pub const MAX_POINTS: usize = 12_000;

/// Above this size pair scans switch from exhaustive to sampled.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 2000;

pub const SAMPLED_PAIRS: usize = 100_000;

#[derive(Debug, Clone)]
enum Metric {
    /// Graph metric: hop counts times a unit length.
    Hops { hops: Vec<u32>, unit: f64 },
    Table(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    n: usize,
    metric: Metric,
    masses: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl FiniteMetricSpace {
    /// The shortest-path metric of `graph` with edge length `1 / L_n`.
    pub fn from_graph(graph: &GasketGraph, measure: &VertexMeasure<f64>) -> Result<Self> {
        let n = graph.vertex_count();
        Self::check_size(n, measure)?;
        let rows: Vec<Vec<u32>> = (0..n).into_par_iter().map(|s| graph.hop_distances(s)).collect();
        if rows.iter().flatten().any(|&h| h == u32::MAX) {
            return Err(LabError::Structural("graph is disconnected".into()));
        }
        Ok(Self {
            n,
            metric: Metric::Hops {
                hops: rows.concat(),
                unit: graph.edge_length(),
            },
            masses: measure.masses().to_vec(),
            edges: graph.edges().iter().map(|e| (e.u, e.v)).collect(),
        })
    }

    /// Straight-line Euclidean distances between the vertices of `graph`.
    pub fn euclidean(graph: &GasketGraph, measure: &VertexMeasure<f64>) -> Result<Self> {
        let n = graph.vertex_count();
        Self::check_size(n, measure)?;
        let table: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|u| (0..n).map(move |v| graph.euclidean_distance(u, v)))
            .collect();
        Ok(Self {
            n,
            metric: Metric::Table(table),
            masses: measure.masses().to_vec(),
            edges: graph.edges().iter().map(|e| (e.u, e.v)).collect(),
        })
    }

    /// An explicit symmetric distance table with zero diagonal.
    pub fn from_table(table: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        let n = table.len();
        if masses.len() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: masses.len(),
            });
        }
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0)) {
            return Err(LabError::Domain(format!("point masses must be positive, got {m}")));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(LabError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &d) in row.iter().enumerate() {
                let ok = if i == j { d == 0.0 } else { d > 0.0 && d == table[j][i] };
                if !ok {
                    return Err(LabError::Domain(format!(
                        "distance table is not a metric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            metric: Metric::Table(table.concat()),
            masses,
            edges: Vec::new(),
        })
    }

    fn check_size(n: usize, measure: &VertexMeasure<f64>) -> Result<()> {
        if n > MAX_POINTS {
            return Err(LabError::ResourceCap(format!(
                "{n} points exceed the distance-table cap of {MAX_POINTS}"
            )));
        }
        if measure.len() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: measure.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        match &self.metric {
            Metric::Hops { hops, unit } => hops[u * self.n + v] as f64 * unit,
            Metric::Table(t) => t[u * self.n + v],
        }
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.masses[v]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Graph edges, when the space came from a graph.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Smallest nonzero distance.
    pub fn resolution(&self) -> f64 {
        match &self.metric {
            Metric::Hops { unit, .. } => *unit,
            Metric::Table(t) => t.iter().copied().filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn diameter(&self) -> f64 {
        (0..self.n)
            .flat_map(|u| (0..self.n).map(move |v| (u, v)))
            .map(|(u, v)| self.distance(u, v))
            .fold(0.0, f64::max)
    }

    /// `B(x, r)` in ascending index order.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&v| self.distance(x, v) < r).collect()
    }

    pub fn ball_mass(&self, x: usize, r: f64) -> f64 {
        (0..self.n)
            .filter(|&v| self.distance(x, v) < r)
            .map(|v| self.masses[v])
            .sum()
    }

    /// Largest violation of the triangle inequality over all triples (small spaces only).
    pub fn triangle_defect(&self) -> f64 {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut worst: f64 = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        worst = worst.max(self.distance(a, c) - self.distance(a, b) - self.distance(b, c));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `d_eps(x, .)` and shortest-chain predecessors from `x` (dense Dijkstra).
    fn chain_tree(&self, epsilon: f64, x: usize) -> (Vec<f64>, Vec<usize>) {
        let n = self.n;
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[x] = 0.0;
        for _ in 0..n {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                let d = self.distance(u, v);
                if d < epsilon && best + d < dist[v] {
                    dist[v] = best + d;
                    pred[v] = u;
                }
            }
        }
        (dist, pred)
    }

    /// `d_eps(x, v)` for every `v`.
    pub fn chain_distances(&self, epsilon: f64, x: usize) -> Vec<f64> {
        self.chain_tree(epsilon, x).0
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(LabError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `d_eps(x, y)`: infimum of chain lengths over epsilon-chains; infinite if none exists.
pub fn chain_metric(space: &FiniteMetricSpace, epsilon: f64, x: usize, y: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(space.chain_tree(epsilon, x).0[y])
}

/// A shortest epsilon-chain from `x` to `y`, endpoints included.
pub fn chain_path(space: &FiniteMetricSpace, epsilon: f64, x: usize, y: usize) -> Result<Vec<usize>> {
    check_epsilon(epsilon)?;
    let (dist, pred) = space.chain_tree(epsilon, x);
    if !dist[y].is_finite() {
        return Err(LabError::NoChain { epsilon, x, y });
    }
    let mut path = vec![y];
    let mut v = y;
    while v != x {
        v = pred[v];
        path.push(v);
    }
    path.reverse();
    Ok(path)
}

/// The pairs used by constant scans: all pairs for small spaces, seeded samples otherwise.
pub fn sample_pairs(n: usize, seed: u64) -> Vec<(usize, usize)> {
    if n <= EXHAUSTIVE_PAIR_LIMIT {
        return (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SAMPLED_PAIRS)
        .map(|_| {
            let pair = sample(&mut rng, n, 2);
            (pair.index(0), pair.index(1))
        })
        .collect()
}

/// `max d_eps(x, y) / d(x, y)` over sampled pairs and the given epsilons.
pub fn chain_constant(space: &FiniteMetricSpace, epsilons: &[f64], seed: u64) -> Result<f64> {
    if epsilons.is_empty() {
        return Err(LabError::Domain("empty epsilon list".into()));
    }
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let mut pairs = sample_pairs(space.len(), seed);
    pairs.sort_unstable();
    let mut by_source: Vec<(usize, Vec<usize>)> = Vec::new();
    for (u, v) in pairs {
        match by_source.last_mut() {
            Some((s, targets)) if *s == u => targets.push(v),
            _ => by_source.push((u, vec![v])),
        }
    }
    let worst = epsilons
        .iter()
        .flat_map(|&e| by_source.iter().map(move |src| (e, src)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(e, (u, targets))| {
            let dist = space.chain_distances(e, *u);
            targets
                .iter()
                .map(|&v| dist[v] / space.distance(*u, v))
                .fold(1.0, f64::max)
        })
        .reduce(|| 1.0, f64::max);
    Ok(worst)
}

/// Greedy maximal epsilon-separated subset, scanning points in ascending order.
pub fn epsilon_net(space: &FiniteMetricSpace, epsilon: f64) -> Result<Vec<usize>> {
    check_epsilon(epsilon)?;
    let mut net: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if net.iter().all(|&q| space.distance(p, q) >= epsilon) {
            net.push(p);
        }
    }
    Ok(net)
}

/// Whether every point lies within `epsilon` of `net` (strictly).
pub fn net_covers(space: &FiniteMetricSpace, net: &[usize], epsilon: f64) -> bool {
    (0..space.len()).all(|p| net.iter().any(|&z| space.distance(p, z) < epsilon))
}

/// The point produced by the midpoint construction along a shortest epsilon-chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Midpoint {
    pub point: usize,
    /// `|2 d_eps(x, z) - d_eps(x, y)|`.
    pub defect_x: f64,
    /// `|2 d_eps(y, z) - d_eps(x, y)|`.
    pub defect_y: f64,
}

/// Takes a shortest epsilon-chain `x = x_0, ..., x_n = y` and returns `x_k`
/// for the smallest `k >= 1` whose prefix length reaches half the total.
pub fn chain_midpoint(space: &FiniteMetricSpace, epsilon: f64, x: usize, y: usize) -> Result<Midpoint> {
    let path = chain_path(space, epsilon, x, y)?;
    let total: f64 = path.windows(2).map(|w| space.distance(w[0], w[1])).sum();
    let mut prefix = 0.0;
    let mut point = x;
    for w in path.windows(2) {
        prefix += space.distance(w[0], w[1]);
        if 2.0 * prefix >= total {
            point = w[1];
            break;
        }
    }
    let d_xy = chain_metric(space, epsilon, x, y)?;
    let d_xz = chain_metric(space, epsilon, x, point)?;
    let d_yz = chain_metric(space, epsilon, y, point)?;
    Ok(Midpoint {
        point,
        defect_x: (2.0 * d_xz - d_xy).abs(),
        defect_y: (2.0 * d_yz - d_xy).abs(),
    })
}

/// Seeded uniform vertex pairs for randomized checks.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_graph, GasketSpec};
    use crate::measure::uniform_cell_measure;

    fn sg_space(depth: usize) -> (GasketGraph, FiniteMetricSpace) {
        let g = build_graph(&GasketSpec::constant(2, 2, depth.max(1)).unwrap(), depth).unwrap();
        let m = uniform_cell_measure::<f64>(&g).to_vertex_measure(&g).unwrap();
        let s = FiniteMetricSpace::from_graph(&g, &m).unwrap();
        (g, s)
    }

    fn path3() -> FiniteMetricSpace {
        FiniteMetricSpace::from_table(
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
            vec![1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn large_epsilon_is_single_hop() {
        let s = path3();
        assert_eq!(chain_metric(&s, 3.0, 0, 2).unwrap(), 2.0);
        assert_eq!(chain_metric(&s, 1.5, 0, 2).unwrap(), 2.0);
        assert!(chain_metric(&s, 1.0, 0, 2).unwrap().is_infinite());
        assert!(chain_path(&s, 1.0, 0, 2).is_err());
    }

    #[test]
    fn path_midpoint() {
        let s = path3();
        let m = chain_midpoint(&s, 1.5, 0, 2).unwrap();
        assert_eq!(m.point, 1);
        assert_eq!(m.defect_x, 0.0);
        let same = chain_midpoint(&s, 1.5, 1, 1).unwrap();
        assert_eq!(same.point, 1);
        assert_eq!(same.defect_y, 0.0);
    }

    #[test]
    fn corners_at_depth_four() {
        let (g, s) = sg_space(4);
        let [a, b, _] = [g.boundary()[0], g.boundary()[1], g.boundary()[2]];
        let d = chain_metric(&s, 2.0 / 16.0, a, b).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn graph_metric_chain_constant_is_one() {
        let (g, s) = sg_space(3);
        let c = chain_constant(&s, &[1.5 * g.edge_length(), 0.3, 2.0], 0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_chain_constant_exceeds_one() {
        let g = build_graph(&GasketSpec::constant(2, 2, 3).unwrap(), 3).unwrap();
        let m = uniform_cell_measure::<f64>(&g).to_vertex_measure(&g).unwrap();
        let s = FiniteMetricSpace::euclidean(&g, &m).unwrap();
        let coarse = chain_constant(&s, &[0.5], 0).unwrap();
        let fine = chain_constant(&s, &[0.13], 0).unwrap();
        assert!(fine > 1.0);
        assert!(fine >= coarse);
        assert!(s.triangle_defect() < 1e-12);
    }

    #[test]
    fn nets() {
        let (_, s) = sg_space(4);
        assert_eq!(epsilon_net(&s, 5.0).unwrap(), vec![0]);
        assert_eq!(epsilon_net(&s, 1e-3).unwrap().len(), s.len());
        let net = epsilon_net(&s, 0.25).unwrap();
        assert!(net_covers(&s, &net, 0.25));
        for (i, &a) in net.iter().enumerate() {
            for &b in &net[i + 1..] {
                assert!(s.distance(a, b) >= 0.25);
            }
        }
        assert_eq!(net, epsilon_net(&s, 0.25).unwrap());
    }

    #[test]
    fn table_validation() {
        assert!(FiniteMetricSpace::from_table(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0; 2]).is_err());
        assert!(FiniteMetricSpace::from_table(vec![vec![0.0]], vec![0.0]).is_err());
    }
}
