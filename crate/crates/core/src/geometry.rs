//! Cell complexes of the N-dimensional scale-irregular gasket at finite depth.
//!
//! Every point of `V_n` is addressed by integer barycentric coordinates
//! `(a_1, ..., a_N)` with respect to `q_0` and common denominator
//! `L_n = l_1 ... l_n`. A depth-`n` cell is the image of the unit simplex
//! under `F_w`; its corner `q_0`-image has coordinates `o_n`, obtained from
//! the parent offset by `o_n = l_n * o_{n-1} + w_n`, and its remaining
//! corners are `o_n + e_j`. Vertex identification is therefore exact.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Hard cap on the number of cells a single graph may hold.
pub const MAX_CELLS: u128 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasketSpec {
    dimension: usize,
    levels: Vec<u32>,
}

impl GasketSpec {
    pub fn new(dimension: usize, levels: Vec<u32>) -> Result<Self> {
        if dimension < 2 {
            return Err(LabError::Domain(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        if levels.is_empty() {
            return Err(LabError::Domain("level sequence is empty".into()));
        }
        if let Some(bad) = levels.iter().find(|&&l| l < 2) {
            return Err(LabError::Domain(format!(
                "every level must be at least 2, got {bad}"
            )));
        }
        Ok(Self { dimension, levels })
    }

    /// The self-similar level-`l` gasket truncated to `depth` generations.
    pub fn constant(dimension: usize, level: u32, depth: usize) -> Result<Self> {
        Self::new(dimension, vec![level; depth.max(1)])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn max_depth(&self) -> usize {
        self.levels.len()
    }

    pub fn is_constant(&self) -> bool {
        self.levels.windows(2).all(|w| w[0] == w[1])
    }

    /// `L_n = l_1 ... l_n`.
    pub fn side_denominator(&self, depth: usize) -> Result<u128> {
        self.check_depth(depth)?;
        self.levels[..depth].iter().try_fold(1u128, |acc, &l| {
            acc.checked_mul(l as u128).ok_or(LabError::Overflow("L_n"))
        })
    }

    /// `M_n = #S_{l_1} ... #S_{l_n}`.
    pub fn cell_count(&self, depth: usize) -> Result<u128> {
        self.check_depth(depth)?;
        self.levels[..depth].iter().try_fold(1u128, |acc, &l| {
            acc.checked_mul(simplex_count(l, self.dimension)?)
                .ok_or(LabError::Overflow("M_n"))
        })
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth > self.levels.len() {
            return Err(LabError::DepthOutOfRange {
                depth,
                available: self.levels.len(),
            });
        }
        Ok(())
    }
}

pub fn binomial(n: u128, k: u128) -> Result<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .ok_or(LabError::Overflow("binomial"))?
            / (i + 1);
    }
    Ok(acc)
}

/// `#S_l = binomial(l - 1 + N, N)`.
pub fn simplex_count(level: u32, dimension: usize) -> Result<u128> {
    binomial(level as u128 - 1 + dimension as u128, dimension as u128)
}

/// All multi-indices `(i_1, ..., i_N)` with nonnegative entries summing to at
/// most `l - 1`, in lexicographic order.
pub fn enumerate_s(level: u32, dimension: usize) -> Result<Vec<Vec<u32>>> {
    if level < 2 || dimension < 2 {
        return Err(LabError::Domain(format!(
            "enumerate_s needs l >= 2 and N >= 2, got l = {level}, N = {dimension}"
        )));
    }
    fn rec(prefix: &mut Vec<u32>, remaining: u32, dimension: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dimension {
            out.push(prefix.clone());
            return;
        }
        for i in 0..=remaining {
            prefix.push(i);
            rec(prefix, remaining - i, dimension, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(dimension), level - 1, dimension, &mut out);
    Ok(out)
}

/// Address `w = w_1 ... w_n` of a depth-`n` cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    components: Vec<Vec<u32>>,
}

impl Word {
    pub fn root() -> Self {
        Self {
            components: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<u32>] {
        &self.components
    }

    pub fn child(&self, index: &[u32]) -> Self {
        let mut components = self.components.clone();
        components.push(index.to_vec());
        Self { components }
    }

    pub fn parent(&self) -> Option<Self> {
        let mut components = self.components.clone();
        components.pop().map(|_| Self { components })
    }
}

/// Components separated by `/`, entries by `:`; the root word prints empty.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                f.write_str("/")?;
            }
            for (j, i) in c.iter().enumerate() {
                if j > 0 {
                    f.write_str(":")?;
                }
                write!(f, "{i}")?;
            }
        }
        Ok(())
    }
}

/// Integer barycentric coordinates of a vertex of `V_n` (denominator `L_n`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexKey {
    depth: usize,
    coords: Vec<u128>,
}

impl VertexKey {
    pub fn new(depth: usize, coords: Vec<u128>) -> Self {
        Self { depth, coords }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn coords(&self) -> &[u128] {
        &self.coords
    }

    /// The same point expressed at the next depth (denominator times `level`).
    pub fn refine(&self, level: u32) -> Self {
        Self {
            depth: self.depth + 1,
            coords: self.coords.iter().map(|&a| a * level as u128).collect(),
        }
    }

    /// Coordinates relative to `q_0` as fractions of the simplex side.
    pub fn barycentric(&self, denominator: u128) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&a| a as f64 / denominator as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub word: Word,
    /// Indices of `F_w(q_0), ..., F_w(q_N)`.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub multiplicity: u32,
}

#[derive(Debug, Clone)]
pub struct GasketGraph {
    spec: GasketSpec,
    depth: usize,
    denominator: u128,
    vertices: Vec<VertexKey>,
    index: HashMap<VertexKey, usize>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    boundary: Vec<usize>,
}

/// Builds the depth-`depth` approximation of `K^l`.
pub fn build_graph(spec: &GasketSpec, depth: usize) -> Result<GasketGraph> {
    let dimension = spec.dimension();
    let denominator = spec.side_denominator(depth)?;
    let cell_count = spec.cell_count(depth)?;
    if cell_count > MAX_CELLS {
        return Err(LabError::ResourceCap(format!(
            "{cell_count} cells at depth {depth} exceeds the cap of {MAX_CELLS}"
        )));
    }

    // (offset of F_w(q_0), word), words in lexicographic order with w_n fastest.
    let mut frontier: Vec<(Vec<u128>, Word)> = vec![(vec![0; dimension], Word::root())];
    for &level in &spec.levels()[..depth] {
        let children = enumerate_s(level, dimension)?;
        let mut next = Vec::with_capacity(frontier.len() * children.len());
        for (offset, word) in &frontier {
            for child in &children {
                let o = offset
                    .iter()
                    .zip(child)
                    .map(|(&a, &i)| a * level as u128 + i as u128)
                    .collect();
                next.push((o, word.child(child)));
            }
        }
        frontier = next;
    }

    let mut vertices = Vec::new();
    let mut index = HashMap::new();
    let mut intern = |key: VertexKey, vertices: &mut Vec<VertexKey>| -> usize {
        *index.entry(key.clone()).or_insert_with(|| {
            vertices.push(key);
            vertices.len() - 1
        })
    };

    let mut cells = Vec::with_capacity(frontier.len());
    for (offset, word) in frontier {
        let mut corner_ids = Vec::with_capacity(dimension + 1);
        corner_ids.push(intern(VertexKey::new(depth, offset.clone()), &mut vertices));
        for j in 0..dimension {
            let mut c = offset.clone();
            c[j] += 1;
            corner_ids.push(intern(VertexKey::new(depth, c), &mut vertices));
        }
        cells.push(Cell {
            word,
            vertices: corner_ids,
        });
    }

    let mut edge_mult: HashMap<(usize, usize), u32> = HashMap::new();
    for cell in &cells {
        for (a, &u) in cell.vertices.iter().enumerate() {
            for &v in &cell.vertices[a + 1..] {
                *edge_mult.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
    }
    let mut edges: Vec<Edge> = edge_mult
        .into_iter()
        .map(|((u, v), multiplicity)| Edge { u, v, multiplicity })
        .collect();
    edges.sort_by_key(|e| (e.u, e.v));

    let mut neighbors = vec![Vec::new(); vertices.len()];
    for e in &edges {
        neighbors[e.u].push(e.v);
        neighbors[e.v].push(e.u);
    }

    let corner_key = |j: Option<usize>| {
        let mut c = vec![0u128; dimension];
        if let Some(j) = j {
            c[j] = denominator;
        }
        VertexKey::new(depth, c)
    };
    let mut boundary = vec![index[&corner_key(None)]];
    boundary.extend((0..dimension).map(|j| index[&corner_key(Some(j))]));

    let truncated = GasketSpec {
        dimension,
        levels: spec.levels()[..depth].to_vec(),
    };

    Ok(GasketGraph {
        spec: truncated,
        depth,
        denominator,
        vertices,
        index,
        cells,
        edges,
        neighbors,
        boundary,
    })
}

impl GasketGraph {
    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Levels `l_1, ..., l_n` used up to this depth.
    pub fn levels(&self) -> &[u32] {
        &self.spec.levels
    }

    /// `L_n`; edges have length `1 / L_n`.
    pub fn denominator(&self) -> u128 {
        self.denominator
    }

    pub fn edge_length(&self) -> f64 {
        1.0 / self.denominator as f64
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[VertexKey] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Images of `V_0`, ordered `q_0, ..., q_N`.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn vertex_index(&self, key: &VertexKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Number of children per cell at the last generation, `#S_{l_n}`.
    pub fn branching(&self) -> Result<usize> {
        match self.spec.levels.last() {
            Some(&l) => Ok(simplex_count(l, self.dimension())? as usize),
            None => Ok(1),
        }
    }

    /// Parent (depth `n-1`) index of a cell; cells are stored with `w_n` varying fastest.
    pub fn parent_cell(&self, cell: usize) -> Result<usize> {
        Ok(cell / self.branching()?)
    }

    /// Hop counts from `source` to every vertex (breadth-first search).
    pub fn hop_distances(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertices.len()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.vertices.is_empty() || self.hop_distances(0).iter().all(|&d| d != u32::MAX)
    }

    /// Euclidean distance between two vertices, with the simplex of side 1.
    ///
    /// For a displacement `c` in the basis `q_k - q_0` the Gram matrix has
    /// ones on the diagonal and `1/2` elsewhere.
    pub fn euclidean_distance(&self, u: usize, v: usize) -> f64 {
        let scale = self.denominator as f64;
        let c: Vec<f64> = self.vertices[u]
            .coords
            .iter()
            .zip(&self.vertices[v].coords)
            .map(|(&a, &b)| (a as f64 - b as f64) / scale)
            .collect();
        let mut sq = 0.0;
        for j in 0..c.len() {
            sq += c[j] * c[j];
            for k in j + 1..c.len() {
                sq += c[j] * c[k];
            }
        }
        sq.max(0.0).sqrt()
    }
}

/// Shortest-path length with every edge weighted `1 / L_n`.
pub fn graph_distance(graph: &GasketGraph, u: usize, v: usize) -> Result<f64> {
    let n = graph.vertex_count();
    if u >= n || v >= n {
        return Err(LabError::Domain(format!(
            "vertex index out of range: ({u}, {v}) with {n} vertices"
        )));
    }
    let hops = graph.hop_distances(u)[v];
    Ok(hops as f64 * graph.edge_length())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg(depth: usize) -> GasketGraph {
        build_graph(&GasketSpec::constant(2, 2, depth.max(1)).unwrap(), depth).unwrap()
    }

    #[test]
    fn enumerate_s_counts() {
        assert_eq!(
            enumerate_s(2, 2).unwrap(),
            vec![vec![0, 0], vec![0, 1], vec![1, 0]]
        );
        assert_eq!(enumerate_s(3, 2).unwrap().len(), 6);
        assert_eq!(enumerate_s(2, 3).unwrap().len(), 4);
        for l in 2..7 {
            for n in 2..5 {
                let s = enumerate_s(l, n).unwrap();
                assert_eq!(s.len() as u128, simplex_count(l, n).unwrap());
                assert!(s.windows(2).all(|w| w[0] < w[1]), "lexicographic order");
                assert!(s.iter().all(|i| i.iter().sum::<u32>() <= l - 1));
            }
        }
    }

    #[test]
    fn enumerate_s_rejects_small_inputs() {
        assert!(matches!(enumerate_s(1, 2), Err(LabError::Domain(_))));
        assert!(matches!(enumerate_s(2, 1), Err(LabError::Domain(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(GasketSpec::new(1, vec![2]).is_err());
        assert!(GasketSpec::new(2, vec![]).is_err());
        assert!(GasketSpec::new(2, vec![2, 1]).is_err());
        assert!(GasketSpec::new(2, vec![2, 3]).unwrap().levels() == [2, 3]);
        assert!(GasketSpec::constant(2, 3, 4).unwrap().is_constant());
        assert!(!GasketSpec::new(2, vec![2, 3]).unwrap().is_constant());
    }

    #[test]
    fn depth_one_sg() {
        let g = sg(1);
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.cell_count(), 3);
        assert_eq!(g.edges().len(), 9);
        assert!(g.edges().iter().all(|e| e.multiplicity == 1));
    }

    #[test]
    fn depth_zero_is_the_simplex() {
        let g = build_graph(&GasketSpec::new(2, vec![3]).unwrap(), 0).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.cell_count(), 1);
        assert_eq!(g.boundary(), &[0, 1, 2]);
    }

    #[test]
    fn mixed_levels_cell_count() {
        let g = build_graph(&GasketSpec::new(2, vec![2, 3]).unwrap(), 2).unwrap();
        assert_eq!(g.cell_count(), 18);
        assert_eq!(g.denominator(), 6);
    }

    #[test]
    fn depth_beyond_levels_is_rejected() {
        let spec = GasketSpec::new(2, vec![2, 3]).unwrap();
        assert!(matches!(
            build_graph(&spec, 3),
            Err(LabError::DepthOutOfRange { depth: 3, available: 2 })
        ));
    }

    #[test]
    fn sg_vertex_counts() {
        for n in 0..=7 {
            let g = sg(n);
            assert_eq!(g.vertex_count(), (3usize.pow(n as u32 + 1) + 3) / 2);
            assert!(g.is_connected());
        }
    }

    #[test]
    fn cells_meet_only_in_vertices() {
        for spec in [
            GasketSpec::new(2, vec![2, 3]).unwrap(),
            GasketSpec::new(3, vec![2, 2]).unwrap(),
            GasketSpec::new(2, vec![4]).unwrap(),
        ] {
            let g = build_graph(&spec, spec.max_depth()).unwrap();
            let n = g.dimension();
            for (a, ca) in g.cells().iter().enumerate() {
                assert_eq!(ca.vertices.len(), n + 1);
                let mut sorted = ca.vertices.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), n + 1);
                for cb in &g.cells()[a + 1..] {
                    let shared = ca.vertices.iter().filter(|v| cb.vertices.contains(v)).count();
                    assert!(shared <= n);
                    // gasket cells share at most one vertex, so no edge is doubled
                    assert!(shared <= 1);
                }
            }
        }
    }

    #[test]
    fn corners_are_unit_distance_apart() {
        for n in 0..=6 {
            let g = sg(n);
            let b = g.boundary();
            for j in 0..3 {
                for k in 0..3 {
                    let d = graph_distance(&g, b[j], b[k]).unwrap();
                    assert_eq!(d, if j == k { 0.0 } else { 1.0 });
                }
            }
        }
    }

    #[test]
    fn adjacent_vertices_are_one_edge_apart() {
        let g = sg(3);
        let e = g.edges()[5];
        assert_eq!(graph_distance(&g, e.u, e.v).unwrap(), 1.0 / 8.0);
        assert!(graph_distance(&g, 0, 10_000).is_err());
    }

    #[test]
    fn parent_indices_follow_words() {
        let g = build_graph(&GasketSpec::new(2, vec![3, 2]).unwrap(), 2).unwrap();
        let p = build_graph(&GasketSpec::new(2, vec![3, 2]).unwrap(), 1).unwrap();
        for (i, c) in g.cells().iter().enumerate() {
            let parent = g.parent_cell(i).unwrap();
            assert_eq!(Some(p.cells()[parent].word.clone()), c.word.parent());
        }
    }

    #[test]
    fn euclidean_side_is_one() {
        let g = sg(2);
        let b = g.boundary();
        assert!((g.euclidean_distance(b[0], b[1]) - 1.0).abs() < 1e-15);
        assert!((g.euclidean_distance(b[1], b[2]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn word_display() {
        let w = Word::root().child(&[1, 0]).child(&[0, 2]);
        assert_eq!(w.to_string(), "1:0/0:2");
        assert_eq!(Word::root().to_string(), "");
    }
}
