//! Energy forms on gasket vertex sets.
//!
//! `E^0(f) = sum_{j<k} (f_j - f_k)^2` on the corners of the simplex, and
//! `E^{l,n}(f) = R_n^{-1} sum_{|w| = n} E^0(f o F_w)` at depth `n`. The
//! renormalization factors `r_l` come from tracing the level-1 sum of copies
//! back onto the corners.

use std::collections::HashMap;

use crate::error::{LabError, Result};
use crate::geometry::{build_graph, simplex_count, GasketGraph, GasketSpec, VertexKey};
use crate::linalg::{dot, solve_dense, solve_spd, CsrMatrix};
use crate::measure::{CellMeasure, VertexMeasure};
use crate::scalar::Scalar;

/// Tolerance for the proportionality check in floating arithmetic.
pub const PROPORTIONALITY_TOLERANCE: f64 = 1e-10;

/// A symmetric quadratic form `f -> f^T A f` on vertex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T = f64> {
    matrix: CsrMatrix<T>,
}

/// Measured deviations from the structural invariants of a form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormInvariants {
    pub asymmetry: f64,
    pub max_row_sum: f64,
    /// Most positive off-diagonal entry (a negative conductance if above zero).
    pub max_off_diagonal: f64,
    pub connected: bool,
}

impl FormInvariants {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.asymmetry <= tolerance
            && self.max_row_sum <= tolerance
            && self.max_off_diagonal <= tolerance
    }
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn from_matrix(matrix: CsrMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        Self::from_matrix(CsrMatrix::from_dense(rows))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn energy(&self, f: &[T]) -> T {
        self.bilinear(f, f)
    }

    pub fn bilinear(&self, f: &[T], g: &[T]) -> T {
        dot(f, &self.matrix.mul_vec(g))
    }

    /// `A f`.
    pub fn apply(&self, f: &[T]) -> Vec<T> {
        self.matrix.mul_vec(f)
    }

    /// Conductance `c(u, v) = -A_uv` for `u != v`.
    pub fn conductance(&self, u: usize, v: usize) -> T {
        -self.matrix.get(u, v)
    }

    pub fn scaled(&self, factor: &T) -> Self {
        let triplets = self
            .matrix
            .triplets()
            .map(|(i, j, v)| (i, j, v.clone() * factor.clone()))
            .collect();
        Self::from_matrix(CsrMatrix::from_triplets(self.dim(), triplets))
    }

    pub fn to_f64(&self) -> QuadraticForm<f64> {
        let triplets = self
            .matrix
            .triplets()
            .map(|(i, j, v)| (i, j, v.as_f64()))
            .collect();
        QuadraticForm::from_matrix(CsrMatrix::from_triplets(self.dim(), triplets))
    }

    /// Coordinate-format entries, row-major.
    pub fn to_coo(&self) -> Vec<(usize, usize, T)> {
        self.matrix
            .triplets()
            .map(|(i, j, v)| (i, j, v.clone()))
            .collect()
    }

    /// Symmetry, zero row sums, nonpositive off-diagonal part and
    /// connectivity of the conductance graph. Together these make the form
    /// positive semidefinite with kernel equal to the constants.
    pub fn invariants(&self) -> FormInvariants {
        let n = self.dim();
        let mut max_row_sum: f64 = 0.0;
        let mut max_off_diagonal = f64::NEG_INFINITY;
        for i in 0..n {
            let mut sum = T::zero();
            for (j, v) in self.matrix.row(i) {
                sum = sum + v.clone();
                if i != j {
                    max_off_diagonal = max_off_diagonal.max(v.as_f64());
                }
            }
            max_row_sum = max_row_sum.max(sum.abs().as_f64());
        }
        FormInvariants {
            asymmetry: self.matrix.asymmetry(),
            max_row_sum,
            max_off_diagonal: if max_off_diagonal.is_finite() {
                max_off_diagonal
            } else {
                0.0
            },
            connected: self.components(&vec![true; n]).len() <= 1,
        }
    }

    /// Connected components of the conductance graph restricted to `mask`.
    fn components(&self, mask: &[bool]) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if !mask[start] || seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < comp.len() {
                let u = comp[k];
                k += 1;
                for (v, c) in self.matrix.row(u) {
                    if v != u && mask[v] && !seen[v] && !c.is_zero() {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// `E^0` on `N + 1` points: matrix `(N + 1) I - J`.
pub fn base_form<T: Scalar>(dimension: usize) -> Result<QuadraticForm<T>> {
    if dimension < 2 {
        return Err(LabError::Domain(format!(
            "base form needs N >= 2, got {dimension}"
        )));
    }
    let k = dimension + 1;
    let rows: Vec<Vec<T>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        T::from_int(dimension as i64)
                    } else {
                        -T::one()
                    }
                })
                .collect()
        })
        .collect();
    Ok(QuadraticForm::from_dense(&rows))
}

/// Schur complement of `form` onto `boundary` (in the given order).
pub fn trace_form<T: Scalar>(form: &QuadraticForm<T>, boundary: &[usize]) -> Result<QuadraticForm<T>> {
    let n = form.dim();
    if boundary.is_empty() {
        return Err(LabError::Domain("trace onto an empty boundary".into()));
    }
    let mut is_boundary = vec![false; n];
    for &b in boundary {
        if b >= n || is_boundary[b] {
            return Err(LabError::Domain(format!(
                "invalid or repeated boundary vertex {b}"
            )));
        }
        is_boundary[b] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !is_boundary[v]).collect();
    let a_bb = form.matrix.submatrix(boundary).to_dense();
    if interior.is_empty() {
        return Ok(QuadraticForm::from_dense(&a_bb));
    }
    let a_ii = form.matrix.submatrix(&interior).to_dense();
    let a_ib: Vec<Vec<T>> = interior
        .iter()
        .map(|&i| boundary.iter().map(|&b| form.matrix.get(i, b)).collect())
        .collect();
    // X = A_II^{-1} A_IB, trace = A_BB - A_BI X
    let x = solve_dense(a_ii, a_ib.clone()).map_err(|_| {
        LabError::Structural(
            "interior block is singular: an interior component has no boundary contact".into(),
        )
    })?;
    let k = boundary.len();
    let mut out = a_bb;
    for p in 0..k {
        for q in 0..k {
            let mut acc = T::zero();
            for (r, row) in a_ib.iter().enumerate() {
                if !row[p].is_zero() {
                    acc = acc + row[p].clone() * x[r][q].clone();
                }
            }
            out[p][q] = out[p][q].clone() - acc;
        }
    }
    Ok(QuadraticForm::from_dense(&out))
}

/// Unscaled sum of copies `sum_{i in S_l} E^0(g o F_i)` on the level-1 vertex set.
pub fn level_one_form<T: Scalar>(dimension: usize, level: u32) -> Result<(GasketGraph, QuadraticForm<T>)> {
    let graph = build_graph(&GasketSpec::constant(dimension, level, 1)?, 1)?;
    let form = sum_of_copies(&graph, &T::one());
    Ok((graph, form))
}

fn sum_of_copies<T: Scalar>(graph: &GasketGraph, weight: &T) -> QuadraticForm<T> {
    let n_dim = graph.dimension();
    let diag = T::from_int(n_dim as i64) * weight.clone();
    let off = -weight.clone();
    let mut triplets = Vec::with_capacity(graph.cell_count() * (n_dim + 1) * (n_dim + 1));
    for cell in graph.cells() {
        for &u in &cell.vertices {
            for &v in &cell.vertices {
                let value = if u == v { diag.clone() } else { off.clone() };
                triplets.push((u, v, value));
            }
        }
    }
    QuadraticForm::from_matrix(CsrMatrix::from_triplets(graph.vertex_count(), triplets))
}

/// The scalar `r_l` with `trace = r_l E^0`, and the relative residual of
/// that proportionality.
pub fn trace_proportionality<T: Scalar>(dimension: usize, level: u32) -> Result<(T, f64)> {
    let (graph, form) = level_one_form::<T>(dimension, level)?;
    let traced = trace_form(&form, graph.boundary())?;
    let base = base_form::<T>(dimension)?;
    let r = -traced.matrix.get(0, 1);
    let k = dimension + 1;
    let mut residual: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let expected = base.matrix.get(i, j) * r.clone();
            let diff = (traced.matrix.get(i, j) - expected).abs().as_f64();
            residual = residual.max(diff);
        }
    }
    let scale = r.abs().as_f64();
    let residual = if scale > 0.0 { residual / scale } else { f64::INFINITY };
    Ok((r, residual))
}

/// `r_l`, certified proportional (exactly for rational scalars).
pub fn resistance_scale<T: Scalar>(dimension: usize, level: u32) -> Result<T> {
    let (r, residual) = trace_proportionality::<T>(dimension, level)?;
    let tolerance = if T::EXACT { 0.0 } else { PROPORTIONALITY_TOLERANCE };
    if residual > tolerance {
        return Err(LabError::NotProportional { residual });
    }
    if r <= T::zero() || r >= T::one() {
        return Err(LabError::ScaleOutOfRange(r.as_f64()));
    }
    Ok(r)
}

/// Renormalization data `r_l`, `R_n`, `M_n` for a level sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFormParams<T = f64> {
    dimension: usize,
    levels: Vec<u32>,
    scales: HashMap<u32, T>,
    big_r: Vec<T>,
    cell_counts: Vec<u128>,
}

impl<T: Scalar> ScaledFormParams<T> {
    pub fn new(spec: &GasketSpec) -> Result<Self> {
        let dimension = spec.dimension();
        let mut scales = HashMap::new();
        let mut big_r = vec![T::one()];
        let mut cell_counts = vec![1u128];
        for &l in spec.levels() {
            if !scales.contains_key(&l) {
                scales.insert(l, resistance_scale::<T>(dimension, l)?);
            }
            let r = big_r.last().expect("non-empty").clone() * scales[&l].clone();
            big_r.push(r);
            let m = cell_counts
                .last()
                .expect("non-empty")
                .checked_mul(simplex_count(l, dimension)?)
                .ok_or(LabError::Overflow("M_n"))?;
            cell_counts.push(m);
        }
        Ok(Self {
            dimension,
            levels: spec.levels().to_vec(),
            scales,
            big_r,
            cell_counts,
        })
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

    /// `r_l` for a level occurring in the sequence.
    pub fn scale(&self, level: u32) -> Option<&T> {
        self.scales.get(&level)
    }

    /// `R_n = r_{l_1} ... r_{l_n}`.
    pub fn big_r(&self, depth: usize) -> &T {
        &self.big_r[depth]
    }

    /// `M_n = #S_{l_1} ... #S_{l_n}`.
    pub fn cell_count(&self, depth: usize) -> u128 {
        self.cell_counts[depth]
    }

    /// `T_n = M_n / R_n`.
    pub fn time_scale(&self, depth: usize) -> f64 {
        self.cell_counts[depth] as f64 / self.big_r[depth].as_f64()
    }

    fn check_graph(&self, graph: &GasketGraph) -> Result<()> {
        if graph.dimension() != self.dimension {
            return Err(LabError::DimensionMismatch {
                expected: self.dimension,
                got: graph.dimension(),
            });
        }
        if graph.depth() > self.levels.len() || graph.levels() != &self.levels[..graph.depth()] {
            return Err(LabError::Refinement(format!(
                "graph levels {:?} are not a prefix of the parameter levels {:?}",
                graph.levels(),
                self.levels
            )));
        }
        Ok(())
    }
}

/// `E^{l,n}` on the vertices of `graph`.
pub fn assemble_form<T: Scalar>(graph: &GasketGraph, params: &ScaledFormParams<T>) -> Result<QuadraticForm<T>> {
    params.check_graph(graph)?;
    let weight = T::one() / params.big_r(graph.depth()).clone();
    Ok(sum_of_copies(graph, &weight))
}

/// Energy minimizer agreeing with `values` on `boundary`.
pub fn dirichlet_solve<T: Scalar>(form: &QuadraticForm<T>, boundary: &[usize], values: &[T]) -> Result<Vec<T>> {
    let n = form.dim();
    if boundary.is_empty() {
        return Err(LabError::Domain("Dirichlet problem with empty boundary".into()));
    }
    if boundary.len() != values.len() {
        return Err(LabError::DimensionMismatch {
            expected: boundary.len(),
            got: values.len(),
        });
    }
    let mut out = vec![T::zero(); n];
    let mut pinned = vec![false; n];
    for (&b, v) in boundary.iter().zip(values) {
        if b >= n {
            return Err(LabError::Domain(format!("boundary vertex {b} out of range")));
        }
        pinned[b] = true;
        out[b] = v.clone();
    }
    let free: Vec<bool> = pinned.iter().map(|p| !p).collect();
    for comp in form.components(&free) {
        let touches = comp
            .iter()
            .any(|&u| form.matrix.row(u).any(|(v, c)| pinned[v] && !c.is_zero()));
        if !touches {
            return Err(LabError::Structural(format!(
                "interior component of {} vertices has no boundary contact",
                comp.len()
            )));
        }
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !pinned[v]).collect();
    if interior.is_empty() {
        return Ok(out);
    }
    let a_ii = form.matrix.submatrix(&interior);
    let rhs: Vec<T> = interior
        .iter()
        .map(|&i| {
            form.matrix.row(i).fold(T::zero(), |acc, (j, a)| {
                if pinned[j] {
                    acc - a.clone() * out[j].clone()
                } else {
                    acc
                }
            })
        })
        .collect();
    let x = solve_spd(&a_ii, &rhs)?;
    for (&i, v) in interior.iter().zip(x) {
        out[i] = v;
    }
    Ok(out)
}

/// Largest `|(A h)_v|` over vertices not in `boundary`.
pub fn harmonic_residual<T: Scalar>(form: &QuadraticForm<T>, boundary: &[usize], h: &[T]) -> f64 {
    let mut pinned = vec![false; form.dim()];
    for &b in boundary {
        pinned[b] = true;
    }
    form.apply(h)
        .iter()
        .enumerate()
        .filter(|(v, _)| !pinned[*v])
        .map(|(_, r)| r.abs().as_f64())
        .fold(0.0, f64::max)
}

/// Harmonic extension weights of the level-1 network: row `v` holds the
/// coefficients of `h(v)` in terms of the corner values.
fn local_extension<T: Scalar>(dimension: usize, level: u32) -> Result<(GasketGraph, Vec<Vec<T>>)> {
    let (graph, form) = level_one_form::<T>(dimension, level)?;
    let corners = graph.boundary().to_vec();
    let mut weights = vec![vec![T::zero(); dimension + 1]; graph.vertex_count()];
    for j in 0..=dimension {
        let data: Vec<T> = (0..=dimension)
            .map(|k| if k == j { T::one() } else { T::zero() })
            .collect();
        let h = dirichlet_solve(&form, &corners, &data)?;
        for (v, value) in h.into_iter().enumerate() {
            weights[v][j] = value;
        }
    }
    Ok((graph, weights))
}

/// Extends `f` on `V_{n-1}` to the harmonic (energy-preserving) function on `V_n`.
pub fn harmonic_extend<T: Scalar>(prev: &GasketGraph, next: &GasketGraph, f: &[T]) -> Result<Vec<T>> {
    if next.depth() != prev.depth() + 1
        || next.dimension() != prev.dimension()
        || next.levels()[..prev.depth()] != *prev.levels()
    {
        return Err(LabError::Refinement(format!(
            "depth-{} graph with levels {:?} does not refine depth-{} graph with levels {:?}",
            next.depth(),
            next.levels(),
            prev.depth(),
            prev.levels()
        )));
    }
    if f.len() != prev.vertex_count() {
        return Err(LabError::DimensionMismatch {
            expected: prev.vertex_count(),
            got: f.len(),
        });
    }
    let dimension = prev.dimension();
    let level = *next.levels().last().expect("depth >= 1");
    let branching = next.branching()?;
    if next.cell_count() != prev.cell_count() * branching {
        return Err(LabError::Refinement("cell counts do not match the branching".into()));
    }
    let (local, weights) = local_extension::<T>(dimension, level)?;

    let mut out: Vec<Option<T>> = vec![None; next.vertex_count()];
    for (p, parent) in prev.cells().iter().enumerate() {
        let origin = prev.vertices()[parent.vertices[0]].refine(level);
        let corner_values: Vec<&T> = parent.vertices.iter().map(|&v| &f[v]).collect();
        for child in &next.cells()[p * branching..(p + 1) * branching] {
            for &v in &child.vertices {
                if out[v].is_some() {
                    continue;
                }
                let coords: Vec<u128> = next.vertices()[v]
                    .coords()
                    .iter()
                    .zip(origin.coords())
                    .map(|(&a, &o)| a.checked_sub(o))
                    .collect::<Option<_>>()
                    .ok_or_else(|| LabError::Refinement(format!("vertex {v} lies outside its parent cell")))?;
                let key = VertexKey::new(1, coords);
                let li = local
                    .vertex_index(&key)
                    .ok_or_else(|| LabError::Refinement(format!("vertex {v} lies outside its parent cell")))?;
                let value = weights[li]
                    .iter()
                    .zip(&corner_values)
                    .fold(T::zero(), |acc, (w, c)| acc + w.clone() * (*c).clone());
                out[v] = Some(value);
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(v, x)| x.ok_or_else(|| LabError::Refinement(format!("vertex {v} not covered by any cell"))))
        .collect()
}

/// Mass of cell `w` is `R_n^{-1} E^0(f on w)`.
pub fn cell_energy_measure<T: Scalar>(
    graph: &GasketGraph,
    params: &ScaledFormParams<T>,
    f: &[T],
) -> Result<CellMeasure<T>> {
    params.check_graph(graph)?;
    if f.len() != graph.vertex_count() {
        return Err(LabError::DimensionMismatch {
            expected: graph.vertex_count(),
            got: f.len(),
        });
    }
    let weight = T::one() / params.big_r(graph.depth()).clone();
    let masses = graph
        .cells()
        .iter()
        .map(|cell| {
            let mut e = T::zero();
            for (a, &u) in cell.vertices.iter().enumerate() {
                for &v in &cell.vertices[a + 1..] {
                    let d = f[u].clone() - f[v].clone();
                    e = e + d.clone() * d;
                }
            }
            e * weight.clone()
        })
        .collect();
    CellMeasure::new(graph.depth(), masses)
}

/// `Gamma(v) = 1/2 sum_u c(u, v) (f(u) - f(v))^2`.
pub fn vertex_energy_measure<T: Scalar>(form: &QuadraticForm<T>, f: &[T]) -> Result<VertexMeasure<T>> {
    if f.len() != form.dim() {
        return Err(LabError::DimensionMismatch {
            expected: form.dim(),
            got: f.len(),
        });
    }
    let half = T::ratio(1, 2);
    let masses = (0..form.dim())
        .map(|v| {
            let sum = form.matrix.row(v).fold(T::zero(), |acc, (u, a)| {
                if u == v {
                    acc
                } else {
                    let d = f[u].clone() - f[v].clone();
                    acc - a.clone() * d.clone() * d
                }
            });
            sum * half.clone()
        })
        .collect();
    VertexMeasure::new(masses)
}

/// `|sum_v g Gamma(f) - (E(f, fg) - E(f^2, g) / 2)|`.
pub fn leibniz_residual<T: Scalar>(form: &QuadraticForm<T>, f: &[T], g: &[T]) -> Result<f64> {
    let gamma = vertex_energy_measure(form, f)?;
    let lhs = gamma.integrate(g);
    let fg: Vec<T> = f.iter().zip(g).map(|(a, b)| a.clone() * b.clone()).collect();
    let f2: Vec<T> = f.iter().map(|a| a.clone() * a.clone()).collect();
    let rhs = form.bilinear(f, &fg) - form.bilinear(&f2, g) * T::ratio(1, 2);
    Ok((lhs - rhs).abs().as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    #[test]
    fn base_form_energies() {
        let e = base_form::<f64>(2).unwrap();
        assert_eq!(e.energy(&[1.0, 0.0, 0.0]), 2.0);
        assert_eq!(e.energy(&[3.0, 3.0, 3.0]), 0.0);
        let e3 = base_form::<f64>(3).unwrap();
        assert_eq!(e3.energy(&[1.0, 1.0, 0.0, 0.0]), 4.0);
        assert!(base_form::<f64>(1).is_err());
        assert!(e3.invariants().holds(0.0));
    }

    #[test]
    fn exact_resistance_scales() {
        assert_eq!(resistance_scale::<Q>(2, 2).unwrap(), q(3, 5));
        assert_eq!(resistance_scale::<Q>(2, 3).unwrap(), q(7, 15));
        assert_eq!(resistance_scale::<Q>(3, 2).unwrap(), q(2, 3));
        let r = resistance_scale::<f64>(2, 2).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn trace_identity_and_tower() {
        let (graph, form) = level_one_form::<Q>(2, 2).unwrap();
        let all: Vec<usize> = (0..graph.vertex_count()).collect();
        assert_eq!(trace_form(&form, &all).unwrap(), form);

        // trace onto V_0 directly vs. via an intermediate set
        let b = graph.boundary().to_vec();
        let mut mid = b.clone();
        mid.push((0..6).find(|v| !b.contains(v)).unwrap());
        let two_step = trace_form(&trace_form(&form, &mid).unwrap(), &[0, 1, 2]).unwrap();
        assert_eq!(two_step, trace_form(&form, &b).unwrap());
        assert_eq!(two_step, base_form::<Q>(2).unwrap().scaled(&q(3, 5)));
    }

    #[test]
    fn disconnected_interior_is_structural() {
        // vertex 2 is isolated
        let rows = vec![
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        let form = QuadraticForm::from_dense(&rows);
        assert!(matches!(trace_form(&form, &[0]), Err(LabError::Structural(_))));
        assert!(matches!(
            dirichlet_solve(&form, &[0], &[1.0]),
            Err(LabError::Structural(_))
        ));
    }

    #[test]
    fn depth_one_harmonic_exact() {
        let spec = GasketSpec::constant(2, 2, 1).unwrap();
        let g0 = build_graph(&spec, 0).unwrap();
        let g1 = build_graph(&spec, 1).unwrap();
        let params = ScaledFormParams::<Q>::new(&spec).unwrap();
        let form = assemble_form(&g1, &params).unwrap();
        let data = vec![q(1, 1), q(0, 1), q(0, 1)];
        let h = dirichlet_solve(&form, g1.boundary(), &data).unwrap();
        assert_eq!(form.energy(&h), q(2, 1));

        let mut mids: Vec<Q> = (0..6)
            .filter(|v| !g1.boundary().contains(v))
            .map(|v| h[v].clone())
            .collect();
        mids.sort();
        assert_eq!(mids, vec![q(1, 5), q(2, 5), q(2, 5)]);

        let ext = harmonic_extend(&g0, &g1, &data).unwrap();
        assert_eq!(ext, h);

        let cells = cell_energy_measure(&g1, &params, &h).unwrap();
        let mut masses = cells.masses().to_vec();
        masses.sort();
        assert_eq!(masses, vec![q(2, 5), q(2, 5), q(6, 5)]);
        assert_eq!(cells.total(), q(2, 1));
    }

    #[test]
    fn depth_zero_form_is_base() {
        let spec = GasketSpec::constant(3, 2, 1).unwrap();
        let g0 = build_graph(&spec, 0).unwrap();
        let params = ScaledFormParams::<Q>::new(&spec).unwrap();
        assert_eq!(assemble_form(&g0, &params).unwrap(), base_form::<Q>(3).unwrap());
    }

    #[test]
    fn energy_is_constant_along_extension() {
        let spec = GasketSpec::constant(2, 2, 6).unwrap();
        let params = ScaledFormParams::<f64>::new(&spec).unwrap();
        let mut prev = build_graph(&spec, 0).unwrap();
        let mut f = vec![1.0, 0.0, 0.0];
        for n in 1..=6 {
            let next = build_graph(&spec, n).unwrap();
            f = harmonic_extend(&prev, &next, &f).unwrap();
            let form = assemble_form(&next, &params).unwrap();
            assert!((form.energy(&f) - 2.0).abs() < 1e-9, "depth {n}");
            assert!(harmonic_residual(&form, next.boundary(), &f) < 1e-9);
            prev = next;
        }
    }

    #[test]
    fn linear_function_energy_grows() {
        // #S_l / (r_l l^2) > 1 for the coordinate sum
        for l in 2..=4u32 {
            let spec = GasketSpec::constant(2, l, 1).unwrap();
            let params = ScaledFormParams::<Q>::new(&spec).unwrap();
            let mut energies = Vec::new();
            for n in 0..=1 {
                let g = build_graph(&spec, n).unwrap();
                let den = g.denominator() as i64;
                let f: Vec<Q> = g
                    .vertices()
                    .iter()
                    .map(|k| q(k.coords().iter().sum::<u128>() as i64, den))
                    .collect();
                energies.push(assemble_form(&g, &params).unwrap().energy(&f));
            }
            let ratio = energies[1].clone() / energies[0].clone();
            let expected = Q::from_count(simplex_count(l, 2).unwrap())
                / (params.scale(l).unwrap().clone() * Q::from_int((l * l) as i64));
            assert_eq!(ratio, expected);
            assert!(ratio > Q::from_int(1));
        }
    }

    #[test]
    fn refinement_mismatch() {
        let spec = GasketSpec::constant(2, 2, 3).unwrap();
        let g1 = build_graph(&spec, 1).unwrap();
        let g3 = build_graph(&spec, 3).unwrap();
        assert!(matches!(
            harmonic_extend(&g1, &g3, &vec![0.0; g1.vertex_count()]),
            Err(LabError::Refinement(_))
        ));
        let other = ScaledFormParams::<f64>::new(&GasketSpec::constant(2, 3, 3).unwrap()).unwrap();
        assert!(assemble_form(&g3, &other).is_err());
    }

    #[test]
    fn leibniz_exact_small() {
        let spec = GasketSpec::constant(2, 2, 2).unwrap();
        let g = build_graph(&spec, 2).unwrap();
        let params = ScaledFormParams::<Q>::new(&spec).unwrap();
        let form = assemble_form(&g, &params).unwrap();
        let f: Vec<Q> = (0..g.vertex_count() as i64).map(|i| q(i * i - 3, 7)).collect();
        let g_: Vec<Q> = (0..g.vertex_count() as i64).map(|i| q(5 - 2 * i, 3)).collect();
        assert_eq!(leibniz_residual(&form, &f, &g_).unwrap(), 0.0);
        let gamma = vertex_energy_measure(&form, &f).unwrap();
        assert_eq!(gamma.total(), form.energy(&f));
    }
}
