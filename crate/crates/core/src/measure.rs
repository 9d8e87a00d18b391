//! Nonnegative mass assignments on cells and on vertices.
//!
//! Cell masses are indexed like [`GasketGraph::cells`]. Vertex masses use the
//! equal-split convention: every cell hands `1/(N+1)` of its mass to each of
//! its corners.

use crate::error::{LabError, Result};
use crate::geometry::GasketGraph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure<T = f64> {
    depth: usize,
    masses: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexMeasure<T = f64> {
    masses: Vec<T>,
}

/// `m_l` at depth `n`: every cell carries `1 / M_n`.
pub fn uniform_cell_measure<T: Scalar>(graph: &GasketGraph) -> CellMeasure<T> {
    let mass = T::one() / T::from_count(graph.cell_count() as u128);
    CellMeasure {
        depth: graph.depth(),
        masses: vec![mass; graph.cell_count()],
    }
}

impl<T: Scalar> CellMeasure<T> {
    pub fn new(depth: usize, masses: Vec<T>) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| **m < T::zero()) {
            return Err(LabError::Domain(format!("negative cell mass {m:?}")));
        }
        Ok(Self { depth, masses })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> T {
        self.masses.iter().fold(T::zero(), |acc, m| acc + m.clone())
    }

    /// Rescaled to total mass one; the zero measure is returned unchanged.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total.is_zero() {
            return self.clone();
        }
        Self {
            depth: self.depth,
            masses: self.masses.iter().map(|m| m.clone() / total.clone()).collect(),
        }
    }

    /// Pushes the measure to depth `n - 1` by summing over children.
    pub fn coarsen(&self, graph: &GasketGraph) -> Result<Self> {
        self.check_graph(graph)?;
        if self.depth == 0 {
            return Err(LabError::Refinement("cannot coarsen a depth-0 measure".into()));
        }
        let branching = graph.branching()?;
        let masses = self
            .masses
            .chunks(branching)
            .map(|c| c.iter().fold(T::zero(), |acc, m| acc + m.clone()))
            .collect();
        Ok(Self {
            depth: self.depth - 1,
            masses,
        })
    }

    pub fn to_vertex_measure(&self, graph: &GasketGraph) -> Result<VertexMeasure<T>> {
        self.check_graph(graph)?;
        let share = T::from_int(graph.dimension() as i64 + 1);
        let mut masses = vec![T::zero(); graph.vertex_count()];
        for (cell, mass) in graph.cells().iter().zip(&self.masses) {
            let part = mass.clone() / share.clone();
            for &v in &cell.vertices {
                masses[v] = masses[v].clone() + part.clone();
            }
        }
        Ok(VertexMeasure { masses })
    }

    pub fn to_f64(&self) -> CellMeasure<f64> {
        CellMeasure {
            depth: self.depth,
            masses: self.masses.iter().map(Scalar::as_f64).collect(),
        }
    }

    fn check_graph(&self, graph: &GasketGraph) -> Result<()> {
        if graph.depth() != self.depth || graph.cell_count() != self.masses.len() {
            return Err(LabError::DimensionMismatch {
                expected: graph.cell_count(),
                got: self.masses.len(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> VertexMeasure<T> {
    pub fn new(masses: Vec<T>) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| **m < T::zero()) {
            return Err(LabError::Domain(format!("negative vertex mass {m:?}")));
        }
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> T {
        self.masses.iter().fold(T::zero(), |acc, m| acc + m.clone())
    }

    pub fn mass_of(&self, set: &[usize]) -> T {
        set.iter()
            .fold(T::zero(), |acc, &v| acc + self.masses[v].clone())
    }

    /// `sum_v g(v) mass(v)`.
    pub fn integrate(&self, g: &[T]) -> T {
        self.masses
            .iter()
            .zip(g)
            .fold(T::zero(), |acc, (m, x)| acc + m.clone() * x.clone())
    }

    pub fn to_f64(&self) -> VertexMeasure<f64> {
        VertexMeasure {
            masses: self.masses.iter().map(Scalar::as_f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_graph, GasketSpec};
    use num_rational::BigRational;

    #[test]
    fn uniform_masses() {
        let g = build_graph(&GasketSpec::constant(2, 2, 3).unwrap(), 3).unwrap();
        let m = uniform_cell_measure::<BigRational>(&g);
        assert!(m.masses().iter().all(|x| *x == BigRational::ratio(1, 27)));
        assert_eq!(m.total(), BigRational::from_int(1));

        let g0 = build_graph(&GasketSpec::constant(2, 2, 1).unwrap(), 0).unwrap();
        assert_eq!(uniform_cell_measure::<f64>(&g0).masses(), &[1.0]);

        let g23 = build_graph(&GasketSpec::new(2, vec![2, 3]).unwrap(), 2).unwrap();
        let m23 = uniform_cell_measure::<BigRational>(&g23);
        assert!(m23.masses().iter().all(|x| *x == BigRational::ratio(1, 18)));
    }

    #[test]
    fn coarsening_matches_uniform_parent() {
        let spec = GasketSpec::new(2, vec![3, 2, 4]).unwrap();
        for n in 1..=3 {
            let fine = build_graph(&spec, n).unwrap();
            let coarse = build_graph(&spec, n - 1).unwrap();
            let pushed = uniform_cell_measure::<BigRational>(&fine).coarsen(&fine).unwrap();
            assert_eq!(pushed, uniform_cell_measure::<BigRational>(&coarse));
        }
    }

    #[test]
    fn vertex_split_preserves_total() {
        let g = build_graph(&GasketSpec::new(3, vec![2, 2]).unwrap(), 2).unwrap();
        let m = uniform_cell_measure::<BigRational>(&g);
        let v = m.to_vertex_measure(&g).unwrap();
        assert_eq!(v.total(), BigRational::from_int(1));
        // corners belong to a single cell
        assert_eq!(v.masses()[g.boundary()[0]], BigRational::ratio(1, 16 * 4));
    }

    #[test]
    fn mismatched_graph_is_rejected() {
        let g = build_graph(&GasketSpec::constant(2, 2, 2).unwrap(), 2).unwrap();
        let g1 = build_graph(&GasketSpec::constant(2, 2, 2).unwrap(), 1).unwrap();
        let m = uniform_cell_measure::<f64>(&g1);
        assert!(m.to_vertex_measure(&g).is_err());
        assert!(CellMeasure::new(1, vec![1.0, -1.0]).is_err());
    }
}
