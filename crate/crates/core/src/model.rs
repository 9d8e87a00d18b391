//! A gasket at one depth together with its form, measures and scale function.

use crate::chainmetric::FiniteMetricSpace;
use crate::error::{LabError, Result};
use crate::forms::{assemble_form, dirichlet_solve, harmonic_extend, QuadraticForm, ScaledFormParams};
use crate::geometry::{build_graph, GasketGraph, GasketSpec};
use crate::measure::{uniform_cell_measure, CellMeasure, VertexMeasure};
use crate::scaling::ScalingProfile;

#[derive(Debug, Clone)]
pub struct GasketModel {
    pub spec: GasketSpec,
    pub graph: GasketGraph,
    pub params: ScaledFormParams<f64>,
    pub form: QuadraticForm<f64>,
    pub profile: ScalingProfile,
    pub cell_mass: CellMeasure<f64>,
    pub vertex_mass: VertexMeasure<f64>,
}

impl GasketModel {
    pub fn build(spec: &GasketSpec, depth: usize) -> Result<Self> {
        let graph = build_graph(spec, depth)?;
        let params = ScaledFormParams::new(spec)?;
        let form = assemble_form(&graph, &params)?;
        let profile = ScalingProfile::new(spec)?;
        let cell_mass = uniform_cell_measure(&graph);
        let vertex_mass = cell_mass.to_vertex_measure(&graph)?;
        Ok(Self {
            spec: spec.clone(),
            graph,
            params,
            form,
            profile,
            cell_mass,
            vertex_mass,
        })
    }

    /// SG-type gasket with a constant level.
    pub fn constant(dimension: usize, level: u32, depth: usize) -> Result<Self> {
        Self::build(&GasketSpec::constant(dimension, level, depth)?, depth)
    }

    pub fn depth(&self) -> usize {
        self.graph.depth()
    }

    /// `T_n` at the model depth.
    pub fn time_scale(&self) -> f64 {
        self.params.time_scale(self.depth())
    }

    /// The graph metric with the equal-split vertex measure.
    pub fn space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::from_graph(&self.graph, &self.vertex_mass)
    }

    /// Harmonic function with the given corner values.
    pub fn harmonic(&self, corners: &[f64]) -> Result<Vec<f64>> {
        if corners.len() != self.graph.dimension() + 1 {
            return Err(LabError::DimensionMismatch {
                expected: self.graph.dimension() + 1,
                got: corners.len(),
            });
        }
        dirichlet_solve(&self.form, self.graph.boundary(), corners)
    }

    /// Vertex with the given integer coordinates at the model depth.
    pub fn vertex_at(&self, coords: &[u128]) -> Option<usize> {
        self.graph
            .vertex_index(&crate::geometry::VertexKey::new(self.depth(), coords.to_vec()))
    }

    /// `a -> a_j / L_n`, the `j`-th barycentric coordinate.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        let den = self.graph.denominator() as f64;
        self.graph
            .vertices()
            .iter()
            .map(|k| k.coords()[j] as f64 / den)
            .collect()
    }
}

/// Harmonic extension of corner data through depths `0..=depth`, one
/// vector per depth along with its graph.
pub fn harmonic_tower(spec: &GasketSpec, depth: usize, corners: &[f64]) -> Result<Vec<(GasketGraph, Vec<f64>)>> {
    let mut prev = build_graph(spec, 0)?;
    if corners.len() != prev.vertex_count() {
        return Err(LabError::DimensionMismatch {
            expected: prev.vertex_count(),
            got: corners.len(),
        });
    }
    let mut f = corners.to_vec();
    let mut out = Vec::with_capacity(depth + 1);
    for n in 1..=depth {
        let next = build_graph(spec, n)?;
        let g = harmonic_extend(&prev, &next, &f)?;
        out.push((prev, f));
        prev = next;
        f = g;
    }
    out.push((prev, f));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tower_matches_direct_solve() {
        let spec = GasketSpec::constant(2, 2, 4).unwrap();
        let tower = harmonic_tower(&spec, 4, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(tower.len(), 5);
        let model = GasketModel::build(&spec, 4).unwrap();
        let direct = model.harmonic(&[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in tower[4].1.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((model.time_scale() - 625.0).abs() < 1e-9);
    }
}
