//! Finite-depth laboratory for Dirichlet forms on scale-irregular
//! Sierpinski gaskets.
//!
//! The numerical core is generic over [`Scalar`], so the same assembly and
//! elimination code runs in `f64` and in exact rationals. The aliases below
//! name the two instantiations used throughout.

pub mod approximation;
pub mod chainmetric;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod forms;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod scalar;
pub mod scaling;
pub mod stochastic;
pub mod suite;

pub use error::{LabError, Result};
pub use geometry::{build_graph, graph_distance, GasketGraph, GasketSpec, VertexKey, Word};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

pub type Form = forms::QuadraticForm<f64>;
pub type ExactForm = forms::QuadraticForm<Rational>;
pub type Params = forms::ScaledFormParams<f64>;
pub type ExactParams = forms::ScaledFormParams<Rational>;
