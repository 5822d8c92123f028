//! Numerical laboratory for planar sigma-harmonic mappings.
//!
//! The crate solves `div(sigma grad u) = 0` with P1 finite elements and the
//! non-divergence equation `tr(sigma D^2 u) + b . grad u = 0` with finite
//! differences, then analyses the resulting maps: stream functions, Beltrami
//! dilatations, Jacobian fields, injectivity and the non-vanishing of
//! `det DU` for homeomorphic sigma-harmonic maps.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coefficients;
pub mod descriptor;
pub mod error;
pub mod fd;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod oracles;
pub mod sparse;
pub mod svg;

pub use analysis::{ComplexDerivativeField, LewyReport, UnimodalityVerdict};
pub use coefficients::{
    CoefficientField, DilatationPair, EllipticityReport, Matrix2, VectorField2,
};
pub use error::{Error, ErrorCategory, Result};
pub use fd::{GridDomain, GridField};
pub use fem::{MappingField, ScalarField, TriangleGradientField};
pub use mesh::{Mesh, Point2};
pub use oracles::AnalyticSolution;
