//! Numerical laboratory for the pseudo Calabi flow on one-dimensional model
//! Kähler geometries (flat or conformal tori and the S¹-reduced round sphere).

pub mod app;
pub mod checkpoint;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod kahler;
pub mod output;
pub mod parallel;
pub mod tridiag;

pub use error::{PcfError, Result};
pub use field::{GridShape, ScalarField};
pub use geometry::{build_sphere_geometry, build_torus_geometry, CosineMode, Geometry};
pub use kahler::MetricState;
