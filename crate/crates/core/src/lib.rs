//! Numerical laboratory for time-like cones, doubled warped products and
//! their holonomy algebras.

pub mod charts;
pub mod cohomology;
pub mod cone_constructions;
pub mod error;
pub mod expr;
pub mod holonomy;
pub mod jet;
pub mod lie_matrix;
pub mod linalg;
pub mod null_plane;
pub mod pseudo_linear;

pub use error::{Error, Result};
