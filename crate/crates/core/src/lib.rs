//! Conversion of segmented, feature-annotated boundary meshes into neural
//! halfspace representations: a max/min Boolean tree whose leaves are the
//! outputs of one shared MLP.
//!
//! The pipeline runs in this order:
//!
//! 1. [`brep`] loads and validates a labeled mesh, normalizes it and draws
//!    oriented surface samples.
//! 2. [`graph`] classifies feature curves by dihedral angle and builds the
//!    patch multigraph.
//! 3. [`tree`] grows the alternating Boolean tree, splitting patches with a
//!    min-cut when the construction is blocked, then groups patches onto
//!    shared network outputs.
//! 4. [`train`] fits a [`field::NeuralField`] to the samples.
//! 5. [`iso`] extracts sharp isosurfaces by dual contouring, [`metrics`]
//!    scores them and [`ops`] provides query, offset, Boolean and blending
//!    operations on the resulting fields.

pub mod brep;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod geom;
pub mod graph;
pub mod implicit;
pub mod iso;
pub mod metrics;
pub mod ops;
pub mod pipeline;
pub mod train;
pub mod tree;

pub use error::{Error, Result};
pub use geom::{Point3, Vector3};
