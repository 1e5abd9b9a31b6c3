//! Certified bounds on the Dobrushin interdependence matrix of discrete and
//! continuous-spin lattice models, and two-layer continuity certificates for
//! measures obtained by pushing a Gibbs measure through a local channel
//! (heat-kernel time evolution, fuzzy maps, decimation).
//!
//! The crate is organised in layers:
//!
//! - [`model`]: graphs, single-spin spaces, a priori measures, pair potentials.
//! - [`dobrushin`]: deviation functionals and single-layer bounds.
//! - [`two_layer`]: channels, posterior measures and the `Q` matrix.
//! - [`rotator`]: heat kernel on spheres and rotator-specific closed forms.
//! - [`simulate`]: Monte Carlo oracles (SDE, heat-bath, exact enumeration).
//! - [`modelfile`] and [`report`]: TOML input and JSON/CSV output.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dobrushin;
pub mod error;
pub mod model;
pub mod modelfile;
pub mod quadrature;
pub mod report;
pub mod rotator;
pub mod simulate;
pub mod tolerances;
pub mod two_layer;

pub use error::{Error, Result};
