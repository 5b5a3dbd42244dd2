//! Numerical laboratory for desingularized point vortices in two-dimensional
//! incompressible Euler flow.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`], [`lattice`], [`poisson`], [`radial`], [`polar`] hold the
//!   shared numerics (planar vectors, lattices, a sparse five-point Dirichlet
//!   solver, graded radial quadrature and polar Fourier fields).
//! * [`domain_green`] evaluates Green, Robin and Kirchhoff–Routh functions.
//! * [`nvortex`] integrates the point-vortex system.
//! * [`liouville`] holds the Liouville bubble, the regularized ansatz and the
//!   quadratic-form machinery.
//! * [`modesolver`] inverts the linearized Liouville operator mode by mode.
//! * [`transport`] solves the inner and outer transport problems by
//!   characteristics.
//! * [`euler2d`] is a reference vorticity–stream Euler solver.
//!
//! Data-parallel loops go through [`par`], which falls back to plain
//! iterators when the `parallel` feature is disabled.

pub mod domain_green;
pub mod error;
pub mod euler2d;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod liouville;
pub mod modesolver;
pub mod nvortex;
pub mod par;
pub mod poisson;
pub mod polar;
pub mod radial;
pub mod transport;

pub use domain_green::{DomainModel, VortexConfiguration};
pub use error::{Error, Result};
pub use geometry::{Shape, Vec2};
pub use lattice::{Lattice, ScalarField2D};
