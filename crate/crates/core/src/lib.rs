//! Numerical laboratory for the initial-value problem of the homogeneous
//! real Monge-Ampere equation with toric (convex) data.
//!
//! The crate works in the Legendre-dual picture: Cauchy data is a pair of
//! symplectic potentials `(u0, udot0)` on a moment polytope `P`, and the
//! candidate solution is the Legendre-transform ray
//! `psi_L(s, x) = (u0 + s*udot0)*(x)`. Around that core the crate provides
//!
//! * [`convex`] - discrete Legendre-Fenchel transforms, envelopes,
//!   finite-difference calculus and gradient inversion on uniform grids;
//! * [`cauchy`] - Cauchy data, the preset library, and the convex lifespan
//!   (the last time `u0 + s*udot0` stays convex);
//! * [`ray`] - the Legendre ray, slice admissibility, and the lift of the
//!   ray to a relative potential;
//! * [`moser`] - the complexified Hamiltonian flow: Moser maps, Jacobians,
//!   inverses, leaves, and the conservation-law check;
//! * [`hj`] - the Hamilton-Jacobi reduction: characteristics, caustics,
//!   the Hopf-Lax pointwise oracle, and residual verification;
//! * [`alexandrov`] - Monge-Ampere measures of spacetime-convex functions
//!   via subdifferential (gradient-hull) volumes, weak-solution checks;
//! * [`strip`] - harmonic analysis on strips: Poisson kernel, boundary
//!   extension, Fourier multipliers, Hilbert transform, Paley-Wiener decay
//!   tests, and the leafwise obstruction data of toric rays.

pub mod alexandrov;
pub mod cauchy;
pub mod convex;
pub mod error;
pub mod grid;
pub mod hj;
pub mod moser;
pub mod polytope;
pub mod ray;
pub mod strip;

pub use error::{Error, Result};
pub use grid::{Axis, GridFn, Tolerances};
pub use polytope::Polytope;
