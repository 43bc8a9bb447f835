//! Time-fractional gradient flows `∂t[k∗(u−u₀)] + ∂φᵗ(u) ∋ f` for
//! time-dependent convex energies.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: completely positive kernel pairs, convolution weights,
//!   resolvent kernels and the Mittag-Leffler reference function.
//! - [`volterra`]: linear Volterra equations of the second kind and Gronwall
//!   majorants.
//! - [`convex`]: the energy interface (evaluation, prox, Moreau envelope,
//!   shift maps) and a few closed-form test energies.
//! - [`stepper`]: the implicit convolution-quadrature solver.
//! - [`plaplace`]: p-Laplace subdiffusion on a moving 1-D domain.
//! - [`verify`]: numeric certificates for chain rules and energy bounds.
//! - [`cli`]: configuration, experiment orchestration and output files.

pub mod cli;
pub mod convex;
mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod plaplace;
pub mod special;
pub mod stepper;
pub mod verify;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::TimeGrid;
