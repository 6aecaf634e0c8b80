//! Numerical library for the tempered-fractional Keller-Segel (TFKS) system
//!
//! ```text
//! D_t^{alpha,lambda} u = D L u - chi (u c_x)_x + r u (1 - u/K0)
//! tau_c c_t            = D_c c_xx - kappa c + u
//! ```
//!
//! where `D_t^{alpha,lambda}` is the tempered Caputo derivative and `L` the
//! tempered fractional Laplacian. The crate provides:
//!
//! * [`frac_ops`] — discrete Caputo / tempered-Caputo derivatives (L1 scheme),
//!   the 1-D tempered fractional Laplacian, and the Mittag-Leffler function;
//! * [`model`] — parameter and trajectory containers, the gauge transformation
//!   `v = e^{lambda t} u`, `w = e^{lambda t} c` that removes tempering from the
//!   time derivative, and pointwise residual evaluators for both frames;
//! * [`pde_solver`] — time-marching solvers for the gauged system and (through
//!   the gauge, or directly by tempered-L1 marching) the original system;
//! * [`reductions`] — the similarity-reduced systems: translation-invariant
//!   ODEs, steady states, traveling waves, the degenerate linear regime with
//!   its closed-form solution, and the similarity-scaling reduction;
//! * [`lie`] — the finite-dimensional symmetry algebra: generator catalog,
//!   commutators, adjoint actions, optimal systems of one-dimensional
//!   subalgebras, and the determining-equation checker;
//! * [`symcheck`] — numerical symmetry verification: push a discrete
//!   trajectory through a one-parameter group flow and measure how well the
//!   transformed fields still satisfy the governing system.
//!
//! All operations are pure functions of their inputs; values are plain data
//! safe to share or move between threads.

pub mod error;
pub mod frac_ops;
pub mod lie;
pub mod model;
pub mod pde_solver;
pub mod reductions;
pub mod symcheck;

mod quad;

pub use error::{Error, Result};
