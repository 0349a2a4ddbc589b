//! Generalized resolvents and Yosida regularization of maximal-monotone
//! operators with a non-quadratic duality gauge, plus the machinery to
//! simulate the regularized stochastic evolution inclusions they generate
//! (multi-valued porous media, Φ-Laplace and subdifferential models) and to
//! measure finite-time-extinction statistics against their theoretical bounds.
//!
//! Layout mirrors the math:
//! - [`graphs`]: scalar maximal-monotone graphs and the exactly-solvable
//!   scalar resolvent/Yosida operators (bisection is the ground truth here);
//! - [`spaces`]: grids, discrete norms, and the two Gelfand triples;
//! - [`operators`]: field-level multi-valued operators, the gauged duality
//!   map, and the vector resolvent (damped Newton with graph smoothing);
//! - [`sde`]: Euler–Maruyama integration of the regularized inclusion under
//!   linear multiplicative noise, with reproducible per-trajectory seeding;
//! - [`extinction`]: extinction-time Monte Carlo and the quantitative
//!   supermartingale/energy checks behind the extinction bound;
//! - [`config`] and [`verify`] back the `yosida` command-line binary.

pub mod config;
pub mod error;
pub mod extinction;
pub mod graphs;
pub mod operators;
pub mod sde;
pub mod spaces;
pub mod verify;

pub use error::Error;
