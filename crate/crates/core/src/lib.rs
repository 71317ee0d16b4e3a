//! Information thermodynamics of non-Hermitian quantum systems.
//!
//! The crate models a finite-dimensional system with Hamiltonian `H − iΓ`
//! weakly coupled to a thermal bath and tracks how the non-Hermitian part
//! creates free energy:
//!
//! - [`operators`]: Hermitian matrix functions, density matrices, the
//!   Fréchet derivative of the matrix logarithm and the `Δ` operator;
//! - [`dynamics`]: the normalized non-Hermitian generator with a Davies
//!   dissipator, adaptive integrators and steady-state solvers;
//! - [`thermo`]: thermal decomposition `σ = e^{−βH_T}/Z`, energy/heat/work
//!   ledgers, entropy production and information flow;
//! - [`engine`]: the four-stroke information engine and its closed form;
//! - [`hatano_nelson`]: the free-boson Hatano–Nelson chain and its
//!   condensation-onset scans;
//! - [`acceptance`]: the numerical acceptance criteria behind `nhthermo selftest`;
//! - [`cli`]: the `nhthermo` command-line tool.

pub mod acceptance;
pub mod cli;
pub mod csv;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod hatano_nelson;
pub mod numerics;
pub mod operators;
pub mod random;
pub mod thermo;
pub mod tridiag;
pub use error::{Error, Result};
