//! Nonlinear trace-preserving evolution of the reduced density matrix under a
//! non-Hermitian Hamiltonian plus an effective thermal (Davies) dissipator,
//! and the steady-state solver.

pub mod evolve;
pub mod generator;
pub mod steady;
pub mod system;

pub use evolve::{evolve, evolve_span, EvolveControls, Integrator, Protocol, Schedule, Trajectory};
pub use generator::{davies_dissipator, davies_rate, nh_generator, DaviesDissipator, Generator};
pub use steady::{generator_residual, steady_state, steady_state_from, SteadyStateOptions};
pub use system::{BathSpec, NonHermitianSystem, DEFAULT_KAPPA};
