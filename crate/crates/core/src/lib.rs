//! Security numerics for coherent-state quantum money with classical
//! verification.
//!
//! The crate builds the mint's signal states, the error and loss operators
//! of the cloning and forging attacks, and solves the resulting
//! semidefinite programs with its own interior-point solver.

pub mod linalg;
pub mod operators;
pub mod protocol_sim;
pub mod sdp;
pub mod security;
pub mod states;

pub use linalg::{ComplexMatrix, LinalgError, SubsystemDims};
pub use num_complex::Complex64;
pub use operators::{OperatorError, OperatorSet, Scenario};
pub use sdp::{SdpError, SdpOptions, SdpProblem, SdpSolution, SolveStatus};
pub use states::{StateError, StateFamily};
