//! Lattice regularization of the quantum NLS field theory on a truncated Fock space.

pub mod basis;
pub mod model;
pub mod operators;
pub mod sparse;
pub mod state;

pub use basis::Basis;
pub use model::{HoppingMatrix, LatticeModel, LatticeParams, DEFAULT_BASIS_BUDGET, NONLINEAR_FACTOR};
pub use operators::{displacement_generator, hamiltonian, ladder, number, total_number};
pub use sparse::{SparseOperator, Symmetry};
pub use state::{
    coherent_state, coherent_state_from_amplitudes, discarded_probability, eigen_residual,
    eigen_residual_amplitudes, field_expectation, poisson_tail, FockState, TruncationPolicy,
};
