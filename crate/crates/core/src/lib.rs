//! Field-theoretical coherent states over classical nonlinear Schrödinger solitons.
//!
//! The 1D Bose gas with contact interaction is regularized on a periodic lattice and
//! truncated per site in Fock space. A classical field `f` is lifted to the coherent
//! state `e^{Â}|0⟩`, evolved once with the quantum Hamiltonian and once classically,
//! and the two are compared through the overlap `r(t)`.

pub mod classical;
pub mod correspondence;
pub mod error;
pub mod grid;
pub mod harness;
pub mod lattice;
pub mod propagate;
mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
