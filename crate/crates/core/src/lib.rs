//! Wigner distributions and Wigner phase-space flow for 1D bound eigenstates.
//!
//! The crate evaluates `W(x, p)` and its derivatives by quadrature, builds the
//! Wigner current `J` from its Taylor series in `ħ`, and analyses the flow:
//! velocity field `w = J/W` and its divergence, stagnation points with their
//! Poincaré–Hopf indices, fieldlines of `J`, and zero contours.

pub mod current;
pub mod eigenstates;
pub mod error;
pub mod grid;
pub mod lee_scully;
pub mod potential;
pub mod quadrature;
pub mod special;
pub mod topology;
pub mod validation;
pub mod wigner;

pub use error::{Error, Result};
