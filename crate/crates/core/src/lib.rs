//! Logarithmic-depth learning of matrix product states.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//!
//! * [`linalg`]: dense complex matrices, a Jacobi Hermitian eigensolver,
//!   one-sided Jacobi SVD, partial traces and basis completion.
//! * [`mps`]: matrix product states, expansion, Schmidt ranks and block
//!   reduced density matrices.
//! * [`backend`]: the pure or mixed register the learner shrinks layer by layer.
//! * [`tomography`]: simulated block tomography (exact, bounded trace-norm
//!   noise, finite-sample linear inversion) and copy budgets.
//! * [`disentangler`]: rank-capped and threshold disentangling unitaries.
//! * [`plan`]: the binary-tree block schedule.
//! * [`lambert`]: Lambert W and the self-consistent block-size equation.
//! * [`learner`]: the layered learning loop, reconstruction and audit helpers.
//! * [`complexity`]: closed-form sample-complexity evaluators.
//!
//! File formats, configuration and the command line live in the `treemps`
//! companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backend;
pub mod complexity;
pub mod disentangler;
mod error;
pub mod lambert;
pub mod learner;
pub mod linalg;
pub mod mps;
pub mod plan;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, ToleranceConfig, C64};
