//! Operator-splitting schemes for gradient-flow PDEs, their exact reading as
//! feedforward networks, and two Potts-model segmentation solvers built on
//! them.
//!
//! - [`field`]: periodic scalar fields, convolution, Laplacian, PGM I/O.
//! - [`splitting`]: Lie and parallel splitting with resolvent activations.
//! - [`netequiv`]: export of a scheme as a layered network, and the check
//!   that both produce the same numbers.
//! - [`potts`]: double-well (Model I) and threshold-dynamics (Model II)
//!   segmentation with a Chan–Vese region force.
//! - [`cli`]: the `splitseg` command line.

pub mod cli;
pub mod error;
pub mod field;
pub mod netequiv;
pub mod potts;
pub mod splitting;

pub use error::{Error, Result};
