//! Interior singular triplets of large sparse matrices by harmonic and refined
//! harmonic Jacobi-Davidson iterations with inexact inner solves.
//!
//! The outer loop lives in [`driver`]; [`extraction`] holds the projected small
//! problems, [`correction`] the MINRES inner solver and its stopping rule, and
//! [`diagnostics`] a dense, desk-scale checker for the accuracy theory behind the
//! inner tolerance.

pub mod correction;
pub mod dense;
pub mod diagnostics;
pub mod driver;
pub mod eig;
pub mod error;
pub mod extraction;
pub mod history;
pub mod mmio;
pub mod sparse;
pub mod study;
pub mod synthetic;
pub mod vecops;

pub use dense::DenseMatrix;
pub use error::{JdsvdError, Result};
pub use mmio::{load_matrix_market, read_matrix_market, write_matrix_market};
pub use sparse::{orthonormalize_against, Orthonormalized, SparseMatrix};
