//! Zero dynamics of boundary-controlled port-Hamiltonian transport networks.
//!
//! The crate works with networks of scalar transport equations whose wave
//! speeds have rational ratios. Such a network can be rewritten with one
//! common speed, after which its dynamics over one traversal time reduce to
//! a finite-dimensional discrete-time quadruple. On top of that the crate
//! computes well-posedness, stability, transmission zeros, the largest
//! output-nulling subspace and the zero-dynamics boundary system, and
//! ships an exact characteristics simulator to certify the results.

pub mod analysis;
pub mod canonicalize;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod zerodyn;

pub use error::{Error, ErrorClass, Result};
