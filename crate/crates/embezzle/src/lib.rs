//! Sparse exact simulator and verification harness for catalytic
//! entanglement protocols.
//!
//! The crate has two computational modes. Exact mode works over ℚ(√2) with
//! arbitrary-precision rationals, drives the infinite-dimensional shift
//! protocol on sparse labeled states, and certifies its invariants with
//! zero tolerance. Float mode covers the finite-dimensional side: the
//! harmonic-catalyst permutation protocols, Schmidt/polar decompositions,
//! and base-d generalizations of the shift construction.

pub mod basis;
pub mod dense;
pub mod error;
pub mod games;
pub mod kernel;
pub mod par;
pub mod protocol;
pub mod scalar;
pub mod state;
pub mod vdh;

pub use basis::{CompositeLabel, Dyadic, ResourceLabel};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use protocol::{CheckConfig, Generators, LabelBounds, Protocol};
pub use scalar::{ExactScalar, FloatScalar, Rational, Scalar, EPS_F};
pub use state::SparseState;
