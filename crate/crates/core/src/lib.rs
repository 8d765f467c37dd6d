//! Lower bounds on multipartite entanglement of lattice bosons from
//! time-of-flight images.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandstructure;
pub mod bound;
pub mod error;
pub mod fock;
pub mod hubbard;
pub mod imaging;
pub mod numerics;
pub mod states;
pub mod tof;
pub mod units;

pub use error::{Error, Result};
