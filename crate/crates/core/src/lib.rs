#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Simulation of continuous-variable teleportation of a trapped atom's
//! motional state.

pub mod bell;
pub mod channel;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod protocol;
pub mod snapshot;

pub use error::{Error, Result};
