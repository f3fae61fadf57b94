//! Sparse stress-matrix design and multicluster simulation for affine
//! formation control.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod conic;
pub mod design;
pub mod formation;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod multicluster;
pub mod sim;
pub mod usi;

pub use error::{Error, Result};
