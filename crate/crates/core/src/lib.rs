// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod husimi;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod minimizer;
pub mod objective;
pub mod par;
pub mod selftest;
pub mod separability;

pub use error::{Error, Result};
