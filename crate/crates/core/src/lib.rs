// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod embedding;
pub mod error;
pub mod io;
pub mod nilpotent;
pub mod path;
pub mod quadrature;
pub mod seminorms;
pub mod stats;
pub mod variation;
pub mod volterra;
pub mod young;

pub use error::{Error, Result};
