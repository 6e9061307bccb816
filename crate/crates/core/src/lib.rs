// guards like `!(x > 0.0)` are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod mapprops;
pub mod polytf;
pub mod reldeg;
pub mod simkit;
pub mod sysid;

pub use error::{Error, Result};
