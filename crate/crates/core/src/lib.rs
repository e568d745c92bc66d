//! Permutation swapping for categorical microdata.
//!
//! The crate is organised around the records-and-tables vocabulary in
//! [`data`]. [`psa`] implements the randomized swapping mechanism itself,
//! [`budget`] the closed-form privacy-loss arithmetic that goes with it,
//! [`verify`] an exact brute-force oracle for tiny instances, and
//! [`utility`] the error metrics used to judge swapped output.

pub mod budget;
pub mod data;
mod epsilon;
mod error;
pub mod psa;
pub mod rational;
pub mod synth;
pub mod utility;
pub mod verify;

pub use epsilon::Epsilon;
pub use error::{Error, Result};
