//! Evolution families, their evolution semigroups, and exponential dichotomy.

pub mod dichotomy;
pub mod error;
pub mod gallery;
pub mod io;
pub mod linalg;
pub mod matching;
pub mod propagator;
pub mod semigroup;
pub mod serde_util;
pub mod spectrum;
pub mod suite;

pub use error::{Error, Result};
