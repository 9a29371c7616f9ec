use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("time {t} lies outside the sampled span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("invalid time span: need s <= t, got s = {s}, t = {t}")]
    InvalidSpan { s: f64, t: f64 },

    #[error("step size underflow at t = {t} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("matrix exponential out of range (scaled norm {norm:e})")]
    Range { norm: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("matrix is not left-invertible: smallest pivot {pivot:e} below tolerance {tol:e}")]
    RankDeficient { pivot: f64, tol: f64 },

    #[error("contour node z = {z} meets the spectrum: zI - T is not left-invertible")]
    SingularNode { z: Complex64 },

    #[error("system is not periodic with period {0}")]
    NotPeriodic(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("problem size {size} exceeds the dense limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("projection rank jumps along the grid (ranks {first} and {other})")]
    RankJump { first: usize, other: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
