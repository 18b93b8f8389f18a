//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical operators and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid or parameter specification violates a precondition.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An inequality or fit was requested outside its domain of validity.
    #[error("domain error: {0}")]
    DomainError(String),

    /// The vorticity lost strict positivity at the given node.
    #[error("monotonicity violated at node (i={i}, j={j}): omega = {value}")]
    MonotonicityViolated { i: usize, j: usize, value: f64 },

    /// A field failed the solution-class membership test.
    #[error("not in class: {0}")]
    NotInClass(String),

    /// The standard datum constructor ran out of amplitude halvings.
    #[error("cannot satisfy class membership after {retries} amplitude halvings")]
    CannotSatisfyClass { retries: usize },

    /// The advective CFL condition was violated.
    #[error("unstable step: dt = {dt} exceeds CFL limit {limit}")]
    UnstableStep { dt: f64, limit: f64 },

    /// A linear solve failed (singular or non-finite system).
    #[error("solver error: {0}")]
    SolverError(String),

    /// Picard iteration gaps grew for three consecutive iterates.
    #[error("picard iteration diverged at iterate {iterate}")]
    PicardDiverged { iterate: usize },

    /// The field is below the noise floor on the requested fit window.
    #[error("insufficient signal for decay fit: max |f| = {max_abs} on the window")]
    InsufficientSignal { max_abs: f64 },

    /// A lemma premise failed numerically; distinct from the conclusion being false.
    #[error("premise violated: {0}")]
    PremiseViolated(String),

    /// Ratio of norms is undefined because the denominator vanishes.
    #[error("undefined ratio: zero denominator")]
    UndefinedRatio,

    /// Not enough wall-adjacent nodes for the requested one-sided stencil.
    #[error("stencil error: {0}")]
    StencilError(String),

    /// A comparison run left the solution class mid-run; partial data attached.
    #[error("comparison aborted at t = {t}: {reason}")]
    ComparisonAborted {
        t: f64,
        reason: String,
        partial: Box<crate::verify::ComparisonRecord>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Binary container or CSV contents are malformed.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
