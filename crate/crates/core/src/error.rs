//! Error type shared by all modules.

use alloc::string::String;

/// Everything that can go wrong in the laboratory.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on the input data failed.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// The `M⁻` analysis needs `Ñ₋ > 2`, i.e. `λ < Λ` in the plane.
    #[error("degenerate operator: lambda = Lambda makes N_tilde_minus - 2 vanish")]
    DegenerateMinus,
    /// Event refinement was asked to bracket a root that is not there.
    #[error("no sign change over the bracket ({0}, {1})")]
    NoSignChange(f64, f64),
    /// The step controller collapsed below the minimum step size.
    #[error("step size collapsed at t = {0}")]
    StepCollapse(f64),
    /// A run ended without meeting any fate criterion.
    #[error("undetermined outcome: {0}")]
    Undetermined(String),
    /// A sweep did not show the single-threshold structure bisection needs.
    #[error("fate sweep is not monotone in p: {0}")]
    NonMonotoneSweep(String),
    /// The two periodic-orbit detectors kept disagreeing at the same p.
    #[error("periodic-orbit detectors disagree: {0}")]
    DetectorDisagreement(String),
    /// A computed profile violated a shape property it must satisfy.
    #[error("shape violation: {0}")]
    ShapeViolation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
