use thiserror::Error;

/// Errors shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The characteristic residual has the same sign at both dilution bounds.
    #[error("characteristic residual has no sign change on [{d_min}, {d_max}]")]
    NoRootInBracket { d_min: f64, d_max: f64 },

    /// A profile node is zero, negative, or non-finite.
    #[error(
        "profile not strictly positive at node {node} (value {value:e}{})",
        .step.map_or_else(String::new, |s| format!(", step {s}"))
    )]
    NonPositiveProfile {
        node: usize,
        value: f64,
        step: Option<usize>,
    },

    /// An initial profile violates the renewal compatibility identity.
    #[error("boundary value {boundary:e} incompatible with renewal integral {integral:e}")]
    IncompatibleBoundary { boundary: f64, integral: f64 },

    /// A quadrature cell endpoint is zero, negative, or non-finite.
    #[error("cell sample not strictly positive (value {value:e})")]
    NonPositiveSample { value: f64 },

    /// A feedback measurement is zero, negative, or non-finite.
    #[error("controller measurement not strictly positive (value {value:e})")]
    NonPositiveMeasurement { value: f64 },

    /// The kernel mass left of the split point is not below one.
    #[error("kernel split mass {mass} is not below 1")]
    SplitMassTooLarge { mass: f64 },

    /// The implicit endpoint weight makes the marching equation unsolvable.
    #[error("implicit endpoint weight {weight} >= 1 makes the marching step ill posed")]
    IllPosedStep { weight: f64 },

    /// A decay fit has too few usable samples.
    #[error("decay fit needs at least {needed} usable samples, found {found}")]
    DegenerateFit { needed: usize, found: usize },

    /// The dilution target sits on or outside the clamp interval.
    #[error("dilution target {d_star} leaves no margin inside [{d_min}, {d_max}]")]
    DegenerateMargin { d_star: f64, d_min: f64, d_max: f64 },

    /// A breakpoint, period, or horizon does not land on the age grid.
    #[error("{what} is not aligned with the grid step {h}")]
    GridMisaligned { what: String, h: f64 },

    /// Envelope bounds require total kernel mass at least one.
    #[error("kernel mass {mass} is below one; rescale before taking envelopes")]
    KernelMassBelowOne { mass: f64 },

    /// Model parameters violate a structural invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
