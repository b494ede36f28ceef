use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested level belongs to a degenerate cluster; the exact
    /// perturbative derivative is not defined level-by-level there.
    #[error("degenerate level cluster at indices {indices:?}")]
    DegenerateLevel { indices: Vec<usize> },

    /// The number of solved bound states disagrees with the counting
    /// formula. This is an internal-consistency failure, never repaired
    /// silently.
    #[error("bound-state count mismatch: solver found {solved}, counting formula gives {formula}")]
    CountMismatch { solved: usize, formula: usize },

    /// Both the requested theta and its +/- perturbations produced an
    /// ill-conditioned linear system; the caller should refine the grid.
    #[error("S-matrix singular near theta = {theta}: condition estimate {cond:.3e}")]
    SingularTheta { theta: f64, cond: f64 },

    /// theta = 0 or pi: no propagating tooth states exist; the formal
    /// S-matrix value there is -1 and is exposed as a constant.
    #[error("theta = {0} is an endpoint; the S-matrix is the formal constant -1 there")]
    ThetaEndpoint(f64),

    /// A post-hoc invariant check on a computed object failed.
    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),
}
