use thiserror::Error;

/// Errors produced by the lattice, semiclassical and continuum solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("site {site} lies outside the linear window [-{window}, {window}]")]
    WindowOverflow { site: i64, window: i64 },

    #[error("positivity violated at site {site}: mu - f*xi(n) = {deficit:e} <= 0")]
    Positivity { site: i64, deficit: f64 },

    #[error("energy mu = {mu:e} is zero; T_n scaling is singular")]
    SingularScaling { mu: f64 },

    #[error("Jacobian condition estimate {condition:e} exceeds cap: bifurcation-adjacent, refine nu/f")]
    IllConditioned { condition: f64 },

    #[error("singular tridiagonal pivot at row {row}")]
    SingularPivot { row: usize },

    #[error("Newton did not converge in {iterations} iterations (final residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("continuation aborted; last converged beta = {last_beta:e}")]
    ContinuationFailed { last_beta: f64 },

    #[error("nu/f = {ratio} is a bifurcation point (integer ratio); refine nu/f")]
    BifurcationPoint { ratio: f64 },

    #[error("insufficient resolution: eigenvalue drift {drift:e} under grid doubling")]
    Resolution { drift: f64 },

    #[error("projector rank deficiency: {available} band states for {requested} translates")]
    RankDeficient { available: usize, requested: usize },

    #[error("fixed-point map is not a contraction (measured factor {factor})")]
    NonContraction { factor: f64 },

    #[error("resolvent solve broke down: {0}")]
    Resolvent(String),

    #[error("solution support reaches the taper region (tail mass {tail:e})")]
    SupportTouchesTaper { tail: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
