use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("potential vanishes at phi = {phi} (|V| = {value:e}); u(phi) is undefined")]
    ZeroPotential { phi: f64, value: f64 },

    #[error("negative energy density eps = {eps:e} at phi = {phi}")]
    NegativeEnergy { eps: f64, phi: f64 },

    #[error("{quantity} is undefined at zero field velocity")]
    ZeroVelocity { quantity: &'static str },

    #[error("step size underflow at t = {t} (phi = {phi}, eps = {eps:e}, h = {h:e})")]
    StepSizeUnderflow { t: f64, phi: f64, eps: f64, h: f64 },

    #[error("no sign change of the event function on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root refinement did not converge within {iterations} iterations")]
    RootNotConverged { iterations: usize },

    #[error("tail behaviour not settled within the scan range: {advice}")]
    Inconclusive { advice: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown potential preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid preset parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: String, value: f64, reason: String },

    #[error(
        "fixed-point iteration did not contract within {iterations} iterations (last ratio {ratio:.3}); shrink alpha"
    )]
    NotContracting { iterations: usize, ratio: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("separatrix bracket not found for velocities in [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("penalized solutions do not converge across levels: {0}")]
    LevelsNotConverging(String),

    #[error("y escaped to infinity at phi = {phi} (eps reached zero)")]
    Escape { phi: f64 },
}
