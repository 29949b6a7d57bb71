use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sampled amplitude is identically zero")]
    ZeroNorm,

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("quadrature half-width {half_width} too small, need at least {required} for s = {s}")]
    QuadratureDomainTooSmall {
        half_width: f64,
        required: f64,
        s: f64,
    },

    #[error("epsilon{sign}^2 = {value} below tolerance -1e-6*dk2 (dk2 = {dk2}); inconsistent PSF or quadrature failure")]
    EpsilonNegative { sign: char, value: f64, dk2: f64 },

    #[error("attenuation eta = {0} outside (0, 1/2]")]
    EtaOutOfRange(f64),

    #[error("beam-splitter angle derivative undefined at eta_pm in {{0, 1}} (eta_pm = {0})")]
    DegenerateAngle(f64),

    #[error("photon cutoff would exceed {limit} (requested {requested})")]
    CutoffOverflow { requested: usize, limit: usize },

    #[error("bare number-basis distribution unavailable for this source (natively {native})")]
    UnsupportedBasis { native: &'static str },

    #[error("degenerate image distribution: {0}")]
    DegenerateDistribution(&'static str),

    #[error("source family {0} is not number-diagonal at the image; use its dedicated path")]
    UnsupportedState(&'static str),

    #[error("unphysical source state: {0}")]
    UnphysicalState(String),

    #[error("truncation budget `{budget}` exceeded: {value} > {limit}")]
    TruncationBudgetExceeded {
        budget: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("oracle supports Gaussian point-spread functions only")]
    UnsupportedPsf,

    #[error("finite-difference QFI ill-conditioned: estimates {a} and {b} differ by more than {tol} relative")]
    IllConditioned { a: f64, b: f64, tol: f64 },

    #[error("likelihood varies by less than 1e-12 across the search grid")]
    FlatLikelihood,

    #[error("zero Fisher information: Cramer-Rao error is unbounded")]
    ZeroInformation,
}

pub type Result<T> = std::result::Result<T, Error>;
