use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation synthesis failed: {0}")]
    CorrelationSynthesis(String),

    #[error("zero mean matrix cannot be normalized")]
    ZeroMean,

    #[error("correlation matrix not positive definite")]
    NotPositiveDefinite,

    #[error("channel matrix rank deficient")]
    RankDeficient,

    #[error("interfering-block correlation singular")]
    SingularInterferingCorrelation,

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("eigenvalues nearly coincide (gap {gap:e}); use f00_general")]
    NearCoincident { gap: f64 },

    #[error("small-eigenvalue regime: use series fallback")]
    SmallEigenvalue,

    #[error("inconsistent eigenvalue spectrum: {0}")]
    Spectrum(String),

    #[error("series did not converge within {terms} terms")]
    SeriesDivergence { terms: usize },

    #[error("m.g.f. pole: s * scale = {0} >= 1")]
    MgfPole(f64),

    #[error("m.g.f. domain: I - Theta * C is not positive definite")]
    MgfDomain,

    #[error("no closed form; use sim ({0})")]
    NoClosedForm(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
