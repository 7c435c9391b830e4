use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("tension inversion failed: {0}")]
    Inversion(String),

    #[error("gibbs table miss: {what} = {value} outside [{lo}, {hi}]; rebuild with a wider range")]
    TableMiss {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("blow-up at site {site}, t = {t}")]
    BlowUp { site: usize, t: f64 },

    #[error("index {index} outside admissible window ({lo}, {hi})")]
    Range { index: usize, lo: f64, hi: f64 },

    #[error("time step rejected: {0}")]
    Stability(String),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
