use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the requested quantity.
    #[error("domain error in {target}: {detail} (got {value})")]
    Domain {
        target: &'static str,
        value: f64,
        detail: String,
    },

    /// Root search failed to settle. Carries the last iterate for post-mortem.
    #[error("{target}: no convergence after {iters} iterations (last iterate {last})")]
    Convergence {
        target: &'static str,
        iters: usize,
        last: f64,
    },

    /// Bad run configuration (grids, horizons, step sizes, flag combinations).
    #[error("config error: {0}")]
    Config(String),

    /// The literal exponential decomposition would overflow f64 range.
    #[error("overflow in literal form: b*sqrt(2*lambda) = {exponent:.3} exceeds {limit}")]
    Overflow { exponent: f64, limit: f64 },

    /// Monte Carlo noise swamps the estimate; the run is statistically useless.
    #[error("variance blowup at t = {t}: relative standard error {rel_se:.1}% exceeds {limit:.0}%")]
    Variance { rel_se: f64, limit: f64, t: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
