use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The grid does not resolve a profile or a convolution to the required
    /// quadrature tolerance.
    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("order {order} exceeds truncation order {max_order}")]
    OrderOverflow { order: usize, max_order: usize },

    /// Rejection sampling would need more than ~10⁶ trials per accepted draw.
    #[error("pathological rejection acceptance {acceptance:.3e} (jump from {from:?}, influencing particle at {source_point:?})")]
    PathologicalAcceptance {
        acceptance: f64,
        from: [f64; 2],
        source_point: [f64; 2],
    },

    #[error("blow-up at t = {time}: |k| = {value:e} exceeds 1e12")]
    BlowUp { time: f64, value: f64 },

    #[error("Picard iteration diverging: successive differences grew for 3 consecutive iterates (last {last:e})")]
    Divergence { last: f64 },

    #[error("time {t} is outside the admissible interval [0, {horizon})")]
    Horizon { t: f64, horizon: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
