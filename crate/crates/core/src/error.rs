use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric blowup at t = {time:.6} s in {term}")]
    NumericBlowup { time: f64, term: String },

    #[error("cos(pitch) = {cos:.5} below singularity floor {floor} (pitch = {pitch:.5} rad)")]
    Singularity { pitch: f64, cos: f64, floor: f64 },

    #[error("disturbance table queried at t = {t} outside [{start}, {end}]")]
    Extrapolation { t: f64, start: f64, end: f64 },

    #[error("gain feasibility fails: lhs = {lhs}, rhs = {rhs}")]
    Infeasible { lhs: f64, rhs: f64 },

    #[error("no root in (0, 1): residual {f_lo:e} at 0, {f_hi:e} at 1")]
    NoRoot { f_lo: f64, f_hi: f64 },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record format: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
