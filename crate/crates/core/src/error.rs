use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    Physics(Vec<String>),
    #[error("caustic at t = {t}: |phi1(t)| = {value:.3e} is below 1e-8 of its running maximum")]
    Caustic { t: f64, value: f64 },
    #[error("x-equation combination is ill-conditioned at t = {t} (det = {det:.3e})")]
    Conditioning { t: f64, det: f64 },
    #[error("{what} did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    NonConvergence { what: String, achieved: f64, requested: f64 },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
