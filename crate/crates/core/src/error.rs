use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(
        "frequency {omega:.6} rad/fs ({wavelength_nm:.1} nm) is outside the refractive model range [{lo_nm}, {hi_nm}] nm"
    )]
    ModelRange {
        omega: f64,
        wavelength_nm: f64,
        lo_nm: f64,
        hi_nm: f64,
    },

    #[error("retrieval produced non-finite values at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("phase fit is rank deficient (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("monte carlo aborted: {failed} of {trials} trials failed")]
    MonteCarlo { failed: usize, trials: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
