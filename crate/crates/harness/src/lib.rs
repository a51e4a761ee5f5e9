//! Monte Carlo experiment runner for the RSMA simulator: SNR and error
//! variance sweeps across schemes with paired channel draws, convergence
//! traces, and a CLI that emits machine-readable CSV/JSONL.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod output;
pub mod sweep;

/// Errors surfaced by the harness. Exit-code mapping: config errors are 2,
/// solver hard failures are 3, anything else nonzero is 1.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] rsma_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// SNR convention: the noise variance is fixed at 1, so the total transmit
/// power is the linear SNR, `p_t = 10^(snr_db / 10)`.
pub fn snr_db_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Noise variance used throughout the experiments.
pub const SIGMA_N2: f64 = 1.0;
