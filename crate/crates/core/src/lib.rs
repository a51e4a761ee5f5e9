//! Achievable-rate evaluation and sum-rate maximization for rate-splitting
//! multiple access (RSMA) in a multi-user MISO downlink where neither the
//! transmitter nor the receivers know the channel exactly.
//!
//! Rates are generalized-mutual-information (GMI) expressions in which the
//! channel-estimation error shows up as extra interference, so every rate is
//! a ratio of Hermitian quadratic forms in the stacked precoder
//! `p = [p_1; ...; p_K; p_c]`. The sum-rate maximizer lifts `p p^H` to a PSD
//! matrix (semidefinite relaxation), linearizes the concave constraint sides
//! (concave-convex procedure), alternates convex subproblem solves with
//! anchor updates, then recovers a rank-one precoder by Gaussian
//! randomization.
//!
//! Module map:
//! - [`channel`]: channel estimates, error statistics, reproducible draws
//! - [`rates`]: GMI rate formulas and the stacked quadratic-form matrices
//! - [`conic`]: one convex subproblem instance and its solver backend
//! - [`optimizer`]: the alternating SDR+CCCP loop with rank-one recovery
//! - [`baselines`]: NOMA/SDMA/OMA reductions and fixed ZF/MRT precoders
//!
//! ```
//! use rsma_core::channel::draw_csi;
//! use rsma_core::optimizer::{run, OptimizerConfig};
//!
//! let csi = draw_csi(2, 2, 0.05, 1.0, 7).unwrap();
//! let p_t = 10f64.powf(20.0 / 10.0); // 20 dB SNR with unit noise
//! let cfg = OptimizerConfig::default();
//! let result = run(&csi, p_t, &cfg).unwrap();
//! assert!(result.rates.r_sum > 0.0);
//! ```

pub mod baselines;
pub mod channel;
pub mod conic;
pub mod optimizer;
pub mod rates;

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Inputs that must agree in shape did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A channel matrix did not have the rank an operation requires.
    #[error("rank-deficient channel matrix: {0}")]
    RankDeficient(String),
    /// The conic backend failed and no usable iterate exists.
    #[error("conic solver failure: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
