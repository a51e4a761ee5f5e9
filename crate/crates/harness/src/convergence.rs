//! Per-iteration objective traces of the alternating loop across antenna
//! and user counts, at the fixed operating point SNR = 20 dB,
//! `sigma_e2 = 0.1`.

use rayon::prelude::*;

use rsma_core::channel::draw_csi;
use rsma_core::optimizer::{run, OptimizerConfig};

use crate::config::ExperimentConfig;
use crate::sweep::{trial_channel_seed, trial_optimizer_seed};
use crate::{snr_db_to_power, Result, SIGMA_N2};

/// Operating point for convergence traces.
pub const TRACE_SNR_DB: f64 = 20.0;
pub const TRACE_SIGMA_E2: f64 = 0.1;

/// One optimizer run's objective trajectory.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub nt: usize,
    pub k_users: usize,
    pub trial: usize,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Runs the proposed optimizer for each `(nt, k_users)` pair,
/// `cfg.converge_trials` trials per pair, and returns every objective
/// trajectory.
pub fn run_convergence_trace(
    cfg: &ExperimentConfig,
    nt_k_pairs: &[(usize, usize)],
) -> Result<Vec<ConvergenceTrace>> {
    let mut items = Vec::new();
    for &(nt, k) in nt_k_pairs {
        for trial in 0..cfg.converge_trials {
            items.push((nt, k, trial));
        }
    }
    let results: Vec<std::result::Result<ConvergenceTrace, rsma_core::Error>> = items
        .par_iter()
        .map(|&(nt, k, trial)| {
            let csi = draw_csi(
                nt,
                k,
                TRACE_SIGMA_E2,
                SIGMA_N2,
                trial_channel_seed(cfg.master_seed, trial),
            )?;
            let opt = OptimizerConfig {
                rng_seed: trial_optimizer_seed(cfg.master_seed, trial),
                ..cfg.optimizer.clone()
            };
            let res = run(&csi, snr_db_to_power(TRACE_SNR_DB), &opt)?;
            Ok(ConvergenceTrace {
                nt,
                k_users: k,
                trial,
                objective_trace: res.objective_trace,
                converged: res.converged,
            })
        })
        .collect();
    results
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Into::into)
}
