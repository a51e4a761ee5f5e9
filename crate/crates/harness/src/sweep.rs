//! SNR / error-variance sweeps with paired channel draws.
//!
//! One channel draw per trial index is shared by every scheme and SNR point
//! (the estimate scales with `sqrt(1 - sigma_e2)` from the same unit
//! normals), so scheme comparisons are paired. Trials run on a worker pool;
//! results are collected by work-item index, so the output is byte-stable
//! regardless of worker count or scheduling.

use rayon::prelude::*;

use rsma_core::baselines::{evaluate_scheme, SchemeKind};
use rsma_core::channel::{derive_seed, draw_csi};
use rsma_core::optimizer::OptimizerConfig;

use crate::config::ExperimentConfig;
use crate::{snr_db_to_power, Result, SIGMA_N2};

/// Seed stream tag separating optimizer randomness from channel draws.
const OPT_SEED_TAG: u64 = 0x4F50_5449;

/// Aggregated outcome of one (scheme, SNR, sigma_e2) cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub no_info: bool,
    pub snr_db: f64,
    pub sigma_e2: f64,
    /// Mean sum-rate over surviving trials (NaN if every trial failed).
    pub mean_sum_rate: f64,
    /// Standard error of the mean over surviving trials.
    pub stderr: f64,
    /// Mean iteration count over surviving trials.
    pub mean_iters: f64,
    /// Trials that errored or failed to converge; excluded from the means.
    pub failures: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Channel seed for one trial index; shared across schemes and SNR points.
pub fn trial_channel_seed(master_seed: u64, trial: usize) -> u64 {
    derive_seed(master_seed, trial as u64)
}

/// Optimizer seed for one trial index; shared across schemes so the
/// randomization is paired too.
pub fn trial_optimizer_seed(master_seed: u64, trial: usize) -> u64 {
    derive_seed(derive_seed(master_seed, OPT_SEED_TAG), trial as u64)
}

/// One surviving trial: (sum-rate, iterations).
type TrialOutcome = Option<(f64, usize)>;

fn run_trial(
    cfg: &ExperimentConfig,
    kind: SchemeKind,
    no_info: bool,
    sigma_e2: f64,
    snr_db: f64,
    trial: usize,
) -> TrialOutcome {
    let csi = draw_csi(
        cfg.nt,
        cfg.k_users,
        sigma_e2,
        SIGMA_N2,
        trial_channel_seed(cfg.master_seed, trial),
    )
    .expect("config was validated");
    let opt = OptimizerConfig {
        rng_seed: trial_optimizer_seed(cfg.master_seed, trial),
        ..cfg.optimizer.clone()
    };
    match evaluate_scheme(&csi, snr_db_to_power(snr_db), &opt, kind, no_info) {
        Ok(out) if out.converged => Some((out.rates.r_sum, out.iterations)),
        _ => None,
    }
}

/// Runs the full sweep: every configured scheme at every
/// `(sigma_e2, snr_db)` grid point, `n_trials` paired trials each.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let n_sigma = cfg.sigma_e2_list.len();
    let n_snr = cfg.snr_db_list.len();
    let n_trials = cfg.n_trials;

    let mut items = Vec::with_capacity(cfg.schemes.len() * n_sigma * n_snr * n_trials);
    for e in 0..cfg.schemes.len() {
        for g in 0..n_sigma {
            for s in 0..n_snr {
                for t in 0..n_trials {
                    items.push((e, g, s, t));
                }
            }
        }
    }

    let outcomes: Vec<TrialOutcome> = items
        .par_iter()
        .map(|&(e, g, s, t)| {
            let entry = cfg.schemes[e];
            run_trial(
                cfg,
                entry.kind,
                entry.no_info,
                cfg.sigma_e2_list[g],
                cfg.snr_db_list[s],
                t,
            )
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.schemes.len() * n_sigma * n_snr);
    for (cell, chunk) in outcomes.chunks(n_trials).enumerate() {
        let s = cell % n_snr;
        let g = (cell / n_snr) % n_sigma;
        let e = cell / (n_snr * n_sigma);
        let entry = cfg.schemes[e];

        let survivors: Vec<(f64, usize)> = chunk.iter().flatten().copied().collect();
        let n_ok = survivors.len();
        let (mean, stderr) = mean_and_stderr(survivors.iter().map(|&(r, _)| r));
        let (mean_iters, _) = mean_and_stderr(survivors.iter().map(|&(_, i)| i as f64));
        rows.push(SweepRow {
            scheme: entry.kind,
            no_info: entry.no_info,
            snr_db: cfg.snr_db_list[s],
            sigma_e2: cfg.sigma_e2_list[g],
            mean_sum_rate: mean,
            stderr,
            mean_iters,
            failures: n_trials - n_ok,
            n_trials,
        });
    }
    Ok(SweepResult { rows })
}

/// Mean and standard error of the mean (sample standard deviation over
/// sqrt n); both NaN for an empty input, stderr 0 for a single value.
fn mean_and_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
