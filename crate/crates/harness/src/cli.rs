//! Command-line interface.
//!
//! Subcommands:
//! - `sweep`    run the configured Monte Carlo sweep and write CSV/JSONL
//! - `converge` emit per-iteration objective traces for the configured
//!   `(nt, k_users)` pairs
//! - `single`   optimize one channel draw and print a human-readable report
//!
//! Exit codes: 0 success, 2 malformed config or usage, 3 solver hard
//! failure, 1 other errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use rsma_core::baselines::{evaluate_scheme, SchemeKind};
use rsma_core::channel::draw_csi;
use rsma_core::optimizer::OptimizerConfig;

use crate::config::ExperimentConfig;
use crate::convergence::run_convergence_trace;
use crate::output::{sweep_to_csv, sweep_to_jsonl, traces_to_csv, traces_to_jsonl};
use crate::sweep::{run_sweep, trial_optimizer_seed};
use crate::{snr_db_to_power, HarnessError, Result, SIGMA_N2};

#[derive(Debug, Parser)]
#[command(
    name = "rsma",
    version,
    about = "GMI-based sum-rate simulator for rate-splitting multiple access under imperfect CSIT/CSIR"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for Monte Carlo trials (defaults to the CPU count).
    #[arg(long, global = true, env = "RSMA_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep described by a config file.
    Sweep {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output path; overrides the config's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Emit per-iteration objective traces for the config's
    /// `converge.pairs` at SNR 20 dB, sigma_e2 = 0.1.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Optimize a single channel draw and print the rate report.
    Single {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        snr_db: f64,
        #[arg(long)]
        sigma_e2: f64,
        #[arg(long)]
        seed: u64,
        /// One of rsma, noma, sdma, oma, rsma_zf, rsma_mrt.
        #[arg(long, default_value = "rsma")]
        scheme: String,
        /// Design the precoders as if the channel estimate were exact.
        #[arg(long)]
        no_info: bool,
    },
}

/// Entry point taking explicit arguments; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let workers = cli.workers.map(|w| w as usize);
    match dispatch(cli.command, workers) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Config(_) => 2,
        HarnessError::Core(rsma_core::Error::SolverFailure(_)) => 3,
        _ => 1,
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(f),
        None => f(),
    }
}

fn dispatch(command: Command, workers: Option<usize>) -> Result<()> {
    match command {
        Command::Sweep {
            config,
            out,
            format,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out_path = out
                .or_else(|| cfg.output_path.clone())
                .ok_or_else(|| {
                    HarnessError::Config(
                        "no output path: pass --out or set `output` in the config".into(),
                    )
                })?;
            // Fail on an unwritable path before burning compute.
            let mut file = File::create(&out_path)?;
            let result = with_pool(workers, || run_sweep(&cfg))?;
            let text = match format {
                OutputFormat::Csv => sweep_to_csv(&result),
                OutputFormat::Jsonl => sweep_to_jsonl(&result),
            };
            file.write_all(text.as_bytes())?;
            eprintln!(
                "wrote {} rows to {}",
                result.rows.len(),
                out_path.display()
            );
            Ok(())
        }
        Command::Converge {
            config,
            out,
            format,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if cfg.converge_pairs.is_empty() {
                return Err(HarnessError::Config(
                    "config has no [converge] section with pairs".into(),
                ));
            }
            let out_path = out
                .or_else(|| cfg.output_path.clone())
                .ok_or_else(|| {
                    HarnessError::Config(
                        "no output path: pass --out or set `output` in the config".into(),
                    )
                })?;
            let mut file = File::create(&out_path)?;
            let pairs = cfg.converge_pairs.clone();
            let traces = with_pool(workers, || run_convergence_trace(&cfg, &pairs))?;
            let text = match format {
                OutputFormat::Csv => traces_to_csv(&traces),
                OutputFormat::Jsonl => traces_to_jsonl(&traces),
            };
            file.write_all(text.as_bytes())?;
            eprintln!("wrote {} traces to {}", traces.len(), out_path.display());
            Ok(())
        }
        Command::Single {
            nt,
            k,
            snr_db,
            sigma_e2,
            seed,
            scheme,
            no_info,
        } => {
            let report = run_single(nt, k, snr_db, sigma_e2, seed, &scheme, no_info)?;
            print!("{report}");
            Ok(())
        }
    }
}

/// Runs one channel draw through one scheme and renders the report.
pub fn run_single(
    nt: usize,
    k: usize,
    snr_db: f64,
    sigma_e2: f64,
    seed: u64,
    scheme: &str,
    no_info: bool,
) -> Result<String> {
    let kind: SchemeKind = scheme
        .parse()
        .map_err(|e: rsma_core::Error| HarnessError::Config(e.to_string()))?;
    let csi = draw_csi(nt, k, sigma_e2, SIGMA_N2, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let p_t = snr_db_to_power(snr_db);
    let cfg = OptimizerConfig {
        rng_seed: trial_optimizer_seed(seed, 0),
        ..OptimizerConfig::default()
    };
    let out = evaluate_scheme(&csi, p_t, &cfg, kind, no_info)?;

    let mut s = String::new();
    s.push_str(&format!(
        "scheme {kind}{} | nt={nt} k={k} snr={snr_db} dB (P_t={p_t:.6}) sigma_e2={sigma_e2} seed={seed}\n",
        if no_info { " (no-info)" } else { "" }
    ));
    s.push_str(&format!(
        "converged: {} after {} iterations\n",
        out.converged, out.iterations
    ));
    for (k_idx, (rc, rp)) in out
        .rates
        .r_common_per_user
        .iter()
        .zip(&out.rates.r_private)
        .enumerate()
    {
        s.push_str(&format!(
            "user {k_idx}: R_c,{k_idx} = {rc:.6}  R_{k_idx} = {rp:.6}\n"
        ));
    }
    s.push_str(&format!("common rate R_c = {:.6}\n", out.rates.r_common));
    s.push_str(&format!("sum rate R_s = {:.6} bit/s/Hz\n", out.rates.r_sum));
    match &out.precoders {
        Some(prec) => {
            for (k_idx, p) in prec.p_private.iter().enumerate() {
                s.push_str(&format!(
                    "stream power P_{} = {:.6}\n",
                    k_idx + 1,
                    p.norm_squared()
                ));
            }
            s.push_str(&format!(
                "stream power P_c = {:.6}\n",
                prec.p_common.norm_squared()
            ));
        }
        None => {
            s.push_str("stream powers: full power per user in its 1/K time slot (OMA)\n");
        }
    }
    Ok(s)
}
