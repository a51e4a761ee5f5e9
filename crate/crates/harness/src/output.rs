//! Machine-readable serialization of sweep and convergence results.
//!
//! CSV schema (header is bit-exact):
//! `scheme,no_info,snr_db,sigma_e2,mean_sum_rate,stderr,mean_iters,failures,n_trials`
//! with floats rendered to 9 significant digits. JSONL mirrors the same
//! fields one record per line.

use serde::Serialize;

use crate::convergence::ConvergenceTrace;
use crate::sweep::SweepResult;

/// CSV header for sweep output.
pub const SWEEP_CSV_HEADER: &str =
    "scheme,no_info,snr_db,sigma_e2,mean_sum_rate,stderr,mean_iters,failures,n_trials";

/// CSV header for convergence-trace output.
pub const TRACE_CSV_HEADER: &str = "nt,k_users,trial,iteration,objective";

/// Renders a float with 9 significant digits, choosing fixed or exponential
/// notation like C's `%.9g` and trimming trailing zeros. Deterministic for
/// a given bit pattern.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_trailing_zeros(s)
    } else {
        let s = format!("{x:.8e}");
        // Rust renders exponents without a leading plus or zero padding;
        // trim the mantissa only.
        let (mantissa, exponent) = s.split_once('e').expect("exponential format");
        format!("{}e{}", trim_trailing_zeros(mantissa.to_string()), exponent)
    }
}

fn trim_trailing_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Sweep result as CSV text, one row per (scheme, snr, sigma_e2) cell.
pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.scheme,
            row.no_info,
            format_sig9(row.snr_db),
            format_sig9(row.sigma_e2),
            format_sig9(row.mean_sum_rate),
            format_sig9(row.stderr),
            format_sig9(row.mean_iters),
            row.failures,
            row.n_trials
        ));
    }
    out
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    scheme: &'a str,
    no_info: bool,
    snr_db: f64,
    sigma_e2: f64,
    mean_sum_rate: f64,
    stderr: f64,
    mean_iters: f64,
    failures: usize,
    n_trials: usize,
}

/// Sweep result as line-delimited JSON mirroring the CSV fields.
pub fn sweep_to_jsonl(result: &SweepResult) -> String {
    let mut out = String::new();
    for row in &result.rows {
        let scheme = row.scheme.to_string();
        let record = SweepRecord {
            scheme: &scheme,
            no_info: row.no_info,
            snr_db: row.snr_db,
            sigma_e2: row.sigma_e2,
            mean_sum_rate: row.mean_sum_rate,
            stderr: row.stderr,
            mean_iters: row.mean_iters,
            failures: row.failures,
            n_trials: row.n_trials,
        };
        out.push_str(&serde_json::to_string(&record).expect("plain record serializes"));
        out.push('\n');
    }
    out
}

/// Convergence traces as CSV, one row per iteration.
pub fn traces_to_csv(traces: &[ConvergenceTrace]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for tr in traces {
        for (i, obj) in tr.objective_trace.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                tr.nt,
                tr.k_users,
                tr.trial,
                i + 1,
                format_sig9(*obj)
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct TraceRecord {
    nt: usize,
    k_users: usize,
    trial: usize,
    iteration: usize,
    objective: f64,
}

/// Convergence traces as line-delimited JSON mirroring the CSV fields.
pub fn traces_to_jsonl(traces: &[ConvergenceTrace]) -> String {
    let mut out = String::new();
    for tr in traces {
        for (i, obj) in tr.objective_trace.iter().enumerate() {
            let record = TraceRecord {
                nt: tr.nt,
                k_users: tr.k_users,
                trial: tr.trial,
                iteration: i + 1,
                objective: *obj,
            };
            out.push_str(&serde_json::to_string(&record).expect("plain record serializes"));
            out.push('\n');
        }
    }
    out
}
