//! Comparison schemes: OMA time sharing, RSMA with fixed zero-forcing or
//! maximum-ratio private directions, and the "no error information"
//! variants that optimize as if the channel estimate were exact.
//!
//! The fixed-direction schemes keep the private directions `v_k` pinned and
//! optimize only the per-stream powers plus the common precoder. Writing
//! `p_k = q_k v_k` turns every rate into a quadratic-form ratio in the
//! reduced variable `q = [q_1, ..., q_K, p_c]` with matrices obtained from
//! the full stacked ones by congruence, so the same alternating loop serves
//! all schemes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::CsiModel;
use crate::optimizer::{
    anchors_from_point, random_anchors, run, run_engine, OptimizationResult, OptimizerConfig,
    Scheme,
};
use crate::rates::{
    build_stacked, gmi_scalar, rate_report, PrecoderSet, RateReport, StackedMatrices,
};
use crate::{Error, Result};

/// How the private directions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Zf,
    Mrt,
}

/// Unit-norm private-stream directions shared by all powers.
#[derive(Debug, Clone)]
pub struct FixedDirections {
    pub v_private: Vec<DVector<Complex64>>,
    pub kind: DirectionKind,
}

/// Zero-forcing directions from the right pseudo-inverse
/// `W = H^H (H H^H)^{-1}` of the estimated channel matrix, columns
/// normalized. Requires `K <= Nt` and full row rank.
pub fn zf_directions(csi: &CsiModel) -> Result<FixedDirections> {
    if csi.k_users > csi.nt {
        return Err(Error::RankDeficient(format!(
            "zero forcing needs K <= Nt, got K = {} users and Nt = {} antennas",
            csi.k_users, csi.nt
        )));
    }
    // H has h_k^H as rows, so H p picks out the per-user inner products.
    let mut h = DMatrix::zeros(csi.k_users, csi.nt);
    for (k, hk) in csi.h_hat.iter().enumerate() {
        h.row_mut(k).copy_from(&hk.adjoint());
    }
    let gram = &h * h.adjoint();
    let inv = gram.clone().try_inverse().ok_or_else(|| {
        Error::RankDeficient(format!(
            "estimated channel matrix has rank below {} (Gram matrix is singular)",
            csi.k_users
        ))
    })?;
    let w = h.adjoint() * inv;
    let mut v_private = Vec::with_capacity(csi.k_users);
    for k in 0..csi.k_users {
        let col = w.column(k).into_owned();
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::RankDeficient(format!(
                "pseudo-inverse column {k} is degenerate"
            )));
        }
        v_private.push(col / Complex64::new(norm, 0.0));
    }
    Ok(FixedDirections {
        v_private,
        kind: DirectionKind::Zf,
    })
}

/// Maximum-ratio directions `v_k = h_hat_k / ||h_hat_k||`.
pub fn mrt_directions(csi: &CsiModel) -> Result<FixedDirections> {
    let mut v_private = Vec::with_capacity(csi.k_users);
    for (k, h) in csi.h_hat.iter().enumerate() {
        let norm = h.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "user {k} has a zero channel estimate; MRT direction undefined"
            )));
        }
        v_private.push(h / Complex64::new(norm, 0.0));
    }
    Ok(FixedDirections {
        v_private,
        kind: DirectionKind::Mrt,
    })
}

/// Congruence map `T = blockdiag(v_1, ..., v_K, I_nt)` that expands the
/// reduced variable `q` to a full stacked precoder.
fn expansion_map(csi: &CsiModel, dirs: &FixedDirections) -> DMatrix<Complex64> {
    let nt = csi.nt;
    let k = csi.k_users;
    let mut t = DMatrix::zeros(nt * (k + 1), k + nt);
    for (j, v) in dirs.v_private.iter().enumerate() {
        t.view_mut((j * nt, j), (nt, 1)).copy_from(v);
    }
    for i in 0..nt {
        t[(k * nt + i, k + i)] = Complex64::new(1.0, 0.0);
    }
    t
}

/// Optimizes per-stream powers and the common precoder for fixed private
/// directions, via the same alternating loop on congruence-reduced stacked
/// matrices (`q = [sqrt(P_1), ..., sqrt(P_K), p_c]`, dimension `K + Nt`).
/// The configured scheme is ignored: fixed directions describe the full
/// RSMA stream layout.
pub fn optimize_fixed_directions(
    csi: &CsiModel,
    dirs: &FixedDirections,
    p_t: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    if dirs.v_private.len() != csi.k_users {
        return Err(Error::DimensionMismatch(format!(
            "{} directions for {} users",
            dirs.v_private.len(),
            csi.k_users
        )));
    }
    for (k, v) in dirs.v_private.iter().enumerate() {
        if v.len() != csi.nt {
            return Err(Error::DimensionMismatch(format!(
                "direction {k} has {} entries, expected {}",
                v.len(),
                csi.nt
            )));
        }
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "direction {k} is not unit norm"
            )));
        }
    }

    let full = build_stacked(csi, p_t)?;
    let t = expansion_map(csi, dirs);
    let reduced: Vec<StackedMatrices> = full
        .iter()
        .map(|s| {
            let mut dims = vec![1; csi.k_users];
            dims.push(csi.nt);
            StackedMatrices {
                a: t.adjoint() * &s.a * &t,
                b: t.adjoint() * &s.b * &t,
                d: t.adjoint() * &s.d * &t,
                p_t,
                block_dims: dims,
            }
        })
        .collect();

    // Uniform-power start along the fixed directions; common stream along
    // the summed estimate, as in the full problem's initialization.
    let per_stream = (p_t / (csi.k_users + 1) as f64).sqrt();
    let mut q0 = DVector::zeros(csi.k_users + csi.nt);
    for k in 0..csi.k_users {
        q0[k] = Complex64::new(per_stream, 0.0);
    }
    let sum = csi
        .h_hat
        .iter()
        .fold(DVector::<Complex64>::zeros(csi.nt), |acc, h| acc + h);
    let dir = if sum.norm() > 1e-12 {
        &sum / Complex64::new(sum.norm(), 0.0)
    } else {
        let mut e = DVector::zeros(csi.nt);
        e[0] = Complex64::new(1.0, 0.0);
        e
    };
    q0.rows_mut(csi.k_users, csi.nt)
        .copy_from(&(dir * Complex64::new(per_stream, 0.0)));

    let init = match cfg.init {
        crate::optimizer::InitStrategy::MrtUniform => anchors_from_point(&reduced, &q0),
        crate::optimizer::InitStrategy::Random => random_anchors(csi, p_t, cfg.rng_seed),
    };

    let outcome = run_engine(
        &reduced,
        p_t,
        &BTreeSet::new(),
        init,
        |seed| random_anchors(csi, p_t, seed),
        cfg,
    )?;

    // Expand q back to the full precoder set; |q_k|^2 is the power on
    // stream k, the phase is immaterial.
    let q = outcome.p_star;
    let p_private = (0..csi.k_users)
        .map(|k| &dirs.v_private[k] * q[k])
        .collect();
    let p_common = q.rows(csi.k_users, csi.nt).into_owned();
    let precoders = PrecoderSet::new(p_private, p_common)?.scaled_to_power(p_t)?;
    let rates = rate_report(csi, &precoders);
    Ok(OptimizationResult {
        precoders,
        rates,
        objective_trace: outcome.objective_trace,
        iterations: outcome.iterations,
        rank1_ratio: outcome.rank1_ratio,
        converged: outcome.converged,
    })
}

/// OMA with equal time sharing: each user gets the full power on its
/// MRT-precoded private stream for a `1/K` fraction of the time, so the
/// per-user rate is `log2(1 + p_t ||h_k||^2 / (sigma_e2 p_t + sigma_n2)) / K`
/// and the common stream is off.
pub fn oma_rate(csi: &CsiModel, p_t: f64) -> Result<RateReport> {
    if !(p_t >= 0.0) || !p_t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p_t must be nonnegative and finite, got {p_t}"
        )));
    }
    let share = 1.0 / csi.k_users as f64;
    let r_private = (0..csi.k_users)
        .map(|k| {
            share
                * gmi_scalar(
                    Complex64::new(csi.strength(k).sqrt(), 0.0),
                    csi.sigma_e2,
                    p_t,
                    csi.sigma_n2,
                )
        })
        .collect();
    Ok(RateReport::new(vec![0.0; csi.k_users], r_private))
}

/// Scheme selector covering the optimizer schemes, OMA, and the
/// fixed-direction variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Rsma,
    Noma,
    Sdma,
    Oma,
    RsmaZf,
    RsmaMrt,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Rsma,
        SchemeKind::Noma,
        SchemeKind::Sdma,
        SchemeKind::Oma,
        SchemeKind::RsmaZf,
        SchemeKind::RsmaMrt,
    ];
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SchemeKind::Rsma => "RSMA",
            SchemeKind::Noma => "NOMA",
            SchemeKind::Sdma => "SDMA",
            SchemeKind::Oma => "OMA",
            SchemeKind::RsmaZf => "RSMA-ZF",
            SchemeKind::RsmaMrt => "RSMA-MRT",
        };
        f.write_str(name)
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "rsma" => Ok(SchemeKind::Rsma),
            "noma" => Ok(SchemeKind::Noma),
            "sdma" => Ok(SchemeKind::Sdma),
            "oma" => Ok(SchemeKind::Oma),
            "rsmazf" | "zf" => Ok(SchemeKind::RsmaZf),
            "rsmamrt" | "mrt" => Ok(SchemeKind::RsmaMrt),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme '{s}' (expected rsma, noma, sdma, oma, rsma_zf, or rsma_mrt)"
            ))),
        }
    }
}

/// Rates and loop diagnostics for one scheme evaluation.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub rates: RateReport,
    pub iterations: usize,
    pub converged: bool,
    /// The designed precoders; `None` for OMA, whose time-shared layout has
    /// no single precoder set.
    pub precoders: Option<PrecoderSet>,
}

/// Evaluates one scheme on one channel model.
///
/// With `no_info` set, the transmitter designs its precoders under a copy of
/// the model with `sigma_e2 = 0` (it treats the estimate as exact), and the
/// returned rates re-evaluate those precoders under the true error variance.
pub fn evaluate_scheme(
    csi: &CsiModel,
    p_t: f64,
    cfg: &OptimizerConfig,
    kind: SchemeKind,
    no_info: bool,
) -> Result<SchemeOutcome> {
    // OMA's precoder and power are fixed, so error information changes
    // nothing; evaluate directly under the true model.
    if kind == SchemeKind::Oma {
        return Ok(SchemeOutcome {
            rates: oma_rate(csi, p_t)?,
            iterations: 0,
            converged: true,
            precoders: None,
        });
    }

    let design_csi = if no_info {
        csi.assuming_zero_error()
    } else {
        csi.clone()
    };

    let result = match kind {
        SchemeKind::Rsma | SchemeKind::Noma | SchemeKind::Sdma => {
            let scheme = match kind {
                SchemeKind::Rsma => Scheme::Rsma,
                SchemeKind::Noma => Scheme::Noma,
                _ => Scheme::Sdma,
            };
            let cfg = OptimizerConfig {
                scheme,
                ..cfg.clone()
            };
            run(&design_csi, p_t, &cfg)?
        }
        SchemeKind::RsmaZf => {
            let dirs = zf_directions(&design_csi)?;
            optimize_fixed_directions(&design_csi, &dirs, p_t, cfg)?
        }
        SchemeKind::RsmaMrt => {
            let dirs = mrt_directions(&design_csi)?;
            optimize_fixed_directions(&design_csi, &dirs, p_t, cfg)?
        }
        SchemeKind::Oma => unreachable!(),
    };

    let rates = if no_info {
        rate_report(csi, &result.precoders)
    } else {
        result.rates.clone()
    };
    Ok(SchemeOutcome {
        rates,
        iterations: result.iterations,
        converged: result.converged,
        precoders: Some(result.precoders),
    })
}

/// The "no information about channel error" variant of a scheme: design
/// under `sigma_e2 = 0`, evaluate under the true error variance.
pub fn no_info_variant(
    csi: &CsiModel,
    p_t: f64,
    cfg: &OptimizerConfig,
    kind: SchemeKind,
) -> Result<SchemeOutcome> {
    evaluate_scheme(csi, p_t, cfg, kind, true)
}
