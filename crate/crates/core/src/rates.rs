//! GMI achievable rates and the stacked quadratic-form matrices consumed by
//! the optimizer.
//!
//! With imperfect CSIR the receivers run nearest-neighbor decoding against
//! the channel estimate, and the achievable rate is the generalized mutual
//! information: the estimation error contributes `sigma_e2 * ||p_j||^2` of
//! interference per stream, including the common stream's residual after
//! SIC. Every rate is therefore a ratio of Hermitian quadratic forms in the
//! stacked precoder `p = [p_1; ...; p_K; p_c]` (common block last), which is
//! what makes the SDR lifting possible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::CsiModel;
use crate::{Error, Result};

/// Private precoders for each user plus the common-stream precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// Per-user private precoders `p_k`, each of length `nt`.
    pub p_private: Vec<DVector<Complex64>>,
    /// Common-stream precoder `p_c`, length `nt`.
    pub p_common: DVector<Complex64>,
}

impl PrecoderSet {
    pub fn new(p_private: Vec<DVector<Complex64>>, p_common: DVector<Complex64>) -> Result<Self> {
        if p_private.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one private precoder".into(),
            ));
        }
        let nt = p_common.len();
        if nt == 0 || p_private.iter().any(|p| p.len() != nt) {
            return Err(Error::DimensionMismatch(
                "all precoders must share one nonzero antenna count".into(),
            ));
        }
        Ok(Self {
            p_private,
            p_common,
        })
    }

    pub fn nt(&self) -> usize {
        self.p_common.len()
    }

    pub fn k_users(&self) -> usize {
        self.p_private.len()
    }

    /// Stacked vector `[p_1; ...; p_K; p_c]` of length `nt * (K + 1)`;
    /// the common block comes last.
    pub fn stacked(&self) -> DVector<Complex64> {
        let nt = self.nt();
        let mut out = DVector::zeros(nt * (self.k_users() + 1));
        for (k, p) in self.p_private.iter().enumerate() {
            out.rows_mut(k * nt, nt).copy_from(p);
        }
        out.rows_mut(self.k_users() * nt, nt).copy_from(&self.p_common);
        out
    }

    /// Splits a stacked vector back into private and common precoders.
    pub fn from_stacked(p: &DVector<Complex64>, nt: usize, k_users: usize) -> Result<Self> {
        if nt == 0 || k_users == 0 || p.len() != nt * (k_users + 1) {
            return Err(Error::DimensionMismatch(format!(
                "stacked vector has {} entries, expected nt*(K+1) = {}",
                p.len(),
                nt * (k_users + 1)
            )));
        }
        let p_private = (0..k_users).map(|k| p.rows(k * nt, nt).into_owned()).collect();
        let p_common = p.rows(k_users * nt, nt).into_owned();
        Self::new(p_private, p_common)
    }

    /// Total transmit power `sum_i ||p_i||^2`.
    pub fn total_power(&self) -> f64 {
        self.p_private.iter().map(|p| p.norm_squared()).sum::<f64>()
            + self.p_common.norm_squared()
    }

    /// Rescaled copy with total power exactly `p_t`.
    pub fn scaled_to_power(&self, p_t: f64) -> Result<Self> {
        let power = self.total_power();
        if power <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot rescale an all-zero precoder set".into(),
            ));
        }
        if !(p_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target power must be positive, got {p_t}"
            )));
        }
        let s = Complex64::new((p_t / power).sqrt(), 0.0);
        Ok(Self {
            p_private: self.p_private.iter().map(|p| p * s).collect(),
            p_common: &self.p_common * s,
        })
    }
}

/// Per-user rate summary in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Common-stream GMI seen by each user.
    pub r_common_per_user: Vec<f64>,
    /// Private-stream GMI of each user.
    pub r_private: Vec<f64>,
    /// Rate carried by the common stream: the minimum of
    /// `r_common_per_user`, since every user must decode it.
    pub r_common: f64,
    /// Sum-rate `r_common + sum_k r_private[k]`.
    pub r_sum: f64,
}

impl RateReport {
    pub fn new(r_common_per_user: Vec<f64>, r_private: Vec<f64>) -> Self {
        let r_common = r_common_per_user
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let r_common = if r_common_per_user.is_empty() { 0.0 } else { r_common };
        let r_sum = r_common + r_private.iter().sum::<f64>();
        Self {
            r_common_per_user,
            r_private,
            r_common,
            r_sum,
        }
    }
}

/// Hermitian quadratic form `p^H M p` (real by symmetry).
pub(crate) fn quad_form(m: &DMatrix<Complex64>, p: &DVector<Complex64>) -> f64 {
    p.dotc(&(m * p)).re
}

/// Point-to-point GMI of `y = h x + n` with Gaussian input of power
/// `input_power`, channel estimate `h_hat`, error variance `err_var`, and
/// noise variance `noise_var`:
/// `log2(1 + |h_hat|^2 eps / (err_var * eps + N))`.
pub fn gmi_scalar(h_hat: Complex64, err_var: f64, input_power: f64, noise_var: f64) -> f64 {
    let signal = h_hat.norm_sqr() * input_power;
    (1.0 + signal / (err_var * input_power + noise_var)).log2()
}

/// Total error-leakage interference `sigma_e2 * sum_i ||p_i||^2` over all
/// K+1 streams, which is what `E[|e_k^H p_j|^2] = p_j^H Phi p_j` sums to
/// under the spherical error covariance.
fn error_leakage(csi: &CsiModel, prec: &PrecoderSet) -> f64 {
    csi.sigma_e2 * prec.total_power()
}

fn check_dims(csi: &CsiModel, prec: &PrecoderSet) {
    assert_eq!(prec.nt(), csi.nt, "precoders and CSI disagree on nt");
    assert_eq!(
        prec.k_users(),
        csi.k_users,
        "precoders and CSI disagree on user count"
    );
}

/// Common-stream GMI at user `user_k`: all private streams plus the error
/// leakage of every stream act as interference.
pub fn rate_common(csi: &CsiModel, prec: &PrecoderSet, user_k: usize) -> f64 {
    check_dims(csi, prec);
    let h = &csi.h_hat[user_k];
    let signal = h.dotc(&prec.p_common).norm_sqr();
    let private_inter: f64 = prec
        .p_private
        .iter()
        .map(|p| h.dotc(p).norm_sqr())
        .sum();
    let denom = private_inter + error_leakage(csi, prec) + csi.sigma_n2;
    (1.0 + signal / denom).log2()
}

/// Private-stream GMI at user `user_k` after SIC of the common stream.
///
/// The common precoder still contributes `sigma_e2 * ||p_c||^2` to the
/// denominator: the error-coupled part of the common stream survives SIC.
pub fn rate_private(csi: &CsiModel, prec: &PrecoderSet, user_k: usize) -> f64 {
    check_dims(csi, prec);
    let h = &csi.h_hat[user_k];
    let signal = h.dotc(&prec.p_private[user_k]).norm_sqr();
    let cross: f64 = prec
        .p_private
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != user_k)
        .map(|(_, p)| h.dotc(p).norm_sqr())
        .sum();
    let denom = cross + error_leakage(csi, prec) + csi.sigma_n2;
    (1.0 + signal / denom).log2()
}

/// Full per-user rate summary for one precoder set.
pub fn rate_report(csi: &CsiModel, prec: &PrecoderSet) -> RateReport {
    let r_common_per_user = (0..csi.k_users)
        .map(|k| rate_common(csi, prec, k))
        .collect();
    let r_private = (0..csi.k_users)
        .map(|k| rate_private(csi, prec, k))
        .collect();
    RateReport::new(r_common_per_user, r_private)
}

/// Per-user stacked matrices `A_k >= B_k >= D_k` of size `nt * (K + 1)`.
///
/// Under full transmit power `||p||^2 = p_t` the rates collapse to
/// `R_ck = log2(p^H A_k p / p^H B_k p)` and
/// `R_k = log2(p^H B_k p / p^H D_k p)`. All three matrices share the
/// additive `(sigma_n2 / p_t + sigma_e2) I` term; `B_k` removes the
/// estimate's outer product from the last (common) diagonal block and `D_k`
/// additionally removes it from the k-th private block.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrices {
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    pub d: DMatrix<Complex64>,
    /// Total power baked into the `sigma_n2 / p_t` diagonal term.
    pub p_t: f64,
    /// Sizes of the K+1 stacked blocks, common block last. Uniformly `nt`
    /// for the full problem; the fixed-direction reduction shrinks the
    /// private blocks to scalars.
    pub block_dims: Vec<usize>,
}

impl StackedMatrices {
    pub fn dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Row/column offset of block `j`.
    pub fn block_offset(&self, j: usize) -> usize {
        self.block_dims[..j].iter().sum()
    }
}

/// Builds the stacked matrices for every user.
pub fn build_stacked(csi: &CsiModel, p_t: f64) -> Result<Vec<StackedMatrices>> {
    if !(p_t > 0.0) || !p_t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p_t must be positive and finite, got {p_t}"
        )));
    }
    let nt = csi.nt;
    let k_users = csi.k_users;
    let n = nt * (k_users + 1);
    let block_dims = vec![nt; k_users + 1];
    let diag = Complex64::new(csi.sigma_n2 / p_t + csi.sigma_e2, 0.0);

    let mut out = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let outer = &csi.h_hat[k] * csi.h_hat[k].adjoint();
        let mut a = DMatrix::zeros(n, n);
        for blk in 0..=k_users {
            a.view_mut((blk * nt, blk * nt), (nt, nt)).copy_from(&outer);
        }
        for i in 0..n {
            a[(i, i)] += diag;
        }
        let mut b = a.clone();
        {
            let mut blk = b.view_mut((k_users * nt, k_users * nt), (nt, nt));
            blk -= &outer;
        }
        let mut d = b.clone();
        {
            let mut blk = d.view_mut((k * nt, k * nt), (nt, nt));
            blk -= &outer;
        }
        out.push(StackedMatrices {
            a,
            b,
            d,
            p_t,
            block_dims: block_dims.clone(),
        });
    }
    Ok(out)
}

/// Sum-rate objective in the stacked form:
/// `f(p) = sum_k log2(p^H B_k p / p^H D_k p) + min_j log2(p^H A_j p / p^H B_j p)`.
///
/// Scale invariant: `f(alpha p) = f(p)` for any nonzero `alpha`.
pub fn objective_f(stacked: &[StackedMatrices], p: &DVector<Complex64>) -> Result<f64> {
    let first = stacked
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty stacked matrix list".into()))?;
    if p.len() != first.dim() {
        return Err(Error::DimensionMismatch(format!(
            "stacked vector has {} entries, matrices are {}x{}",
            p.len(),
            first.dim(),
            first.dim()
        )));
    }
    if p.norm_squared() == 0.0 {
        return Err(Error::InvalidParameter(
            "objective is undefined at the zero vector".into(),
        ));
    }
    let mut private_sum = 0.0;
    let mut common_min = f64::INFINITY;
    for m in stacked {
        let pa = quad_form(&m.a, p);
        let pb = quad_form(&m.b, p);
        let pd = quad_form(&m.d, p);
        private_sum += (pb / pd).log2();
        common_min = common_min.min((pa / pb).log2());
    }
    Ok(private_sum + common_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{derive_seed, draw_csi};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cvec(vals: &[(f64, f64)]) -> DVector<Complex64> {
        DVector::from_iterator(vals.len(), vals.iter().map(|&(r, i)| Complex64::new(r, i)))
    }

    fn random_precoders(csi: &CsiModel, p_t: f64, seed: u64) -> PrecoderSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| {
            DVector::from_iterator(
                n,
                (0..n).map(|_| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                }),
            )
        };
        let prec = PrecoderSet::new(
            (0..csi.k_users).map(|_| draw(csi.nt)).collect(),
            draw(csi.nt),
        )
        .unwrap();
        prec.scaled_to_power(p_t).unwrap()
    }

    #[test]
    fn gmi_scalar_hand_values() {
        assert_relative_eq!(
            gmi_scalar(Complex64::new(1.0, 0.0), 0.0, 1.0, 1.0),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(gmi_scalar(Complex64::new(0.0, 0.0), 0.3, 2.0, 1.0), 0.0);
        assert_relative_eq!(
            gmi_scalar(Complex64::new(1.0, 0.0), 0.1, 10.0, 1.0),
            6.0f64.log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rate_common_hand_values() {
        // Scalar case: Nt=1, K=1, everything unit.
        let csi = CsiModel::new(vec![cvec(&[(1.0, 0.0)])], 0.0, 1.0).unwrap();
        let prec = PrecoderSet::new(vec![cvec(&[(1.0, 0.0)])], cvec(&[(1.0, 0.0)])).unwrap();
        assert_relative_eq!(rate_common(&csi, &prec, 0), 1.5f64.log2(), epsilon = 1e-12);

        // Zero common precoder carries no rate.
        let prec0 = PrecoderSet::new(vec![cvec(&[(1.0, 0.0)])], cvec(&[(0.0, 0.0)])).unwrap();
        assert_eq!(rate_common(&csi, &prec0, 0), 0.0);

        // Orthogonal private stream; only error leakage and noise remain.
        let csi = CsiModel::new(vec![cvec(&[(1.0, 0.0), (0.0, 0.0)])], 0.1, 1.0).unwrap();
        let prec = PrecoderSet::new(
            vec![cvec(&[(0.0, 0.0), (1.0, 0.0)])],
            cvec(&[(1.0, 0.0), (0.0, 0.0)]),
        )
        .unwrap();
        assert_relative_eq!(
            rate_common(&csi, &prec, 0),
            (1.0 + 1.0 / 1.2f64).log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rate_private_hand_values() {
        // Interference-free Shannon case.
        let p_t: f64 = 4.0;
        let csi = CsiModel::new(vec![cvec(&[(1.0, 0.0), (0.0, 0.0)])], 0.0, 1.0).unwrap();
        let prec = PrecoderSet::new(
            vec![cvec(&[(p_t.sqrt(), 0.0), (0.0, 0.0)])],
            cvec(&[(0.0, 0.0), (0.0, 0.0)]),
        )
        .unwrap();
        assert_relative_eq!(
            rate_private(&csi, &prec, 0),
            (1.0 + p_t).log2(),
            epsilon = 1e-12
        );

        // Zero private precoder carries no rate.
        let prec0 = PrecoderSet::new(
            vec![cvec(&[(0.0, 0.0), (0.0, 0.0)])],
            cvec(&[(1.0, 0.0), (0.0, 0.0)]),
        )
        .unwrap();
        assert_eq!(rate_private(&csi, &prec0, 0), 0.0);

        // Two users, unit everything: denominator 1 + 0.3 + 1.
        let csi = CsiModel::new(vec![cvec(&[(1.0, 0.0)]), cvec(&[(0.5, 0.0)])], 0.1, 1.0).unwrap();
        let prec = PrecoderSet::new(
            vec![cvec(&[(1.0, 0.0)]), cvec(&[(1.0, 0.0)])],
            cvec(&[(1.0, 0.0)]),
        )
        .unwrap();
        assert_relative_eq!(
            rate_private(&csi, &prec, 0),
            (1.0 + 1.0 / 2.3f64).log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn stacked_zero_channel_is_pure_diagonal() {
        let csi = CsiModel::new(vec![cvec(&[(0.0, 0.0), (0.0, 0.0)])], 0.2, 1.0).unwrap();
        let stacked = build_stacked(&csi, 2.0).unwrap();
        let c = 1.0 / 2.0 + 0.2;
        let expected = DMatrix::from_diagonal_element(4, 4, Complex64::new(c, 0.0));
        assert_eq!(stacked[0].a, expected);
        assert_eq!(stacked[0].b, expected);
        assert_eq!(stacked[0].d, expected);
    }

    #[test]
    fn quadratic_form_matches_direct_interference_sum() {
        for seed in 0..30 {
            let csi = draw_csi(2, 2, 0.07, 1.3, seed).unwrap();
            let p_t = 5.0;
            let stacked = build_stacked(&csi, p_t).unwrap();
            let prec = random_precoders(&csi, p_t, derive_seed(1, seed));
            let p = prec.stacked();
            for (k, m) in stacked.iter().enumerate() {
                let h = &csi.h_hat[k];
                let direct: f64 = prec
                    .p_private
                    .iter()
                    .chain(std::iter::once(&prec.p_common))
                    .map(|pj| h.dotc(pj).norm_sqr() + csi.sigma_e2 * pj.norm_squared())
                    .sum::<f64>()
                    + csi.sigma_n2;
                assert_relative_eq!(quad_form(&m.a, &p), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_form_rates_match_direct_formulas() {
        for seed in 0..50 {
            let csi = draw_csi(3, 2, 0.05, 0.8, seed).unwrap();
            let p_t = 12.0;
            let stacked = build_stacked(&csi, p_t).unwrap();
            let prec = random_precoders(&csi, p_t, derive_seed(2, seed));
            let p = prec.stacked();
            for (k, m) in stacked.iter().enumerate() {
                let rc = (quad_form(&m.a, &p) / quad_form(&m.b, &p)).log2();
                let rp = (quad_form(&m.b, &p) / quad_form(&m.d, &p)).log2();
                assert_relative_eq!(rc, rate_common(&csi, &prec, k), max_relative = 1e-9);
                assert_relative_eq!(rp, rate_private(&csi, &prec, k), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn psd_ordering_of_stacked_matrices() {
        for seed in 0..10 {
            let csi = draw_csi(2, 3, 0.1, 1.0, seed).unwrap();
            let stacked = build_stacked(&csi, 3.0).unwrap();
            for m in &stacked {
                for diff in [&m.a - &m.b, &m.b - &m.d] {
                    let min_eig = diff
                        .symmetric_eigen()
                        .eigenvalues
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min);
                    assert!(min_eig >= -1e-12, "ordering violated: min eig {min_eig}");
                }
            }
        }
    }

    #[test]
    fn objective_matches_sum_rate_and_telescopes_for_single_user() {
        for seed in 0..20 {
            let csi = draw_csi(2, 2, 0.08, 1.0, seed).unwrap();
            let p_t = 6.0;
            let stacked = build_stacked(&csi, p_t).unwrap();
            let prec = random_precoders(&csi, p_t, derive_seed(3, seed));
            let f = objective_f(&stacked, &prec.stacked()).unwrap();
            let report = rate_report(&csi, &prec);
            assert_relative_eq!(f, report.r_sum, max_relative = 1e-9);
        }

        // K = 1 with zero error: the two log ratios telescope.
        let csi = draw_csi(2, 1, 0.0, 1.0, 5).unwrap();
        let p_t = 8.0;
        let stacked = build_stacked(&csi, p_t).unwrap();
        let prec = random_precoders(&csi, p_t, 77);
        let f = objective_f(&stacked, &prec.stacked()).unwrap();
        let h = &csi.h_hat[0];
        let expected = (1.0
            + (h.dotc(&prec.p_private[0]).norm_sqr() + h.dotc(&prec.p_common).norm_sqr())
                / csi.sigma_n2)
            .log2();
        assert_relative_eq!(f, expected, max_relative = 1e-9);
    }

    #[test]
    fn objective_rejects_zero_vector() {
        let csi = draw_csi(2, 2, 0.05, 1.0, 1).unwrap();
        let stacked = build_stacked(&csi, 1.0).unwrap();
        let zero = DVector::zeros(6);
        assert!(objective_f(&stacked, &zero).is_err());
    }

    #[test]
    fn zero_error_reduces_to_shannon_rates() {
        // With sigma_e2 = 0 the GMI denominators lose the leakage term, so
        // rates equal the perfect-CSIR Shannon expressions.
        let csi = draw_csi(2, 2, 0.0, 1.0, 9).unwrap();
        let prec = random_precoders(&csi, 4.0, 10);
        for k in 0..2 {
            let h = &csi.h_hat[k];
            let cross: f64 = prec
                .p_private
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, p)| h.dotc(p).norm_sqr())
                .sum();
            let shannon =
                (1.0 + h.dotc(&prec.p_private[k]).norm_sqr() / (cross + 1.0)).log2();
            assert_relative_eq!(rate_private(&csi, &prec, k), shannon, epsilon = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_is_scale_invariant(seed in 0u64..500, alpha in 0.05f64..20.0) {
            let csi = draw_csi(2, 2, 0.05, 1.0, seed).unwrap();
            let p_t = 7.0;
            let stacked = build_stacked(&csi, p_t).unwrap();
            let prec = random_precoders(&csi, p_t, seed ^ 0xabcd);
            let p = prec.stacked();
            let f = objective_f(&stacked, &p).unwrap();
            let scaled = &p * Complex64::new(alpha, alpha / 3.0);
            let f_scaled = objective_f(&stacked, &scaled).unwrap();
            prop_assert!((f - f_scaled).abs() <= 1e-9 * f.abs().max(1.0));
        }

        #[test]
        fn rates_are_nonnegative_and_finite(seed in 0u64..500) {
            let csi = draw_csi(2, 2, 0.15, 0.5, seed).unwrap();
            let prec = random_precoders(&csi, 10.0, seed ^ 0x1234);
            let report = rate_report(&csi, &prec);
            for r in report.r_common_per_user.iter().chain(report.r_private.iter()) {
                prop_assert!(r.is_finite() && *r >= 0.0);
            }
            prop_assert!(report.r_sum.is_finite() && report.r_sum >= 0.0);
            prop_assert!(
                (report.r_common
                    - report
                        .r_common_per_user
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min))
                .abs()
                    < 1e-15
            );
        }

        #[test]
        fn stacking_round_trips(seed in 0u64..200) {
            let csi = draw_csi(3, 2, 0.05, 1.0, seed).unwrap();
            let prec = random_precoders(&csi, 2.0, seed);
            let back = PrecoderSet::from_stacked(&prec.stacked(), 3, 2).unwrap();
            prop_assert_eq!(back, prec);
        }
    }
}
