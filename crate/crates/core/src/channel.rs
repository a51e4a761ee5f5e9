//! Channel model: per-user estimates, error statistics, and reproducible
//! random draws.
//!
//! The true channel of user k is `h_k = h_hat_k + e_k`, where the estimate
//! `h_hat_k` is known at the base station and every receiver (lossless
//! feedback), and the error `e_k` is circularly-symmetric complex Gaussian
//! with covariance `sigma_e2 * I`. Entries of `h_k` have unit variance, so
//! estimate entries carry variance `1 - sigma_e2`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Channel state information shared by the base station and the receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiModel {
    /// Estimated channel vectors, one per user, each of length `nt`.
    pub h_hat: Vec<DVector<Complex64>>,
    /// Per-entry variance of the channel error, identical across users.
    pub sigma_e2: f64,
    /// Receiver noise variance.
    pub sigma_n2: f64,
    /// Number of transmit antennas.
    pub nt: usize,
    /// Number of single-antenna users.
    pub k_users: usize,
}

impl CsiModel {
    /// Builds a model from explicit estimates, validating the domain
    /// constraints `sigma_e2 in [0, 1)`, `sigma_n2 > 0`, and equal vector
    /// lengths.
    pub fn new(h_hat: Vec<DVector<Complex64>>, sigma_e2: f64, sigma_n2: f64) -> Result<Self> {
        if h_hat.is_empty() {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        let nt = h_hat[0].len();
        if nt == 0 {
            return Err(Error::InvalidParameter(
                "need at least one transmit antenna".into(),
            ));
        }
        if let Some(k) = h_hat.iter().position(|h| h.len() != nt) {
            return Err(Error::DimensionMismatch(format!(
                "h_hat[{k}] has {} entries, expected {nt}",
                h_hat[k].len()
            )));
        }
        validate_variances(sigma_e2, sigma_n2)?;
        let k_users = h_hat.len();
        Ok(Self {
            h_hat,
            sigma_e2,
            sigma_n2,
            nt,
            k_users,
        })
    }

    /// The same estimates with the error variance forced to zero, i.e. the
    /// model a transmitter uses when it has no information about channel
    /// error and treats `h_hat` as exact.
    pub fn assuming_zero_error(&self) -> Self {
        Self {
            sigma_e2: 0.0,
            ..self.clone()
        }
    }

    /// Squared norm of user `k`'s estimate.
    pub fn strength(&self, k: usize) -> f64 {
        self.h_hat[k].norm_squared()
    }

    /// Order-insensitive fingerprint of the model, used to assert that
    /// paired Monte Carlo trials really shared one channel draw.
    pub fn channel_hash(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.nt.hash(&mut hasher);
        self.k_users.hash(&mut hasher);
        self.sigma_e2.to_bits().hash(&mut hasher);
        self.sigma_n2.to_bits().hash(&mut hasher);
        for h in &self.h_hat {
            for z in h.iter() {
                z.re.to_bits().hash(&mut hasher);
                z.im.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// One realized channel: the estimate plus a concrete error draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// True channels `h_k = h_hat_k + e_k`.
    pub h_true: Vec<DVector<Complex64>>,
    /// The model the realization was drawn from.
    pub csi: CsiModel,
}

fn validate_variances(sigma_e2: f64, sigma_n2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&sigma_e2) {
        return Err(Error::InvalidParameter(format!(
            "sigma_e2 must lie in [0, 1), got {sigma_e2}"
        )));
    }
    if !(sigma_n2 > 0.0) || !sigma_n2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma_n2 must be positive and finite, got {sigma_n2}"
        )));
    }
    Ok(())
}

/// Mixes a stream index into a master seed (splitmix64 finalizer) so that
/// per-trial generators are independent and insensitive to launch order.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One circularly-symmetric complex Gaussian sample with the given variance:
/// `(x + iy) / sqrt(2)` scaled by the standard deviation, with `x`, `y`
/// independent standard normals.
fn sample_cscg<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

fn draw_vector<R: Rng>(rng: &mut R, len: usize, variance: f64) -> DVector<Complex64> {
    DVector::from_iterator(len, (0..len).map(|_| sample_cscg(rng, variance)))
}

/// Draws channel estimates for `k_users` users and `nt` antennas.
///
/// Estimate entries are i.i.d. circularly-symmetric complex Gaussian with
/// variance `1 - sigma_e2`, so the true channel keeps unit per-entry
/// variance. Deterministic for a fixed seed.
pub fn draw_csi(
    nt: usize,
    k_users: usize,
    sigma_e2: f64,
    sigma_n2: f64,
    rng_seed: u64,
) -> Result<CsiModel> {
    if nt == 0 || k_users == 0 {
        return Err(Error::InvalidParameter(
            "nt and k_users must be positive".into(),
        ));
    }
    validate_variances(sigma_e2, sigma_n2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let h_hat = (0..k_users)
        .map(|_| draw_vector(&mut rng, nt, 1.0 - sigma_e2))
        .collect();
    CsiModel::new(h_hat, sigma_e2, sigma_n2)
}

/// Draws one error realization `e_k ~ CN(0, sigma_e2 * I)` per user and
/// returns the true channels `h_hat_k + e_k`. Deterministic for a fixed seed.
pub fn draw_error(csi: &CsiModel, rng_seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let h_true = csi
        .h_hat
        .iter()
        .map(|h| h + draw_vector(&mut rng, csi.nt, csi.sigma_e2))
        .collect();
    ChannelRealization {
        h_true,
        csi: csi.clone(),
    }
}

/// Users sorted by descending estimated channel strength `|h_hat_k|^2`,
/// ties broken by lower user index.
pub fn user_strength_order(csi: &CsiModel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..csi.k_users).collect();
    order.sort_by(|&i, &j| {
        csi.strength(j)
            .partial_cmp(&csi.strength(i))
            .expect("channel norms are finite")
            .then(i.cmp(&j))
    });
    order
}
