//! Randomness and privacy primitives.
//!
//! Samplers run on 64-bit floats. The exponential mechanism's privacy proof
//! assumes exact real arithmetic; finite-precision Gumbel draws are the
//! usual practical stand-in and are not hardened against floating-point
//! side channels.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seeded, splittable random stream. Children derived with
/// [`derive`](Self::derive) depend only on the parent seed and the label,
/// never on how many draws the parent has made.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha12Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive(&self, label: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    pub fn gumbel(&mut self) -> f64 {
        gumbel_from_uniform(self.open01())
    }

    pub fn laplace(&mut self, scale: f64) -> Result<f64> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "laplace scale must be positive, got {scale}"
            )));
        }
        Ok(laplace_from_uniform(self.open01(), scale))
    }
}

/// Standard Gumbel by inversion: `-ln(-ln u)`.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Laplace(0, scale) by inversion of the CDF.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let c = u - 0.5;
    -scale * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Failure probability used only in accuracy analysis.
    pub beta: f64,
    pub sensitivity: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, beta: f64, sensitivity: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            epsilon,
            beta,
            sensitivity,
        })
    }
}

/// Splits the budget evenly over `m` releases (basic composition).
pub fn split_budget(p: PrivacyParams, m: usize) -> Result<Vec<PrivacyParams>> {
    if m == 0 {
        return Err(Error::InvalidParameter("cannot split a budget zero ways".into()));
    }
    let part = PrivacyParams {
        epsilon: p.epsilon / m as f64,
        ..p
    };
    Ok(vec![part; m])
}

/// Sensitivity `4 alpha n + 2` of the sketch-derived utility under swap
/// neighbours. Only established for `n > 1/alpha`.
pub fn gk_sensitivity(alpha: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0) || (n as f64) <= 1.0 / alpha {
        return Err(Error::SensitivityUndefined { n, alpha });
    }
    Ok(4.0 * alpha * n as f64 + 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_fixed_point() {
        assert_eq!(gumbel_from_uniform((-1.0f64).exp()), 0.0);
    }

    #[test]
    fn laplace_median_draw_is_zero() {
        assert_eq!(laplace_from_uniform(0.5, 3.0), 0.0);
        assert!(laplace_from_uniform(0.75, 1.0) > 0.0);
        assert!((laplace_from_uniform(0.75, 1.0) + laplace_from_uniform(0.25, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut r = RandomSource::new(1);
        assert!(r.laplace(0.0).is_err());
        assert!(r.laplace(-1.0).is_err());
        assert!(r.laplace(f64::NAN).is_err());
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..100 {
            assert_eq!(a.gumbel().to_bits(), b.gumbel().to_bits());
        }
    }

    #[test]
    fn derive_ignores_parent_position() {
        let a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        for _ in 0..10 {
            b.open01();
        }
        let (mut ca, mut cb) = (a.derive(3), b.derive(3));
        assert_eq!(ca.open01(), cb.open01());
        assert_ne!(a.derive(3).open01(), a.derive(4).open01());
    }

    #[test]
    fn split_budget_examples() {
        let p = PrivacyParams::new(1.0, 0.1, 1.0).unwrap();
        assert_eq!(split_budget(p, 1).unwrap(), vec![p]);
        let four = split_budget(p, 4).unwrap();
        assert_eq!(four.len(), 4);
        assert!(four.iter().all(|q| q.epsilon == 0.25));
        let p = PrivacyParams::new(0.5, 0.1, 1.0).unwrap();
        let three = split_budget(p, 3).unwrap();
        assert!(three.iter().all(|q| (q.epsilon - 1.0 / 6.0).abs() < 1e-15));
        assert!((three.iter().map(|q| q.epsilon).sum::<f64>() - 0.5).abs() < 1e-15);
        assert!(split_budget(p, 0).is_err());
    }

    #[test]
    fn gk_sensitivity_examples() {
        assert!((gk_sensitivity(0.1, 100).unwrap() - 42.0).abs() < 1e-9);
        assert!((gk_sensitivity(0.01, 10_000).unwrap() - 402.0).abs() < 1e-9);
        assert!((gk_sensitivity(0.5, 10).unwrap() - 22.0).abs() < 1e-9);
        assert!(gk_sensitivity(0.1, 10).is_err());
        assert!(gk_sensitivity(0.5, 2).is_err());
    }

    #[test]
    fn privacy_params_validation() {
        assert!(PrivacyParams::new(0.0, 0.1, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, 0.0, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, 1.5, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, 0.1, 0.0).is_err());
    }
}
