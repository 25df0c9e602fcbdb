//! Continual release of a private quantile at every stream position.
//!
//! Items go into a summary at `alpha / 2`. At geometrically spaced,
//! data-independent checkpoints `n_min, n_min (1 + alpha/2), ...` a fresh
//! one-shot release is made at budget `eps / k_max`; in between, the last
//! release is held. An element that is an `alpha/2`-approximate quantile of
//! a prefix stays `alpha`-approximate until the prefix grows by a factor of
//! `1 + alpha/2`, so the held value stays useful until the next checkpoint.

use serde::{Deserialize, Serialize};

use crate::dp::{gk_sensitivity, PrivacyParams, RandomSource};
use crate::error::{Error, Result};
use crate::gk::GkSummary;
use crate::mechanism::{dp_quantile_gk, ExponentDivisor, MechanismConfig};
use crate::rank::{AugmentedSummary, TargetQuantile};
use crate::universe::{Element, Universe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinualParams {
    pub alpha: f64,
    pub eps: f64,
    pub q: f64,
    pub beta: f64,
    pub n_max: u64,
    pub divisor: ExponentDivisor,
    /// Replaces the computed first checkpoint.
    pub n_min_override: Option<u64>,
}

impl ContinualParams {
    pub fn new(alpha: f64, eps: f64, q: f64, n_max: u64, beta: f64) -> Self {
        Self {
            alpha,
            eps,
            q,
            beta,
            n_max,
            divisor: ExponentDivisor::TwiceSensitivity,
            n_min_override: None,
        }
    }
}

/// `ceil(log_{1 + alpha/2}(n_max / n_min)) + 1`.
pub fn checkpoint_budget(alpha: f64, n_min: u64, n_max: u64) -> u64 {
    if n_max <= n_min {
        return 1;
    }
    let ratio = (n_max as f64 / n_min as f64).ln() / (1.0 + alpha / 2.0).ln();
    ratio.ceil() as u64 + 1
}

/// `ceil(ln(|X| / beta) / (12 alpha_star eps_star))`.
pub fn first_checkpoint(cardinality: u64, beta: f64, alpha_star: f64, eps_star: f64) -> u64 {
    ((cardinality as f64 / beta).ln() / (12.0 * alpha_star * eps_star)).ceil() as u64
}

/// Integer checkpoint positions, at most `k_max` of them and none beyond `n_max`.
pub fn checkpoint_schedule(alpha: f64, n_min: u64, n_max: u64, k_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cp = n_min as f64;
    while (out.len() as u64) < k_max {
        let s = cp.ceil() as u64;
        if s > n_max {
            break;
        }
        out.push(s);
        while cp.ceil() as u64 <= s {
            cp *= 1.0 + alpha / 2.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observation {
    /// No checkpoint reached yet.
    Pending,
    /// The previous release, unchanged.
    Held(Element),
    /// A release made at this position.
    Fresh(Element),
}

impl Observation {
    pub fn value(self) -> Option<Element> {
        match self {
            Observation::Pending => None,
            Observation::Held(x) | Observation::Fresh(x) => Some(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Continual {
    params: ContinualParams,
    universe: Universe,
    gk: GkSummary,
    alpha_star: f64,
    eps_star: f64,
    n_min: u64,
    k_max: u64,
    cp: f64,
    s: u64,
    releases: u64,
    current: Option<Element>,
}

impl Continual {
    pub fn new(params: ContinualParams, universe: Universe) -> Result<Self> {
        let ContinualParams {
            alpha,
            eps,
            q,
            beta,
            n_max,
            ..
        } = params;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        PrivacyParams::new(eps, beta, 1.0)?;
        TargetQuantile::new(q, 1)?;
        let alpha_star = alpha / 2.0;
        // releases need n > 1/alpha_star for the sensitivity bound
        let floor_n = (1.0 / alpha_star).floor() as u64 + 1;
        let n_min = match params.n_min_override {
            Some(n) => n.max(floor_n),
            None => {
                // n_min depends on eps / k_max and k_max on n_min: take the
                // smallest k whose induced n_min needs at most k releases
                let l = universe.cardinality();
                let n_of = |k: u64| first_checkpoint(l, beta, alpha_star, eps / k as f64).max(floor_n);
                let mut k = 1u64;
                loop {
                    let n = n_of(k);
                    if n > n_max {
                        return Err(Error::InsufficientHorizon { n_min: n, n_max });
                    }
                    if checkpoint_budget(alpha, n, n_max) <= k {
                        break n;
                    }
                    k += 1;
                }
            }
        };
        if n_min > n_max {
            return Err(Error::InsufficientHorizon { n_min, n_max });
        }
        let k_max = checkpoint_budget(alpha, n_min, n_max);
        Ok(Self {
            params,
            universe,
            gk: GkSummary::new(alpha_star)?,
            alpha_star,
            eps_star: eps / k_max as f64,
            n_min,
            k_max,
            cp: n_min as f64,
            s: 0,
            releases: 0,
            current: None,
        })
    }

    pub fn params(&self) -> &ContinualParams {
        &self.params
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn eps_star(&self) -> f64 {
        self.eps_star
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    pub fn k_max(&self) -> u64 {
        self.k_max
    }

    pub fn seen(&self) -> u64 {
        self.s
    }

    pub fn releases(&self) -> u64 {
        self.releases
    }

    pub fn current(&self) -> Option<Element> {
        self.current
    }

    pub fn summary(&self) -> &GkSummary {
        &self.gk
    }

    pub fn schedule(&self) -> Vec<u64> {
        checkpoint_schedule(self.params.alpha, self.n_min, self.params.n_max, self.k_max)
    }

    pub fn observe(&mut self, x: Element, rng: &mut RandomSource) -> Result<Observation> {
        self.gk.push(x);
        self.s += 1;
        if self.releases < self.k_max && self.s == self.cp.ceil() as u64 {
            // tuples inserted since the last compress can exceed the g + delta
            // bound, so the release reads a freshly compressed copy
            let mut snapshot = self.gk.clone();
            snapshot.compress();
            let sensitivity = gk_sensitivity(self.alpha_star, self.s)?;
            let privacy = PrivacyParams::new(self.eps_star, self.params.beta, sensitivity)?;
            let target = TargetQuantile::new(self.params.q, self.s)?;
            let cfg = MechanismConfig::new(privacy, target, self.params.divisor)?;
            let aug = AugmentedSummary::new(&snapshot);
            let v = dp_quantile_gk(&aug, &self.universe, &cfg, rng)?;
            self.current = Some(v);
            self.releases += 1;
            while self.cp.ceil() as u64 <= self.s {
                self.cp *= 1.0 + self.params.alpha / 2.0;
            }
            return Ok(Observation::Fresh(v));
        }
        Ok(match self.current {
            None => Observation::Pending,
            Some(v) => Observation::Held(v),
        })
    }
}
