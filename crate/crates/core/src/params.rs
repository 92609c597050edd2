//! Model parameters of the sequential process.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::SenderId;

/// Categorical distribution over sizes `1..=probs.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParams(
                "size distribution needs finite non-negative weights".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "size distribution sums to {total}, not 1"
            )));
        }
        Ok(Categorical { probs })
    }

    /// Point mass at `k` (k ≥ 1).
    pub fn degenerate(k: usize) -> Self {
        assert!(k >= 1, "sizes start at 1");
        let mut probs = vec![0.0; k];
        probs[k - 1] = 1.0;
        Categorical { probs }
    }

    /// Uniform over `1..=k`.
    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1, "sizes start at 1");
        Categorical {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Empirical distribution of the given sizes.
    pub fn empirical(sizes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut counts: Vec<f64> = Vec::new();
        let mut n = 0.0;
        for k in sizes {
            if k == 0 {
                return Err(Error::InvalidParams("size 0".into()));
            }
            if counts.len() < k {
                counts.resize(k, 0.0);
            }
            counts[k - 1] += 1.0;
            n += 1.0;
        }
        if n == 0.0 {
            return Err(Error::InsufficientData("no sizes".into()));
        }
        Ok(Categorical {
            probs: counts.into_iter().map(|c| c / n).collect(),
        })
    }

    /// Probability of size `k`.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn max_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        // Rounding slack: last size with positive mass.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) + 1
    }
}

/// Per-sender discount and concentration `(α_s, θ_s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub alpha: f64,
    pub theta: f64,
}

impl LocalParams {
    pub fn new(alpha: f64, theta: f64) -> Self {
        LocalParams { alpha, theta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "local parameters need 0 <= alpha <= 1 and theta > 0, got ({}, {})",
                self.alpha, self.theta
            )));
        }
        Ok(())
    }
}

/// Pitman-Yor style urn parameters `(discount, concentration)` admitting the
/// two regimes: `0 <= discount < 1, concentration > 0` (infinite population)
/// or `discount < 0, concentration = -K * discount` (population of `K`).
pub fn validate_urn(name: &str, discount: f64, concentration: f64) -> Result<()> {
    if !(discount.is_finite() && concentration.is_finite()) {
        return Err(Error::InvalidParams(format!("{name}: non-finite parameters")));
    }
    if (0.0..1.0).contains(&discount) {
        if concentration > -discount {
            return Ok(());
        }
    } else if discount < 0.0 {
        let k = -concentration / discount;
        if k >= 1.0 && (k - k.round()).abs() < 1e-9 {
            return Ok(());
        }
    }
    Err(Error::InvalidParams(format!(
        "{name}: ({discount}, {concentration}) is in neither parameter regime"
    )))
}

/// All parameters of the canonical sequential process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvcmParams {
    /// Sender urn discount α̃.
    pub sender_alpha: f64,
    /// Sender urn concentration θ̃.
    pub sender_theta: f64,
    /// Fixed sender frequencies over ids `0..len`. When set, senders are drawn
    /// i.i.d. from these weights instead of the sender urn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_weights: Option<Vec<f64>>,
    /// Global receiver discount α.
    pub global_alpha: f64,
    /// Global receiver concentration θ.
    pub global_theta: f64,
    /// Per-sender `(α_s, θ_s)`.
    #[serde(default)]
    pub local: BTreeMap<SenderId, LocalParams>,
    /// Parameters for senders missing from `local`.
    pub default_local: LocalParams,
    /// Latent attribution urn discount α̃_z.
    pub z_alpha: f64,
    /// Latent attribution urn concentration θ̃_z.
    pub z_theta: f64,
    /// ν: distribution of the number of senders per interaction.
    pub size_dist: Categorical,
    /// ν^(s): distribution of the number of receivers, per sender.
    #[serde(default)]
    pub local_size_dist: BTreeMap<SenderId, Categorical>,
    /// Receiver-count distribution for senders missing from `local_size_dist`.
    pub default_local_size: Categorical,
}

impl Default for HvcmParams {
    fn default() -> Self {
        HvcmParams {
            sender_alpha: 0.3,
            sender_theta: 5.0,
            sender_weights: None,
            global_alpha: 0.5,
            global_theta: 10.0,
            local: BTreeMap::new(),
            default_local: LocalParams::new(0.5, 2.0),
            z_alpha: 0.3,
            z_theta: 5.0,
            size_dist: Categorical::degenerate(1),
            local_size_dist: BTreeMap::new(),
            default_local_size: Categorical::degenerate(1),
        }
    }
}

impl HvcmParams {
    pub fn local_params(&self, s: SenderId) -> LocalParams {
        self.local.get(&s).copied().unwrap_or(self.default_local)
    }

    pub fn local_size(&self, s: SenderId) -> &Categorical {
        self.local_size_dist
            .get(&s)
            .unwrap_or(&self.default_local_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sender_weights.is_none() {
            validate_urn("sender urn", self.sender_alpha, self.sender_theta)?;
        }
        if let Some(w) = &self.sender_weights {
            let total: f64 = w.iter().sum();
            if w.is_empty() || w.iter().any(|x| x.is_nan() || *x < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(
                    "sender weights must be a probability vector".into(),
                ));
            }
        }
        validate_urn("global receiver urn", self.global_alpha, self.global_theta)?;
        validate_urn("attribution urn", self.z_alpha, self.z_theta)?;
        self.default_local.validate()?;
        for lp in self.local.values() {
            lp.validate()?;
        }
        Ok(())
    }
}
