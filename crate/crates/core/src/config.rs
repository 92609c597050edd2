//! Run configuration shared by the service and the command line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{default_priors, FitConfig, GibbsPriors, PriorMode};
use crate::params::HvcmParams;
use crate::ppc::PpcConfig;

/// Everything that determines the output bodies of one run. Paths are not part
/// of it: moving the output elsewhere does not change the config hash.
/// Missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Interactions to simulate.
    pub n: usize,
    pub params: HvcmParams,
    pub preset: PriorMode,
    pub iterations: usize,
    pub burn_in: usize,
    pub z_mc_samples: usize,
    pub z_every: usize,
    pub replicates: usize,
    pub level: f64,
    pub thresholds: Vec<u64>,
    pub checkpoints: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        let ppc = PpcConfig::default();
        RunConfig {
            seed: None,
            n: 1000,
            params: HvcmParams::default(),
            preset: PriorMode::Conjugate,
            iterations: fit.iterations,
            burn_in: fit.burn_in,
            z_mc_samples: fit.z_mc_samples,
            z_every: fit.z_every,
            replicates: 100,
            level: ppc.level,
            thresholds: ppc.thresholds,
            checkpoints: 20,
        }
    }
}

impl RunConfig {
    /// Seed or an error; there is no clock-based fallback.
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (--seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.params.validate()?;
        self.fit_config()?.validate()?;
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "need at least 2 replicates, got {}",
                self.replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0, 1)", self.level)));
        }
        if self.thresholds.contains(&0) {
            return Err(Error::Config("degree thresholds must be positive".into()));
        }
        if self.checkpoints < 2 {
            return Err(Error::Config("need at least 2 growth checkpoints".into()));
        }
        Ok(())
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        Ok(FitConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed()?,
            z_mc_samples: self.z_mc_samples,
            z_every: self.z_every,
        })
    }

    pub fn priors(&self) -> GibbsPriors {
        default_priors(self.preset)
    }

    pub fn ppc_config(&self) -> PpcConfig {
        PpcConfig {
            level: self.level,
            thresholds: self.thresholds.clone(),
        }
    }

    pub fn hash(&self) -> String {
        crate::io::config_hash(self)
    }
}
