//! Run configuration read from and written to TOML.

use crate::error::{Error, Result};
use crate::gibbs::SamplerSettings;
use crate::panel::{PanelData, StandardizeMode};
use crate::priors::{default_priors, Dependence, ModelSpec, PriorBundle, PriorTuning};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorPreset {
    #[default]
    MonteCarlo,
    Adjusted,
}

/// Prior tuning: a preset plus optional overrides. `v_star` is computed
/// from the estimation sample unless given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub preset: PriorPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_sigma_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_sigma_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_star: Option<f64>,
}

impl PriorConfig {
    pub fn tuning(&self, data_v_star: f64) -> PriorTuning {
        let v = self.v_star.unwrap_or(data_v_star);
        let base = match self.preset {
            PriorPreset::MonteCarlo => PriorTuning::monte_carlo(v),
            PriorPreset::Adjusted => PriorTuning::adjusted(v),
        };
        PriorTuning {
            tau_theta: self.tau_theta.unwrap_or(base.tau_theta),
            tau_phi: self.tau_phi.unwrap_or(base.tau_phi),
            tau_sigma_lambda: self.tau_sigma_lambda.unwrap_or(base.tau_sigma_lambda),
            tau_sigma_y: self.tau_sigma_y.unwrap_or(base.tau_sigma_y),
            tau_v: self.tau_v.unwrap_or(base.tau_v),
            v_star: v,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub standardize: StandardizeMode,
    /// Trailing periods held out of estimation for evaluation.
    pub holdout: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::named("flexible-het", Dependence::Cre, 0).expect("known name"),
            prior: PriorConfig::default(),
            sampler: SamplerSettings::default(),
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        if self.sampler.seed > i64::MAX as u64 {
            return Err(Error::Config("seeds above 2^63 - 1 cannot be stored in TOML".into()));
        }
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sampler.validate()?;
        let t = self.prior.tuning(1.0);
        t.validate()
    }

    /// Split off the holdout, standardise regressors and fill in the
    /// regressor count. Returns the estimation panel.
    pub fn prepare_data(&mut self, raw: &PanelData) -> Result<PanelData> {
        let mut data = if self.data.holdout > 0 && raw.n_holdout == 0 {
            raw.split_holdout(self.data.holdout)?
        } else {
            raw.clone()
        };
        data.standardize(self.data.standardize);
        self.model.n_x = data.n_x;
        Ok(data)
    }

    /// Prior bundle for `data`; records the resolved `v_star` in the config
    /// so a saved copy reproduces the run.
    pub fn priors(&mut self, data: &PanelData) -> Result<PriorBundle> {
        let tuning = self.prior.tuning(data.v_star());
        self.prior.v_star = Some(tuning.v_star);
        default_priors(&self.model, &tuning)
    }
}
