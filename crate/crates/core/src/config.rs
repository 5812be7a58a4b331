//! Flat simulation config document (TOML). Angles are in degrees here and
//! converted to radians when the design is built.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, FadingModel};
use crate::constellation::{design_eep, design_uep, Criterion, DesignReport};
use crate::simkit::SimPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Rayleigh,
    Rician,
    GaussMarkov,
}

impl std::str::FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh" => Ok(ModelName::Rayleigh),
            "rician" => Ok(ModelName::Rician),
            "gauss_markov" | "gauss-markov" => Ok(ModelName::GaussMarkov),
            other => Err(Error::invalid(format!("unknown channel model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub criterion: Criterion,
    pub users: usize,
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets_deg: Option<Vec<f64>>,
    /// Per-user average channel power; all ones when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    pub model: ModelName,
    pub kappa: f64,
    pub rho: f64,
    pub antennas: usize,
    pub snr_db: f64,
    pub frame_len: usize,
    pub frames_per_trial: usize,
    pub max_trials: usize,
    pub min_errors: u64,
    pub batch_trials: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            criterion: Criterion::Eep,
            users: 2,
            order: 4,
            gammas: None,
            offsets_deg: None,
            gains: None,
            model: ModelName::Rayleigh,
            kappa: 0.0,
            rho: 1.0,
            antennas: 128,
            snr_db: 10.0,
            frame_len: 100,
            frames_per_trial: 1,
            max_trials: 1000,
            min_errors: 100,
            batch_trials: 16,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The resolved config on one line, for CSV provenance comments.
    pub fn summary(&self) -> String {
        let mut parts = vec![
            format!("criterion={}", self.criterion),
            format!("users={}", self.users),
            format!("order={}", self.order),
        ];
        if let Some(g) = &self.gammas {
            parts.push(format!("gammas={}", join(g)));
        }
        if let Some(o) = &self.offsets_deg {
            parts.push(format!("offsets_deg={}", join(o)));
        }
        parts.push(format!("gains={}", join(&self.resolved_gains())));
        parts.push(format!("model={}", self.model_name()));
        match self.model {
            ModelName::Rician => parts.push(format!("kappa={}", self.kappa)),
            ModelName::GaussMarkov => parts.push(format!("rho={}", self.rho)),
            ModelName::Rayleigh => {}
        }
        parts.extend([
            format!("antennas={}", self.antennas),
            format!("snr_db={}", self.snr_db),
            format!("frame_len={}", self.frame_len),
            format!("frames_per_trial={}", self.frames_per_trial),
            format!("max_trials={}", self.max_trials),
            format!("min_errors={}", self.min_errors),
            format!("batch_trials={}", self.batch_trials),
            format!("seed={}", self.seed),
        ]);
        parts.join(" ")
    }

    fn model_name(&self) -> &'static str {
        match self.model {
            ModelName::Rayleigh => "rayleigh",
            ModelName::Rician => "rician",
            ModelName::GaussMarkov => "gauss_markov",
        }
    }

    pub fn resolved_gains(&self) -> Vec<f64> {
        self.gains.clone().unwrap_or_else(|| vec![1.0; self.users])
    }

    pub fn design(&self) -> Result<DesignReport<f64>> {
        let constellations = match self.criterion {
            Criterion::Eep => {
                if self.gammas.is_some() || self.offsets_deg.is_some() {
                    return Err(Error::invalid("gammas/offsets only apply to the uep criterion"));
                }
                design_eep(self.users, self.order)?
            }
            Criterion::Uep => {
                let gammas = self.gammas.clone().unwrap_or_else(|| vec![1.0; self.users]);
                let offsets: Vec<f64> = self
                    .offsets_deg
                    .clone()
                    .unwrap_or_else(|| vec![0.0; self.users])
                    .iter()
                    .map(|d| d.to_radians())
                    .collect();
                design_uep(self.users, self.order, &gammas, &offsets)?
            }
        };
        DesignReport::new(constellations, &vec![1.0; self.users], self.criterion)
    }

    pub fn channel(&self) -> ChannelConfig<f64> {
        let model = match self.model {
            ModelName::Rayleigh => FadingModel::Rayleigh,
            ModelName::Rician => FadingModel::Rician { kappa: self.kappa },
            ModelName::GaussMarkov => FadingModel::GaussMarkov { rho: self.rho },
        };
        ChannelConfig::new(self.antennas, model, self.resolved_gains(), self.snr_db, self.seed)
    }

    pub fn sim_point(&self) -> Result<SimPoint<f64>> {
        let point = SimPoint {
            design: self.design()?,
            channel: self.channel(),
            frame_len: self.frame_len,
            frames_per_trial: self.frames_per_trial,
            max_trials: self.max_trials,
            min_errors: self.min_errors,
            batch_trials: self.batch_trials,
        };
        point.validate()?;
        Ok(point)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
