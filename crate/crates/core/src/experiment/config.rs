use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TrainConfig;
use crate::mvrd::{HeuristicParams, Horizon};
use crate::providers::{HttpConfig, Prices, RateLimit, SyntheticMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub mode: SyntheticMode,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { mode: SyntheticMode::Mean, noise: 0.01, seed: 0 }
    }
}

/// Everything a run needs besides the dataset. Training fields sit at the top
/// level of the JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub gamma: f64,
    pub eta: f64,
    pub omega: f64,
    pub phi: f64,
    /// Z-score distances across candidates before scoring.
    pub standardize_distances: bool,
    pub horizon: Horizon,
    /// Epochs between selection rounds.
    pub interval: usize,
    /// Pairs selected per round.
    pub batch: usize,
    /// Total pairs that may be enhanced; `None` means every edge.
    pub budget: Option<usize>,
    /// Width of the reduced features feeding the parameter-free track.
    pub pca_dim: usize,
    /// Prompt template; defaults to the dataset's domain.
    pub template: Option<String>,
    /// Message embedding width when the provider cannot report it.
    pub message_dim: Option<usize>,
    pub probe_seeds: usize,
    pub synthetic: SyntheticConfig,
    pub http: HttpConfig,
    pub rate: RateLimit,
    pub prices: Prices,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            gamma: 1.0,
            eta: 0.8,
            omega: 0.5,
            phi: 0.5,
            standardize_distances: true,
            horizon: Horizon::Literal,
            interval: 10,
            batch: 50,
            budget: None,
            pca_dim: 128,
            template: None,
            message_dim: None,
            probe_seeds: 4,
            synthetic: SyntheticConfig::default(),
            http: HttpConfig::default(),
            rate: RateLimit::default(),
            prices: Prices::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn heuristic(&self) -> HeuristicParams {
        HeuristicParams { gamma: self.gamma, eta: self.eta, standardize: self.standardize_distances }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.heuristic().validate()?;
        self.rate.validate()?;
        if self.interval == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("interval and batch must be positive".into()));
        }
        if self.pca_dim == 0 || self.probe_seeds == 0 {
            return Err(Error::InvalidArgument("pca_dim and probe_seeds must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_json_with_partial_fields() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"hidden": 32, "eta": 0.5, "horizon": "round-based", "budget": 7}"#).unwrap();
        assert_eq!(cfg.train.hidden, 32);
        assert_eq!(cfg.train.lr, 2e-2);
        assert_eq!(cfg.eta, 0.5);
        assert_eq!(cfg.gamma, 1.0);
        assert_eq!(cfg.horizon, Horizon::RoundBased);
        assert_eq!(cfg.budget, Some(7));
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
