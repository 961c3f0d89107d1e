//! MLP, GCN and LM-enhanced (LEMP) node classifiers and their training loop.

mod checkpoint;
mod enhanced;
mod forward;
mod params;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, FloatWidth};
pub use enhanced::{EnhancedEdgeSet, EnhancedPlan, EnhancedRecord};
pub use forward::{
    forward, gate, gcn_forward, lemp_aggregate, mlp_forward, synthesize_message, ForwardOptions, ParamVars,
};
pub use params::ModelParams;
pub use train::{argmax, evaluate, train, EpochMetrics, TrainInputs, TrainOutcome, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gcn,
    Lemp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gcn => "gcn",
            ModelKind::Lemp => "lemp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            "lemp" => Ok(ModelKind::Lemp),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => crate::ndmath::sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden: usize,
    /// Weight of the preliminary message in message synthesis.
    pub beta: f64,
    pub seed: u64,
    pub layers: usize,
    pub activation: Activation,
    /// Z-score hidden activations per column after the nonlinearity.
    pub standardize_hidden: bool,
    /// Stop training as soon as the query budget is used up instead of
    /// continuing until the patience limit.
    pub halt_on_budget_exhaustion: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            patience: 50,
            lr: 2e-2,
            weight_decay: 5e-4,
            dropout: 0.5,
            hidden: 128,
            beta: 0.5,
            seed: 0,
            layers: 2,
            activation: Activation::Relu,
            standardize_hidden: false,
            halt_on_budget_exhaustion: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.patience > self.max_epochs && self.max_epochs > 0 {
            return bad("patience exceeds max_epochs");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return bad("learning rate must be positive and weight decay non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden size must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.max_epochs, c.patience, c.hidden, c.layers), (500, 50, 128, 2));
        assert_eq!((c.lr, c.weight_decay, c.dropout, c.beta), (2e-2, 5e-4, 0.5, 0.5));
    }

    #[test]
    fn invalid_configs() {
        let c = TrainConfig { patience: 10, max_epochs: 5, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { beta: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
