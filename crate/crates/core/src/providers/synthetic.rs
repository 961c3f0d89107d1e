//! Offline stand-in for a language model, driven by node features.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PairKey;
use crate::ndmath::Matrix;
use crate::providers::{Completion, MessageProvider, TokenUsage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticMode {
    /// L2-normalised mean of the endpoint features plus seeded noise.
    Mean,
    /// Mean of the endpoint class prototypes. Needs labels.
    ClassInformative,
}

impl std::str::FromStr for SyntheticMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(SyntheticMode::Mean),
            "class-informative" | "class" => Ok(SyntheticMode::ClassInformative),
            other => Err(Error::InvalidArgument(format!("unknown synthetic mode '{other}'"))),
        }
    }
}

/// Per-pair seed, independent of query order.
fn pair_seed(seed: u64, key: PairKey) -> u64 {
    let mut z = seed ^ (key.u as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (key.v as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-class mean feature vector over the labelled nodes. Classes without
/// any labelled node get a zero row.
pub fn class_prototypes(features: &Matrix, labels: &[Option<usize>], classes: usize) -> Result<Matrix> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch { expected: features.rows(), actual: labels.len() });
    }
    let mut p = Matrix::zeros(classes, features.cols());
    let mut counts = vec![0usize; classes];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            if c >= classes {
                return Err(Error::LabelOutOfRange { node: i, label: c, classes });
            }
            counts[c] += 1;
            for (a, b) in p.row_mut(c).iter_mut().zip(features.row(i)) {
                *a += b;
            }
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            p.row_mut(c).iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    Ok(p)
}

/// Deterministic message embedding for `key`.
///
/// `prototypes` is required for [`SyntheticMode::ClassInformative`], together
/// with a label for both endpoints.
pub fn synthetic_embedding(
    key: PairKey,
    features: &Matrix,
    labels: Option<&[Option<usize>]>,
    prototypes: Option<&Matrix>,
    mode: SyntheticMode,
    noise: f64,
    seed: u64,
) -> Result<Vec<f32>> {
    let n = features.rows();
    for i in [key.u, key.v] {
        if i >= n {
            return Err(Error::NodeOutOfRange { index: i, n });
        }
    }
    let out: Vec<f64> = match mode {
        SyntheticMode::Mean => {
            let mut m: Vec<f64> = features.row(key.u).iter().zip(features.row(key.v)).map(|(a, b)| 0.5 * (a + b)).collect();
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                m.iter_mut().for_each(|v| *v /= norm);
            }
            if noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, key));
                let dist = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                m.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
            }
            m
        }
        SyntheticMode::ClassInformative => {
            let missing = || Error::InvalidArgument("class-informative mode needs labels for both endpoints".into());
            let labels = labels.ok_or_else(missing)?;
            let protos = prototypes.ok_or_else(missing)?;
            let cu = labels.get(key.u).copied().flatten().ok_or_else(missing)?;
            let cv = labels.get(key.v).copied().flatten().ok_or_else(missing)?;
            if cu >= protos.rows() || cv >= protos.rows() {
                return Err(Error::LabelOutOfRange { node: key.u, label: cu.max(cv), classes: protos.rows() });
            }
            protos.row(cu).iter().zip(protos.row(cv)).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    };
    Ok(out.into_iter().map(|v| v as f32).collect())
}

/// Rough token count: one token per four bytes, at least one.
pub fn approx_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4).max(1)
}

#[derive(Debug)]
pub struct SyntheticOracle {
    features: Arc<Matrix>,
    labels: Option<Vec<Option<usize>>>,
    prototypes: Option<Matrix>,
    pub mode: SyntheticMode,
    pub noise: f64,
    pub seed: u64,
    calls: AtomicUsize,
}

impl SyntheticOracle {
    pub fn new(features: Arc<Matrix>, mode: SyntheticMode, noise: f64, seed: u64) -> Result<Self> {
        if mode == SyntheticMode::ClassInformative {
            return Err(Error::InvalidArgument("class-informative mode needs labels; use with_labels".into()));
        }
        if !(noise >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise must be non-negative, got {noise}")));
        }
        Ok(Self { features, labels: None, prototypes: None, mode, noise, seed, calls: AtomicUsize::new(0) })
    }

    /// Oracle with access to node labels; prototypes are per-class means over
    /// the labelled nodes.
    pub fn with_labels(
        features: Arc<Matrix>,
        labels: Vec<Option<usize>>,
        classes: usize,
        mode: SyntheticMode,
        noise: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(noise >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise must be non-negative, got {noise}")));
        }
        let prototypes = class_prototypes(&features, &labels, classes)?;
        Ok(Self {
            features,
            labels: Some(labels),
            prototypes: Some(prototypes),
            mode,
            noise,
            seed,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Completed chat calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl MessageProvider for SyntheticOracle {
    fn model_id(&self) -> &str {
        match self.mode {
            SyntheticMode::Mean => "synthetic-mean",
            SyntheticMode::ClassInformative => "synthetic-class",
        }
    }

    fn analyze(&self, key: PairKey, prompt: &str) -> Result<Completion> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = format!(
            "The relational implications between [Node A] and [Node B] are as below. Node {} and node {} are linked.",
            key.u, key.v
        );
        let usage = TokenUsage { prompt_tokens: approx_tokens(prompt), completion_tokens: approx_tokens(&text) };
        Ok(Completion { text, usage })
    }

    fn embedding_dim(&self) -> Option<usize> {
        Some(self.features.cols())
    }

    fn embed(&self, key: PairKey, _text: &str) -> Result<Vec<f32>> {
        synthetic_embedding(
            key,
            &self.features,
            self.labels.as_deref(),
            self.prototypes.as_ref(),
            self.mode,
            self.noise,
            self.seed,
        )
    }
}
