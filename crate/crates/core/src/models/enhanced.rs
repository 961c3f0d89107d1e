use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{Graph, NormAdj, PairKey};
use crate::ndmath::{Csr, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedRecord {
    pub key: PairKey,
    /// Raw preliminary message embedding, shared by both orientations.
    pub message: Vec<f32>,
    /// Epoch at which the pair joined the set.
    pub epoch: usize,
}

/// Edges carrying an LM-derived preliminary message, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnhancedEdgeSet {
    records: Vec<EnhancedRecord>,
    index: HashMap<PairKey, usize>,
    dim: Option<usize>,
}

impl EnhancedEdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.index.contains_key(&PairKey::new(a, b))
    }

    /// Record for the unordered pair; `(a, b)` and `(b, a)` resolve to the same
    /// entry.
    pub fn get(&self, a: usize, b: usize) -> Option<&EnhancedRecord> {
        self.index.get(&PairKey::new(a, b)).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[EnhancedRecord] {
        &self.records
    }

    /// Adds a pair. Re-inserting an existing pair is rejected so a pair is
    /// never enhanced twice.
    pub fn insert(&mut self, a: usize, b: usize, message: Vec<f32>, epoch: usize) -> Result<()> {
        let key = PairKey::new(a, b);
        if self.index.contains_key(&key) {
            return Err(Error::InvalidArgument(format!("pair ({}, {}) already enhanced", key.u, key.v)));
        }
        match self.dim {
            Some(d) if d != message.len() => {
                return Err(Error::DimensionMismatch { expected: d, actual: message.len() });
            }
            _ => self.dim = Some(message.len()),
        }
        self.index.insert(key, self.records.len());
        self.records.push(EnhancedRecord { key, message, epoch });
        Ok(())
    }

    /// Precomputes index lists for message passing over `graph`.
    pub fn plan(&self, graph: &Graph, adj: &NormAdj) -> Result<EnhancedPlan> {
        let e = self.records.len();
        let dim = self.dim.unwrap_or(0);
        let mut messages = Matrix::zeros(e, dim);
        let mut sources = Vec::with_capacity(2 * e);
        let mut targets = Vec::with_capacity(2 * e);
        let mut pair_index = Vec::with_capacity(2 * e);
        let mut weights = Vec::with_capacity(2 * e);
        let mut removed = Vec::with_capacity(e);
        for (p, r) in self.records.iter().enumerate() {
            let PairKey { u, v } = r.key;
            if u >= graph.n() || v >= graph.n() || !graph.has_edge(u, v) {
                return Err(Error::NotAnEdge(u, v));
            }
            for (dst, src) in messages.row_mut(p).iter_mut().zip(&r.message) {
                *dst = f64::from(*src);
            }
            for (s, t) in [(u, v), (v, u)] {
                sources.push(s);
                targets.push(t);
                pair_index.push(p);
                weights.push(adj.entry(s, t));
            }
            removed.push((u, v));
        }
        let residual = if e == 0 { Arc::clone(adj.csr()) } else { Arc::new(adj.without_pairs(&removed)) };
        Ok(EnhancedPlan { messages, sources, targets, pair_index, weights, residual })
    }
}

/// Orientation-expanded view of an [`EnhancedEdgeSet`] for one graph.
///
/// Orientation `r` carries a message from `sources[r]` to `targets[r]` using
/// message row `pair_index[r]`, weighted by `Â[sources[r], targets[r]]`.
/// `residual` is `Â` with all enhanced off-diagonal entries removed.
#[derive(Debug, Clone)]
pub struct EnhancedPlan {
    pub messages: Matrix,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub pair_index: Vec<usize>,
    pub weights: Vec<f64>,
    pub residual: Arc<Csr>,
}

impl EnhancedPlan {
    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Plan with no enhanced edges: plain propagation over `adj`.
    pub fn empty(adj: &NormAdj) -> Self {
        Self {
            messages: Matrix::zeros(0, 0),
            sources: Vec::new(),
            targets: Vec::new(),
            pair_index: Vec::new(),
            weights: Vec::new(),
            residual: Arc::clone(adj.csr()),
        }
    }
}
