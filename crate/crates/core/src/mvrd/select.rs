use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Heap entry ordered so that the *worst* candidate is the maximum.
#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    u: usize,
    v: usize,
    index: usize,
}

impl Entry {
    /// Best-first ranking: score descending, then `u`, then `v` ascending.
    fn rank(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.u.cmp(&other.u)).then(self.v.cmp(&other.v))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

/// Indices of the `k` best candidates, best first. Ties on score break
/// toward the smaller `(u, v)`. Pairs are compared in `(min, max)` order.
pub fn select_top_k(scores: &[f64], edges: &[(usize, usize)], k: usize) -> Result<Vec<usize>> {
    if scores.len() != edges.len() {
        return Err(Error::DimensionMismatch { expected: edges.len(), actual: scores.len() });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score of candidate {i} is NaN")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (index, (&score, &(a, b))) in scores.iter().zip(edges).enumerate() {
        let e = Entry { score, u: a.min(b), v: a.max(b), index };
        if heap.len() < k {
            heap.push(e);
        } else if let Some(worst) = heap.peek() {
            if e < *worst {
                heap.pop();
                heap.push(e);
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|e| e.index).collect())
}

/// Candidate edges not yet enhanced. Selected pairs leave the pool for good.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    edges: Vec<(usize, usize)>,
}

impl CandidatePool {
    pub fn new(edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self { edges: edges.into_iter().collect() }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Removes and returns the top `k` edges under `scores`, which must be
    /// aligned with [`CandidatePool::edges`].
    pub fn take_top_k(&mut self, scores: &[f64], k: usize) -> Result<Vec<(usize, usize)>> {
        let picked = select_top_k(scores, &self.edges, k)?;
        let chosen: Vec<(usize, usize)> = picked.iter().map(|&i| self.edges[i]).collect();
        let mut drop = vec![false; self.edges.len()];
        for &i in &picked {
            drop[i] = true;
        }
        let mut i = 0;
        self.edges.retain(|_| {
            let keep = !drop[i];
            i += 1;
            keep
        });
        Ok(chosen)
    }
}
