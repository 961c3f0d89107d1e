//! Undirected simple graphs, the self-looped symmetric normalisation used by
//! GCN-style propagation, and label homophily metrics.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmath::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Dataset(format!("unknown split `{other}`"))),
        }
    }
}

/// Unordered node pair stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub u: usize,
    pub v: usize,
}

impl PairKey {
    pub fn new(a: usize, b: usize) -> Self {
        Self { u: a.min(b), v: a.max(b) }
    }
}

impl From<(usize, usize)> for PairKey {
    fn from((a, b): (usize, usize)) -> Self {
        Self::new(a, b)
    }
}

/// Undirected simple graph over dense node indices `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
    neighbors: Vec<Vec<usize>>,
    labels: Vec<Option<usize>>,
    splits: Vec<Split>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from raw edges: self-loops are dropped and both
    /// orientations of a pair collapse into one `(min, max)` edge. Edges keep
    /// the order of first appearance.
    ///
    /// `labels` and `splits` may be empty (unlabelled graph, everything
    /// `Train`); otherwise they must have length `n`. `num_classes` defaults to
    /// `max label + 1`.
    pub fn build(
        n: usize,
        raw_edges: &[(usize, usize)],
        labels: Vec<Option<usize>>,
        splits: Vec<Split>,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        let labels = if labels.is_empty() { vec![None; n] } else { labels };
        let splits = if splits.is_empty() { vec![Split::Train; n] } else { splits };
        if labels.len() != n || splits.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} labels and {} splits for {n} nodes",
                labels.len(),
                splits.len()
            )));
        }
        let inferred = labels.iter().flatten().max().map_or(0, |&m| m + 1);
        let num_classes = num_classes.unwrap_or(inferred);
        for (node, l) in labels.iter().enumerate() {
            if let Some(label) = *l {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange { node, label, classes: num_classes });
                }
            }
        }

        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in raw_edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if edge_index.contains_key(&key) {
                continue;
            }
            edge_index.insert(key, edges.len());
            edges.push(key);
            neighbors[key.0].push(key.1);
            neighbors[key.1].push(key.0);
        }
        Ok(Self { n, edges, edge_index, neighbors, labels, splits, num_classes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(min, max)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_id(a, b).is_some()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Indices of nodes in `split`, ascending.
    pub fn split_nodes(&self, split: Split) -> Vec<usize> {
        (0..self.n).filter(|&i| self.splits[i] == split).collect()
    }

    /// Labels for every node, or the first unlabelled node as an error.
    pub fn require_labels(&self) -> Result<Vec<usize>> {
        self.labels.iter().enumerate().map(|(i, l)| l.ok_or(Error::MissingLabel(i))).collect()
    }

    /// Same graph with labels replaced (used for permutation checks).
    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<Self> {
        let mut g = self.clone();
        if labels.len() != self.n {
            return Err(Error::InvalidArgument("label vector length".into()));
        }
        for (node, l) in labels.iter().enumerate() {
            if let Some(label) = *l {
                if label >= self.num_classes {
                    return Err(Error::LabelOutOfRange { node, label, classes: self.num_classes });
                }
            }
        }
        g.labels = labels;
        Ok(g)
    }
}

/// Symmetric-normalised adjacency with self-loops,
/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃ = D + I`.
#[derive(Debug, Clone)]
pub struct NormAdj {
    csr: Arc<Csr>,
    /// `d_i + 1` per node.
    deg: Vec<f64>,
}

impl NormAdj {
    pub fn new(g: &Graph) -> Self {
        let deg: Vec<f64> = (0..g.n()).map(|i| (g.degree(i) + 1) as f64).collect();
        let mut triplets = Vec::with_capacity(g.n() + 2 * g.num_edges());
        for (i, d) in deg.iter().enumerate() {
            triplets.push((i, i, 1.0 / d));
        }
        for &(u, v) in g.edges() {
            let w = 1.0 / (deg[u] * deg[v]).sqrt();
            triplets.push((u, v, w));
            triplets.push((v, u, w));
        }
        let csr = Csr::from_triplets(g.n(), g.n(), triplets).expect("graph indices are in range");
        Self { csr: Arc::new(csr), deg }
    }

    pub fn n(&self) -> usize {
        self.csr.rows()
    }

    /// Stored value at `(i, j)`; zero for pairs that are neither an edge nor
    /// the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j).unwrap_or(0.0)
    }

    /// The value `1 / sqrt((d_i + 1)(d_j + 1))` this matrix stores for an edge.
    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        1.0 / (self.deg[i] * self.deg[j]).sqrt()
    }

    pub fn csr(&self) -> &Arc<Csr> {
        &self.csr
    }

    /// Copy with the off-diagonal entries of `removed` pairs (both
    /// orientations) dropped.
    pub fn without_pairs(&self, removed: &[(usize, usize)]) -> Csr {
        let drop: std::collections::HashSet<(usize, usize)> =
            removed.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        let mut triplets = Vec::with_capacity(self.csr.nnz());
        for i in 0..self.n() {
            for (j, v) in self.csr.row(i) {
                if i == j || !drop.contains(&(i, j)) {
                    triplets.push((i, j, v));
                }
            }
        }
        Csr::from_triplets(self.n(), self.n(), triplets).expect("subset of a valid matrix")
    }
}

/// Shorthand for [`NormAdj::new`].
pub fn norm_adjacency(g: &Graph) -> NormAdj {
    NormAdj::new(g)
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    let labels = g.require_labels()?;
    if g.num_edges() == 0 {
        return Ok(1.0);
    }
    let same = g.edges().iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// Mean over non-isolated nodes of the share of neighbours with the same
/// label. Degree-0 nodes are left out of the average.
pub fn node_homophily(g: &Graph) -> Result<f64> {
    let labels = g.require_labels()?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..g.n() {
        let nb = g.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let same = nb.iter().filter(|&&j| labels[j] == labels[i]).count();
        total += same as f64 / nb.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Ok(1.0);
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(n: usize, edges: &[(usize, usize)], labels: &[usize]) -> Graph {
        Graph::build(n, edges, labels.iter().map(|&l| Some(l)).collect(), vec![], None).unwrap()
    }

    #[test]
    fn dedup_and_self_loops() {
        let g = Graph::build(3, &[(0, 1), (1, 0), (2, 2)], vec![], vec![], None).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.degrees(), vec![1, 1, 0]);
        let empty = Graph::build(5, &[], vec![], vec![], None).unwrap();
        assert_eq!(empty.num_edges(), 0);
        assert!(empty.degrees().iter().all(|&d| d == 0));
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            Graph::build(2, &[(0, 2)], vec![], vec![], None),
            Err(Error::NodeOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            Graph::build(2, &[], vec![Some(0), Some(3)], vec![], Some(2)),
            Err(Error::LabelOutOfRange { node: 1, label: 3, classes: 2 })
        ));
    }

    #[test]
    fn single_edge_adjacency() {
        let g = Graph::build(2, &[(0, 1)], vec![], vec![], None).unwrap();
        let a = NormAdj::new(&g);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a.entry(i, j), 0.5);
            }
        }
    }

    #[test]
    fn isolated_node_has_unit_diagonal() {
        let g = Graph::build(3, &[(0, 1)], vec![], vec![], None).unwrap();
        let a = NormAdj::new(&g);
        assert_eq!(a.entry(2, 2), 1.0);
        assert_eq!(a.csr().row(2).count(), 1);
    }

    #[test]
    fn homophily_examples() {
        let tri = labelled(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        assert_eq!(edge_homophily(&tri).unwrap(), 1.0);
        assert_eq!(node_homophily(&tri).unwrap(), 1.0);

        let path = labelled(3, &[(0, 1), (1, 2)], &[0, 1, 0]);
        assert_eq!(edge_homophily(&path).unwrap(), 0.0);

        let cycle = labelled(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[0, 0, 1, 1]);
        assert_eq!(edge_homophily(&cycle).unwrap(), 0.5);

        let star = labelled(4, &[(0, 1), (0, 2), (0, 3)], &[0, 1, 1, 1]);
        assert_eq!(node_homophily(&star).unwrap(), 0.0);
    }

    #[test]
    fn missing_labels_rejected() {
        let g = Graph::build(2, &[(0, 1)], vec![Some(0), None], vec![], None).unwrap();
        assert!(matches!(edge_homophily(&g), Err(Error::MissingLabel(1))));
        assert!(matches!(node_homophily(&g), Err(Error::MissingLabel(1))));
    }

    #[test]
    fn isolated_nodes_excluded_from_node_homophily() {
        let g = labelled(4, &[(0, 1)], &[0, 0, 1, 0]);
        assert_eq!(node_homophily(&g).unwrap(), 1.0);
    }
}
