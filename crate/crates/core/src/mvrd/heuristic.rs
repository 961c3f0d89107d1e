use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormAdj;
use crate::models::Activation;
use crate::mvrd::cluster::{semi_cluster, ClusterState};
use crate::ndmath::{euclidean, sigmoid, standardize, Matrix};

/// Knobs of the reliable-difference heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicParams {
    pub gamma: f64,
    pub eta: f64,
    /// Z-score pair and center distances across the candidate set before
    /// they enter the sigmoids.
    pub standardize: bool,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self { gamma: 1.0, eta: 0.8, standardize: true }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Per-edge terms of one reliable-difference evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RdTerms {
    /// `||h_i - h_j||`.
    pub pair_distance: Vec<f64>,
    /// `||h_i - c_i|| + ||h_j - c_j||` under pseudo-labels.
    pub center_sum: Vec<f64>,
    /// Pair distance as fed to the sigmoid (standardized or raw).
    pub d_hat: Vec<f64>,
    /// Center sum as fed to the sigmoid (standardized or raw).
    pub s_hat: Vec<f64>,
    pub rd: Vec<f64>,
    pub cluster: ClusterState,
}

/// `sigmoid(gamma * d) / sigmoid(s)`.
pub fn rd_value(d: f64, s: f64, gamma: f64) -> f64 {
    sigmoid(gamma * d) / sigmoid(s)
}

/// Clusters `h` from the labelled nodes and computes the reliable difference
/// of every candidate edge.
pub fn reliable_difference(
    h: &Matrix,
    labelled: &[(usize, usize)],
    classes: usize,
    edges: &[(usize, usize)],
    params: &HeuristicParams,
) -> Result<RdTerms> {
    params.validate()?;
    if edges.is_empty() {
        return Err(Error::InvalidArgument("no candidate edges to score".into()));
    }
    let n = h.rows();
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::NodeOutOfRange { index: u.max(v), n });
        }
    }
    let cluster = semi_cluster(h, labelled, classes)?;
    let pair_distance: Vec<f64> = edges.iter().map(|&(u, v)| euclidean(h.row(u), h.row(v))).collect();
    let center_sum: Vec<f64> =
        edges.iter().map(|&(u, v)| cluster.center_distance[u] + cluster.center_distance[v]).collect();
    let (d_hat, s_hat) = if params.standardize {
        (standardize(&pair_distance), standardize(&center_sum))
    } else {
        (pair_distance.clone(), center_sum.clone())
    };
    let rd = d_hat.iter().zip(&s_hat).map(|(&d, &s)| rd_value(d, s, params.gamma)).collect();
    Ok(RdTerms { pair_distance, center_sum, d_hat, s_hat, rd, cluster })
}

/// Before/after-aggregation embeddings from the model's first layer:
/// `act(X W0 + b0)` and `act(Â (X W0 + b0))`.
pub fn embedding_pair_wb(
    w0: &Matrix,
    b0: &Matrix,
    adj: &NormAdj,
    x: &Matrix,
    activation: Activation,
) -> Result<(Matrix, Matrix)> {
    let mut z = x.matmul(w0)?;
    if b0.rows() != 1 || b0.cols() != z.cols() {
        return Err(Error::shape("embedding_pair_wb", format!("bias {:?} for width {}", b0.shape(), z.cols())));
    }
    for i in 0..z.rows() {
        for (v, b) in z.row_mut(i).iter_mut().zip(b0.row(0)) {
            *v += b;
        }
    }
    let after = adj.csr().matmul_dense(&z)?;
    Ok((z.map(|v| activation.apply(v)), after.map(|v| activation.apply(v))))
}

/// Parameter-free pair: `sigmoid(X_pca)` and `sigmoid(Â X_pca)`.
pub fn embedding_pair_wf(x_pca: &Matrix, adj: &NormAdj) -> Result<(Matrix, Matrix)> {
    let after = adj.csr().matmul_dense(x_pca)?;
    Ok((x_pca.map(sigmoid), after.map(sigmoid)))
}

/// `RD_before - RD_after`, elementwise.
pub fn vrd(before: &[f64], after: &[f64]) -> Result<Vec<f64>> {
    if before.len() != after.len() {
        return Err(Error::DimensionMismatch { expected: before.len(), actual: after.len() });
    }
    Ok(before.iter().zip(after).map(|(b, a)| b - a).collect())
}

/// `sigmoid(eta * d_after) * vrd * weight`, elementwise.
pub fn mvrd(vrd: &[f64], d_after: &[f64], weights: &[f64], eta: f64) -> Result<Vec<f64>> {
    if vrd.len() != d_after.len() {
        return Err(Error::DimensionMismatch { expected: vrd.len(), actual: d_after.len() });
    }
    if vrd.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: vrd.len(), actual: weights.len() });
    }
    Ok(vrd.iter().zip(d_after).zip(weights).map(|((r, &d), w)| sigmoid(eta * d) * r * w).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    /// Fixed reduced features, no learned parameters.
    Wf,
    /// First layer of the model being trained.
    Wb,
}

/// Every intermediate of one track, aligned with the candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackScores {
    pub track: Track,
    pub before: RdTerms,
    pub after: RdTerms,
    pub vrd: Vec<f64>,
    pub mvrd: Vec<f64>,
}

impl TrackScores {
    pub fn d_after_raw(&self) -> &[f64] {
        &self.after.pair_distance
    }
}

/// Scores one track given its before/after embeddings.
#[allow(clippy::too_many_arguments)]
pub fn score_track(
    track: Track,
    h_before: &Matrix,
    h_after: &Matrix,
    labelled: &[(usize, usize)],
    classes: usize,
    edges: &[(usize, usize)],
    adj: &NormAdj,
    params: &HeuristicParams,
) -> Result<TrackScores> {
    let before = reliable_difference(h_before, labelled, classes, edges, params)?;
    let after = reliable_difference(h_after, labelled, classes, edges, params)?;
    let v = vrd(&before.rd, &after.rd)?;
    let weights: Vec<f64> = edges.iter().map(|&(u, w)| adj.entry(u, w)).collect();
    let m = mvrd(&v, &after.d_hat, &weights, params.eta)?;
    Ok(TrackScores { track, before, after, vrd: v, mvrd: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn rd_examples() {
        assert!((rd_value(0.0, 0.0, 1.0) - 1.0).abs() < 1e-12);
        let expected = sigmoid(2.0) / 0.5;
        assert!((rd_value(1.0, 0.0, 2.0) - expected).abs() < 1e-12);
        assert!(rd_value(-40.0, 40.0, 1.0) < 1e-15);
    }

    #[test]
    fn vrd_and_mvrd_examples() {
        assert_eq!(vrd(&[1.2, 0.5], &[0.2, 0.7]).unwrap(), vec![1.2 - 0.2, 0.5 - 0.7]);
        let m = mvrd(&[1.0], &[0.0], &[0.25], 0.8).unwrap();
        assert!((m[0] - 0.125).abs() < 1e-12);
        assert!(vrd(&[1.0], &[]).is_err());
        assert!(mvrd(&[1.0], &[0.0], &[], 0.8).is_err());
    }

    #[test]
    fn constant_distances_standardize_to_zero() {
        // square with identical spacing: every pair distance is 1
        let h = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let t = reliable_difference(&h, &[(0, 0), (2, 1)], 2, &edges, &HeuristicParams::default()).unwrap();
        assert!(t.d_hat.iter().all(|&d| d == 0.0));
        assert_eq!(t.pair_distance, vec![1.0; 4]);
    }

    #[test]
    fn raw_path_keeps_distances() {
        let h = Matrix::from_rows(&[vec![0.0], vec![3.0]]).unwrap();
        let p = HeuristicParams { standardize: false, ..Default::default() };
        let t = reliable_difference(&h, &[(0, 0), (1, 1)], 2, &[(0, 1)], &p).unwrap();
        assert_eq!(t.d_hat, vec![3.0]);
        assert_eq!(t.s_hat, vec![0.0]);
        assert!((t.rd[0] - sigmoid(3.0) / 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = Matrix::zeros(2, 1);
        let p = HeuristicParams::default();
        assert!(reliable_difference(&h, &[(0, 0)], 1, &[], &p).is_err());
        assert!(reliable_difference(&h, &[(0, 0)], 1, &[(0, 5)], &p).is_err());
        let bad = HeuristicParams { gamma: 0.0, ..p };
        assert!(reliable_difference(&h, &[(0, 0)], 1, &[(0, 1)], &bad).is_err());
    }

    #[test]
    fn wf_pair_matches_manual() {
        let g = Graph::build(2, &[(0, 1)], vec![], vec![], None).unwrap();
        let adj = NormAdj::new(&g);
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let (b, a) = embedding_pair_wf(&x, &adj).unwrap();
        assert!((b[(0, 0)] - sigmoid(1.0)).abs() < 1e-12);
        // both entries of each row are 1/2, so the aggregate is zero
        assert!((a[(0, 0)] - 0.5).abs() < 1e-12);
    }
}
