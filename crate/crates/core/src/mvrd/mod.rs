//! Edge scoring for message enhancement: reliable difference before and
//! after aggregation, its variation, and fused top-k selection.

pub mod cluster;
pub mod heuristic;
pub mod schedule;
pub mod select;

pub use cluster::{semi_cluster, ClusterState};
pub use heuristic::{
    embedding_pair_wb, embedding_pair_wf, mvrd, rd_value, reliable_difference, score_track, vrd, HeuristicParams,
    RdTerms, Track, TrackScores,
};
pub use schedule::{fuse_scores, lambda_schedule, Horizon};
pub use select::{select_top_k, CandidatePool};

use crate::error::{Error, Result};
use crate::graph::NormAdj;
use crate::models::{Activation, ModelParams};
use crate::ndmath::Matrix;

/// Both tracks plus the fused score, aligned with `edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvrdScores {
    pub edges: Vec<(usize, usize)>,
    pub wf: TrackScores,
    pub wb: TrackScores,
    pub lambda: f64,
    pub fused: Vec<f64>,
}

/// Caches the parameter-free track embeddings, which do not change during
/// training.
#[derive(Debug, Clone)]
pub struct MvrdScorer {
    wf_before: Matrix,
    wf_after: Matrix,
    pub params: HeuristicParams,
    pub activation: Activation,
}

impl MvrdScorer {
    /// `x_pca` is the reduced feature matrix for the parameter-free track.
    pub fn new(x_pca: &Matrix, adj: &NormAdj, params: HeuristicParams, activation: Activation) -> Result<Self> {
        params.validate()?;
        let (wf_before, wf_after) = embedding_pair_wf(x_pca, adj)?;
        Ok(Self { wf_before, wf_after, params, activation })
    }

    /// Scores every candidate with both tracks and fuses them with `lambda`.
    #[allow(clippy::too_many_arguments)]
    pub fn score(
        &self,
        edges: &[(usize, usize)],
        model: &ModelParams,
        x: &Matrix,
        adj: &NormAdj,
        labelled: &[(usize, usize)],
        classes: usize,
        lambda: f64,
    ) -> Result<MvrdScores> {
        let (w0, b0) = match (model.weights.first(), model.biases.first()) {
            (Some(w), Some(b)) => (w, b),
            _ => return Err(Error::InvalidArgument("model has no layers".into())),
        };
        let (wb_before, wb_after) = embedding_pair_wb(w0, b0, adj, x, self.activation)?;
        let p = &self.params;
        let wf = score_track(Track::Wf, &self.wf_before, &self.wf_after, labelled, classes, edges, adj, p)?;
        let wb = score_track(Track::Wb, &wb_before, &wb_after, labelled, classes, edges, adj, p)?;
        let fused = fuse_scores(&wf.mvrd, &wb.mvrd, lambda)?;
        Ok(MvrdScores { edges: edges.to_vec(), wf, wb, lambda, fused })
    }
}
