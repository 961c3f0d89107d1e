use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::DatasetBundle;
use crate::graph::{edge_homophily, node_homophily, NormAdj, Split};
use crate::models::{train, EnhancedEdgeSet, ModelKind, TrainConfig};

/// Accuracy gap, in fractional accuracy, that separates a clear verdict from
/// an ambiguous one (half an accuracy point).
pub const VERDICT_MARGIN: f64 = 0.005;

pub const PROBE_DEPTHS: [usize; 2] = [2, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Graph-aware probes lose to graph-agnostic ones.
    Malignant,
    Benign,
    Ambiguous,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Malignant => "malignant",
            Verdict::Benign => "benign",
            Verdict::Ambiguous => "ambiguous",
        })
    }
}

pub fn verdict(best_mlp: f64, best_gcn: f64) -> Verdict {
    let gap = best_gcn - best_mlp;
    if gap < -VERDICT_MARGIN {
        Verdict::Malignant
    } else if gap > VERDICT_MARGIN {
        Verdict::Benign
    } else {
        Verdict::Ambiguous
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub model: ModelKind,
    pub layers: usize,
    /// Test accuracy per seed.
    pub test_acc: Vec<f64>,
    pub mean_test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub best_mlp: f64,
    pub best_gcn: f64,
    pub verdict: Verdict,
    /// `None` when some node is unlabelled.
    pub edge_homophily: Option<f64>,
    pub node_homophily: Option<f64>,
}

/// Trains 2- and 4-layer MLP and GCN probes for `seeds` seeds each and
/// compares the best seed-averaged test accuracies.
///
/// Seeds are `base.seed, base.seed + 1, ...`; runs execute on parallel
/// threads and are individually deterministic.
pub fn probe(bundle: &DatasetBundle, base: &TrainConfig, seeds: usize) -> Result<ProbeReport> {
    let g = &bundle.graph;
    let labelled_in = |s: Split| g.split_nodes(s).into_iter().filter(|&i| g.label(i).is_some()).count();
    if labelled_in(Split::Train) < g.num_classes().max(1) || labelled_in(Split::Test) == 0 {
        return Err(Error::Dataset("probe needs labelled train nodes for every class and a labelled test split".into()));
    }
    if seeds == 0 {
        return Err(Error::InvalidArgument("probe needs at least one seed".into()));
    }
    let adj = NormAdj::new(g);
    let inputs = bundle.inputs(&adj);
    let empty = EnhancedEdgeSet::new();

    let jobs: Vec<(ModelKind, usize, u64)> = [ModelKind::Mlp, ModelKind::Gcn]
        .into_iter()
        .flat_map(|k| PROBE_DEPTHS.into_iter().flat_map(move |l| (0..seeds as u64).map(move |s| (k, l, s))))
        .collect();
    let results: Result<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(kind, layers, offset)| {
                let cfg = TrainConfig { layers, seed: base.seed.wrapping_add(offset), ..base.clone() };
                let empty = &empty;
                s.spawn(move || train(kind, inputs, empty, &cfg).map(|o| o.test_acc))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("probe worker panicked")).collect()
    });

    let results = results?;
    let mut rows = Vec::new();
    for (chunk, res) in jobs.chunks(seeds).zip(results.chunks(seeds)) {
        let test_acc = res.to_vec();
        let mean_test_acc = test_acc.iter().sum::<f64>() / test_acc.len() as f64;
        rows.push(ProbeRow { model: chunk[0].0, layers: chunk[0].1, test_acc, mean_test_acc });
    }
    let best = |k: ModelKind| {
        rows.iter().filter(|r| r.model == k).map(|r| r.mean_test_acc).fold(f64::NEG_INFINITY, f64::max)
    };
    let (best_mlp, best_gcn) = (best(ModelKind::Mlp), best(ModelKind::Gcn));
    Ok(ProbeReport {
        verdict: verdict(best_mlp, best_gcn),
        best_mlp,
        best_gcn,
        rows,
        edge_homophily: edge_homophily(g).ok(),
        node_homophily: node_homophily(g).ok(),
    })
}
