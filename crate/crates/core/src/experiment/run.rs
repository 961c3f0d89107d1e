use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::report::{BudgetSummary, RoundLog, RunReport, SelectedEdge, SweepRow, Timings};
use crate::experiment::{DatasetBundle, ExperimentConfig};
use crate::graph::{edge_homophily, node_homophily, NormAdj};
use crate::models::{EnhancedEdgeSet, ModelKind, Trainer};
use crate::mvrd::{lambda_schedule, select_top_k, CandidatePool, MvrdScorer, MvrdScores};
use crate::ndmath::pca_fit_transform;
use crate::providers::{
    query_connection_analysis, BudgetLedger, HttpProvider, MessageProvider, PairCache, PromptTemplate, RateLimiter,
    SyntheticMode, SyntheticOracle,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Synthetic,
    Http,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(ProviderKind::Synthetic),
            "http" => Ok(ProviderKind::Http),
            other => Err(Error::InvalidArgument(format!("unknown provider '{other}'"))),
        }
    }
}

/// Builds the configured provider. The class-informative synthetic mode reads
/// the bundle's labels.
pub fn build_provider(
    kind: ProviderKind,
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn MessageProvider>> {
    Ok(match kind {
        ProviderKind::Synthetic => {
            let s = &cfg.synthetic;
            let feats = Arc::new(bundle.features.clone());
            Box::new(match s.mode {
                SyntheticMode::Mean => SyntheticOracle::new(feats, s.mode, s.noise, s.seed)?,
                SyntheticMode::ClassInformative => SyntheticOracle::with_labels(
                    feats,
                    bundle.graph.labels().to_vec(),
                    bundle.graph.num_classes(),
                    s.mode,
                    s.noise,
                    s.seed,
                )?,
            })
        }
        ProviderKind::Http => Box::new(HttpProvider::new(cfg.http.clone())?),
    })
}

fn resolve_message_dim(cfg: &ExperimentConfig, provider: &dyn MessageProvider, cache: &PairCache) -> Result<usize> {
    cfg.message_dim.or_else(|| provider.embedding_dim()).or_else(|| cache.dim()).ok_or_else(|| {
        Error::InvalidArgument("message embedding width unknown; set message_dim in the config".into())
    })
}

fn resolve_template<'a>(cfg: &'a ExperimentConfig, bundle: &'a DatasetBundle) -> Result<&'static PromptTemplate> {
    PromptTemplate::by_id(cfg.template.as_deref().unwrap_or(&bundle.domain))
}

fn homophily(bundle: &DatasetBundle) -> (Option<f64>, Option<f64>) {
    (edge_homophily(&bundle.graph).ok(), node_homophily(&bundle.graph).ok())
}

fn selected_edges(bundle: &DatasetBundle, scores: &MvrdScores, picked: &[usize]) -> Vec<SelectedEdge> {
    picked
        .iter()
        .map(|&i| {
            let (u, v) = scores.edges[i];
            let g = &bundle.graph;
            SelectedEdge {
                u,
                v,
                score_wf: scores.wf.mvrd[i],
                score_wb: scores.wb.mvrd[i],
                fused: scores.fused[i],
                cross_class: g.label(u).zip(g.label(v)).map(|(a, b)| a != b),
            }
        })
        .collect()
}

/// Plain MLP or GCN training, reported in the same shape as a LEMP run.
pub fn run_plain(bundle: &DatasetBundle, kind: ModelKind, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    if kind == ModelKind::Lemp {
        return Err(Error::InvalidArgument("use run_lemp for the enhanced model".into()));
    }
    let start = Instant::now();
    let adj = NormAdj::new(&bundle.graph);
    let inputs = bundle.inputs(&adj);
    let empty = EnhancedEdgeSet::new();
    let out = crate::models::train(kind, inputs, &empty, &cfg.train)?;
    let (eh, nh) = homophily(bundle);
    let secs = start.elapsed().as_secs_f64();
    Ok(RunReport {
        model: kind,
        seed: cfg.train.seed,
        nodes: bundle.graph.n(),
        edges: bundle.graph.num_edges(),
        classes: bundle.graph.num_classes(),
        epochs: out.history,
        best_epoch: out.best_epoch,
        best_val_acc: out.best_val_acc,
        test_acc: out.test_acc,
        rounds: Vec::new(),
        budget: BudgetSummary::default(),
        edge_homophily: eh,
        node_homophily: nh,
        probe: None,
        halted_on_budget: false,
        timings: Timings { total_secs: secs, training_secs: secs, ..Timings::default() },
    })
}

/// Per-run mutable state shared by the scoring rounds.
struct Selector {
    scorer: MvrdScorer,
    horizon: f64,
    labelled: Vec<(usize, usize)>,
}

impl Selector {
    fn new(bundle: &DatasetBundle, adj: &NormAdj, cfg: &ExperimentConfig, budget: usize) -> Result<Self> {
        let out_dim = cfg.pca_dim.min(bundle.features.cols());
        let x_pca = pca_fit_transform(&bundle.features, out_dim)?;
        let scorer = MvrdScorer::new(&x_pca, adj, cfg.heuristic(), cfg.train.activation)?;
        let horizon = cfg.horizon.epochs(budget, cfg.interval, cfg.batch)?;
        Ok(Self { scorer, horizon, labelled: bundle.train_labelled() })
    }

    fn score(
        &self,
        bundle: &DatasetBundle,
        adj: &NormAdj,
        cfg: &ExperimentConfig,
        trainer: &Trainer,
        candidates: &[(usize, usize)],
    ) -> Result<MvrdScores> {
        let lambda = lambda_schedule(trainer.epoch(), self.horizon, cfg.omega, cfg.phi)?;
        self.scorer.score(
            candidates,
            trainer.params(),
            &bundle.features,
            adj,
            &self.labelled,
            bundle.graph.num_classes(),
            lambda,
        )
    }
}

fn budget_of(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> usize {
    cfg.budget.unwrap_or(bundle.graph.num_edges())
}

/// The full active loop: train, and every `interval` epochs while budget
/// remains, score all unenhanced edges, pick the top `batch`, fetch their
/// messages and add them to the enhanced set.
///
/// With `halt_on_budget_exhaustion`, training stops at the first scheduled
/// round after the budget (or the edge pool) has run out.
pub fn run_lemp(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    provider: &dyn MessageProvider,
    cache: &mut PairCache,
    limiter: &RateLimiter,
) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timings = Timings::default();
    let g = &bundle.graph;
    let adj = NormAdj::new(g);
    let inputs = bundle.inputs(&adj);
    let budget = budget_of(cfg, bundle);
    let msg_dim = resolve_message_dim(cfg, provider, cache)?;
    let template = resolve_template(cfg, bundle)?;
    let texts = bundle.node_texts();

    let mut trainer = Trainer::new(ModelKind::Lemp, inputs, &cfg.train, msg_dim)?;
    let selector = if budget > 0 && g.num_edges() > 0 { Some(Selector::new(bundle, &adj, cfg, budget)?) } else { None };
    let mut pool = CandidatePool::new(g.edges().iter().copied());
    let mut ledger = BudgetLedger::new(budget, cfg.prices);
    let mut enhanced = EnhancedEdgeSet::new();
    let mut rounds: Vec<RoundLog> = Vec::new();
    let mut selected_total = 0usize;
    let mut provider_calls = 0usize;
    let mut halted = false;

    while !trainer.should_stop() {
        let t = Instant::now();
        trainer.step(inputs, &enhanced)?;
        timings.training_secs += t.elapsed().as_secs_f64();
        let epoch = trainer.epoch();
        let Some(selector) = &selector else { continue };
        if epoch % cfg.interval != 0 {
            continue;
        }
        let remaining = budget - selected_total;
        if remaining == 0 || pool.is_empty() {
            if cfg.train.halt_on_budget_exhaustion && !rounds.is_empty() {
                halted = true;
                break;
            }
            continue;
        }

        let t = Instant::now();
        let scores = selector.score(bundle, &adj, cfg, &trainer, pool.edges())?;
        let k = cfg.batch.min(remaining);
        let picked = select_top_k(&scores.fused, &scores.edges, k)?;
        let selected = selected_edges(bundle, &scores, &picked);
        let chosen = pool.take_top_k(&scores.fused, k)?;
        debug_assert_eq!(chosen, selected.iter().map(|e| (e.u, e.v)).collect::<Vec<_>>());
        timings.scoring_secs += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let out = query_connection_analysis(&chosen, &texts, template, provider, cache, &mut ledger, limiter)?;
        timings.query_secs += t.elapsed().as_secs_f64();
        for (&(u, v), msg) in chosen.iter().zip(out.messages) {
            enhanced.insert(u, v, msg.embedding, epoch)?;
        }
        selected_total += chosen.len();
        provider_calls += out.provider_calls;
        log::info!(
            "epoch {epoch}: enhanced {} pairs (lambda {:.3}), {} total",
            chosen.len(),
            scores.lambda,
            enhanced.len()
        );
        rounds.push(RoundLog {
            round: rounds.len(),
            epoch,
            lambda: scores.lambda,
            candidates: scores.edges.len(),
            selected,
            provider_calls: out.provider_calls,
            paid_pairs: out.paid_pairs,
            empty_cluster_classes: merged_empty(&scores),
        });
    }

    let outcome = trainer.finish(inputs, &enhanced)?;
    let usage = ledger.usage();
    let (eh, nh) = homophily(bundle);
    timings.total_secs = start.elapsed().as_secs_f64();
    Ok(RunReport {
        model: ModelKind::Lemp,
        seed: cfg.train.seed,
        nodes: g.n(),
        edges: g.num_edges(),
        classes: g.num_classes(),
        epochs: outcome.history,
        best_epoch: outcome.best_epoch,
        best_val_acc: outcome.best_val_acc,
        test_acc: outcome.test_acc,
        rounds,
        budget: BudgetSummary {
            budget,
            selected: selected_total,
            paid: ledger.used,
            provider_calls,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            cost_usd: ledger.cost(),
        },
        edge_homophily: eh,
        node_homophily: nh,
        probe: None,
        halted_on_budget: halted,
        timings,
    })
}

fn merged_empty(scores: &MvrdScores) -> Vec<usize> {
    let mut v: Vec<usize> = [&scores.wf.before, &scores.wf.after, &scores.wb.before, &scores.wb.after]
        .iter()
        .flat_map(|t| t.cluster.empty_classes.iter().copied())
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Ranks every edge as the first selection round of [`run_lemp`] would:
/// trains the enhanced model with no messages for `interval` epochs, then
/// scores all edges. Returns the schedule weight and the top `k` edges.
pub fn rank_edges(bundle: &DatasetBundle, cfg: &ExperimentConfig, k: usize) -> Result<(f64, Vec<SelectedEdge>)> {
    cfg.validate()?;
    let g = &bundle.graph;
    if g.num_edges() == 0 {
        return Err(Error::InvalidArgument("graph has no edges to rank".into()));
    }
    let adj = NormAdj::new(g);
    let inputs = bundle.inputs(&adj);
    let budget = budget_of(cfg, bundle).max(1);
    let msg_dim = cfg.message_dim.unwrap_or(bundle.features.cols());
    let mut trainer = Trainer::new(ModelKind::Lemp, inputs, &cfg.train, msg_dim)?;
    let empty = EnhancedEdgeSet::new();
    for _ in 0..cfg.interval {
        trainer.step(inputs, &empty)?;
    }
    let selector = Selector::new(bundle, &adj, cfg, budget)?;
    let scores = selector.score(bundle, &adj, cfg, &trainer, g.edges())?;
    let picked = select_top_k(&scores.fused, &scores.edges, k)?;
    Ok((scores.lambda, selected_edges(bundle, &scores, &picked)))
}

/// Runs [`run_lemp`] once per budget, each with a fresh in-memory cache so
/// costs are comparable.
pub fn budget_sweep(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    budgets: &[usize],
    provider: &dyn MessageProvider,
    limiter: &RateLimiter,
) -> Result<Vec<SweepRow>> {
    budgets
        .iter()
        .map(|&b| {
            let c = ExperimentConfig { budget: Some(b), ..cfg.clone() };
            let mut cache = PairCache::in_memory();
            let r = run_lemp(bundle, &c, provider, &mut cache, limiter)?;
            Ok(SweepRow {
                budget: b,
                selected: r.budget.selected,
                test_acc: r.test_acc,
                best_val_acc: r.best_val_acc,
                cost_usd: r.budget.cost_usd,
            })
        })
        .collect()
}
