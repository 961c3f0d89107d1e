use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NormAdj, Split};
use crate::models::{forward, EnhancedEdgeSet, EnhancedPlan, ForwardOptions, ModelKind, ModelParams, ParamVars, TrainConfig};
use crate::ndmath::{Matrix, Tape};

// Separate streams so parameter init and dropout never share draws.
const INIT_STREAM: u64 = 0x1a2b_3c4d;
const DROPOUT_STREAM: u64 = 0x5e6f_7081;

/// Read-only training inputs.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub graph: &'a Graph,
    pub adj: &'a NormAdj,
    pub features: &'a Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub enhanced_edges: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: ModelParams,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Matrix> = params.tensors().iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    /// One AdamW step with decoupled weight decay.
    fn step(&mut self, params: &mut ModelParams, grads: &[Option<Matrix>], lr: f64, weight_decay: f64) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        for (k, p) in params.tensors_mut().into_iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            let g = grads[k].as_ref();
            let pv = p.as_mut_slice();
            for i in 0..pv.len() {
                let gi = g.map_or(0.0, |g| g.as_slice()[i]);
                let mi = &mut m.as_mut_slice()[i];
                let vi = &mut v.as_mut_slice()[i];
                *mi = Self::BETA1 * *mi + (1.0 - Self::BETA1) * gi;
                *vi = Self::BETA2 * *vi + (1.0 - Self::BETA2) * gi * gi;
                let update = (*mi / bc1) / ((*vi / bc2).sqrt() + Self::EPS);
                pv[i] -= lr * (update + weight_decay * pv[i]);
            }
        }
    }
}

/// Epoch-at-a-time trainer with best-validation checkpointing.
///
/// The caller may grow the [`EnhancedEdgeSet`] between epochs; training
/// continues from the current parameters.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams,
    adam: Adam,
    dropout_rng: ChaCha8Rng,
    epoch: usize,
    history: Vec<EpochMetrics>,
    best: ModelParams,
    best_epoch: usize,
    best_val_acc: f64,
    best_enhanced: usize,
    train_nodes: Vec<usize>,
    train_labels: Vec<usize>,
    val_nodes: Vec<usize>,
    val_labels: Vec<usize>,
    plan: Option<(usize, EnhancedPlan)>,
}

impl Trainer {
    /// `msg_dim` is the raw message-embedding width (ignored unless LEMP).
    pub fn new(kind: ModelKind, inputs: TrainInputs<'_>, config: &TrainConfig, msg_dim: usize) -> Result<Self> {
        config.validate()?;
        let g = inputs.graph;
        if inputs.features.rows() != g.n() {
            return Err(Error::shape("train", format!("{} feature rows for {} nodes", inputs.features.rows(), g.n())));
        }
        let (train_nodes, train_labels) = labelled(g, Split::Train);
        if train_nodes.is_empty() {
            return Err(Error::EmptyTrainSplit);
        }
        let (val_nodes, val_labels) = labelled(g, Split::Val);
        let classes = g.num_classes().max(1);
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed ^ INIT_STREAM);
        let params = ModelParams::init(
            kind,
            inputs.features.cols(),
            config.hidden,
            classes,
            config.layers,
            msg_dim,
            config.beta,
            &mut init_rng,
        );
        Ok(Self {
            config: config.clone(),
            adam: Adam::new(&params),
            best: params.clone(),
            params,
            dropout_rng: ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM),
            epoch: 0,
            history: Vec::new(),
            best_epoch: 0,
            best_val_acc: f64::NEG_INFINITY,
            best_enhanced: 0,
            train_nodes,
            train_labels,
            val_nodes,
            val_labels,
            plan: None,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn best_params(&self) -> &ModelParams {
        &self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// True once `max_epochs` is reached or validation accuracy has not
    /// improved for `patience` epochs.
    pub fn should_stop(&self) -> bool {
        self.epoch >= self.config.max_epochs || self.epoch - self.best_epoch >= self.config.patience
    }

    fn plan_for(&mut self, inputs: TrainInputs<'_>, enhanced: &EnhancedEdgeSet) -> Result<EnhancedPlan> {
        if self.params.kind != ModelKind::Lemp {
            if !enhanced.is_empty() {
                return Err(Error::InvalidArgument(format!("{} model cannot use enhanced edges", self.params.kind)));
            }
            return Ok(EnhancedPlan::empty(inputs.adj));
        }
        if let Some(d) = enhanced.dim() {
            if d != self.params.msg_dim() {
                return Err(Error::DimensionMismatch { expected: self.params.msg_dim(), actual: d });
            }
        }
        match &self.plan {
            Some((len, plan)) if *len == enhanced.len() => Ok(plan.clone()),
            _ => {
                let plan = enhanced.plan(inputs.graph, inputs.adj)?;
                self.plan = Some((enhanced.len(), plan.clone()));
                Ok(plan)
            }
        }
    }

    /// Runs one optimisation epoch, then evaluates train/val metrics with the
    /// updated parameters.
    pub fn step(&mut self, inputs: TrainInputs<'_>, enhanced: &EnhancedEdgeSet) -> Result<&EpochMetrics> {
        let plan = self.plan_for(inputs, enhanced)?;
        let opts = ForwardOptions {
            activation: self.config.activation,
            dropout: self.config.dropout,
            standardize_hidden: self.config.standardize_hidden,
        };

        let mut tape = Tape::new();
        let pv = ParamVars::register(&mut tape, &self.params, true);
        let x = tape.constant(inputs.features.clone());
        let logits = forward(&mut tape, &pv, &plan, x, &opts, Some(&mut self.dropout_rng))?;
        let loss = tape.softmax_cross_entropy(logits, &self.train_nodes, &self.train_labels)?;
        let train_loss = tape.value(loss)[(0, 0)];
        tape.backward(loss)?;
        let grads: Vec<Option<Matrix>> = pv.all().into_iter().map(|v| tape.grad(v).cloned()).collect();
        drop(tape);
        self.adam.step(&mut self.params, &grads, self.config.lr, self.config.weight_decay);
        self.epoch += 1;

        let eval = self.eval_logits(&plan, inputs.features)?;
        let train_acc = accuracy(&eval, &self.train_nodes, &self.train_labels);
        let (val_loss, val_acc) = if self.val_nodes.is_empty() {
            (f64::NAN, train_acc)
        } else {
            (mean_cross_entropy(&eval, &self.val_nodes, &self.val_labels), accuracy(&eval, &self.val_nodes, &self.val_labels))
        };
        if val_acc > self.best_val_acc {
            self.best_val_acc = val_acc;
            self.best_epoch = self.epoch;
            self.best = self.params.clone();
            self.best_enhanced = enhanced.len();
        }
        self.history.push(EpochMetrics {
            epoch: self.epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            enhanced_edges: enhanced.len(),
        });
        Ok(self.history.last().expect("just pushed"))
    }

    fn eval_logits(&self, plan: &EnhancedPlan, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let pv = ParamVars::register(&mut tape, &self.params, false);
        let xv = tape.constant(x.clone());
        let opts = ForwardOptions {
            activation: self.config.activation,
            dropout: 0.0,
            standardize_hidden: self.config.standardize_hidden,
        };
        let out = forward(&mut tape, &pv, plan, xv, &opts, None)?;
        Ok(tape.value(out).clone())
    }

    /// Evaluates the test split once with the best checkpoint, using the
    /// enhanced edges that were present when that checkpoint was taken.
    pub fn finish(self, inputs: TrainInputs<'_>, enhanced: &EnhancedEdgeSet) -> Result<TrainOutcome> {
        let mut prefix = EnhancedEdgeSet::new();
        for r in enhanced.records().iter().take(self.best_enhanced) {
            prefix.insert(r.key.u, r.key.v, r.message.clone(), r.epoch)?;
        }
        let test_acc = evaluate_with(
            &self.best,
            inputs,
            &prefix,
            Split::Test,
            &ForwardOptions {
                activation: self.config.activation,
                dropout: 0.0,
                standardize_hidden: self.config.standardize_hidden,
            },
        )?;
        Ok(TrainOutcome {
            best_val_acc: if self.best_val_acc.is_finite() { self.best_val_acc } else { 0.0 },
            best_epoch: self.best_epoch,
            best_params: self.best,
            test_acc,
            history: self.history,
        })
    }
}

/// Trains until early stopping with a fixed enhanced-edge set.
pub fn train(
    kind: ModelKind,
    inputs: TrainInputs<'_>,
    enhanced: &EnhancedEdgeSet,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let msg_dim = enhanced.dim().unwrap_or(0);
    let mut trainer = Trainer::new(kind, inputs, config, msg_dim)?;
    while !trainer.should_stop() {
        trainer.step(inputs, enhanced)?;
    }
    trainer.finish(inputs, enhanced)
}

/// Accuracy of evaluation-mode predictions on `split` (ties go to the lowest
/// class index). Returns 0 for an empty split.
pub fn evaluate(
    params: &ModelParams,
    inputs: TrainInputs<'_>,
    enhanced: &EnhancedEdgeSet,
    split: Split,
    config: &TrainConfig,
) -> Result<f64> {
    let opts = ForwardOptions {
        activation: config.activation,
        dropout: 0.0,
        standardize_hidden: config.standardize_hidden,
    };
    evaluate_with(params, inputs, enhanced, split, &opts)
}

fn evaluate_with(
    params: &ModelParams,
    inputs: TrainInputs<'_>,
    enhanced: &EnhancedEdgeSet,
    split: Split,
    opts: &ForwardOptions,
) -> Result<f64> {
    let plan = if params.kind == ModelKind::Lemp { enhanced.plan(inputs.graph, inputs.adj)? } else { EnhancedPlan::empty(inputs.adj) };
    params.validate()?;
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false);
    let xv = tape.constant(inputs.features.clone());
    let out = forward(&mut tape, &pv, &plan, xv, opts, None)?;
    let logits = tape.value(out);
    let (nodes, labels) = labelled(inputs.graph, split);
    Ok(accuracy(logits, &nodes, &labels))
}

fn labelled(g: &Graph, split: Split) -> (Vec<usize>, Vec<usize>) {
    g.split_nodes(split).into_iter().filter_map(|i| g.label(i).map(|l| (i, l))).unzip()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn accuracy(logits: &Matrix, nodes: &[usize], labels: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().zip(labels).filter(|&(&i, &y)| argmax(logits.row(i)) == y).count();
    hits as f64 / nodes.len() as f64
}

fn mean_cross_entropy(logits: &Matrix, nodes: &[usize], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (&i, &y) in nodes.iter().zip(labels) {
        let z = logits.row(i);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    total / nodes.len() as f64
}
