use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::NormAdj;
use crate::models::{Activation, EnhancedPlan, ModelKind, ModelParams};
use crate::ndmath::{dot, sigmoid, Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub activation: Activation,
    /// Dropout between layers; `0.0` disables it (evaluation).
    pub dropout: f64,
    pub standardize_hidden: bool,
}

impl ForwardOptions {
    pub fn eval(activation: Activation) -> Self {
        Self { activation, dropout: 0.0, standardize_hidden: false }
    }
}

/// Tape handles for every tensor of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub kind: ModelKind,
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
    pub gates: Vec<Var>,
    pub projections: Vec<Var>,
    pub beta: f64,
}

impl ParamVars {
    pub fn register(tape: &mut Tape, params: &ModelParams, requires_grad: bool) -> Self {
        let mut leaf = |m: &Matrix| tape.leaf(m.clone(), requires_grad);
        Self {
            kind: params.kind,
            weights: params.weights.iter().map(&mut leaf).collect(),
            biases: params.biases.iter().map(&mut leaf).collect(),
            gates: params.gates.iter().map(&mut leaf).collect(),
            projections: params.projections.iter().map(&mut leaf).collect(),
            beta: params.beta,
        }
    }

    /// Handles in the same order as [`ModelParams::tensors`].
    pub fn all(&self) -> Vec<Var> {
        self.weights.iter().chain(&self.biases).chain(&self.gates).chain(&self.projections).copied().collect()
    }
}

/// Records a full forward pass and returns the logits node.
///
/// Every layer computes `z = h W + b`; GCN propagates `Â z`, LEMP replaces
/// the contribution of enhanced edges by synthesised messages, MLP uses `z`
/// as is. Hidden layers apply the activation (then optional column
/// standardisation, then dropout); the last layer returns raw logits.
pub fn forward(
    tape: &mut Tape,
    pv: &ParamVars,
    plan: &EnhancedPlan,
    x: Var,
    opts: &ForwardOptions,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Var> {
    let layers = pv.weights.len();
    let n = tape.value(x).rows();
    if pv.kind != ModelKind::Mlp && plan.residual.rows() != n {
        return Err(Error::shape("forward", format!("adjacency has {} rows, features {n}", plan.residual.rows())));
    }
    if pv.kind == ModelKind::Gcn && !plan.is_empty() {
        return Err(Error::InvalidArgument("GCN forward with enhanced edges".into()));
    }
    if pv.kind == ModelKind::Lemp && !plan.is_empty() && pv.projections.is_empty() {
        return Err(Error::InvalidArgument("LEMP forward without gate parameters".into()));
    }
    let mut h = x;
    for l in 0..layers {
        let z = tape.matmul(h, pv.weights[l])?;
        let z = tape.add_bias(z, pv.biases[l])?;
        let pre = match pv.kind {
            ModelKind::Mlp => z,
            ModelKind::Gcn => tape.spmm(plan.residual.clone(), z)?,
            ModelKind::Lemp => {
                let q = if plan.is_empty() {
                    None
                } else {
                    let msgs = tape.constant(plan.messages.clone());
                    Some(tape.matmul(msgs, pv.projections[l])?)
                };
                let gate = pv.gates.get(l).copied();
                lemp_aggregate(tape, z, q, gate, plan, pv.beta)?
            }
        };
        if l + 1 == layers {
            return Ok(pre);
        }
        h = match opts.activation {
            Activation::Relu => tape.relu(pre)?,
            Activation::Sigmoid => tape.sigmoid(pre)?,
        };
        if opts.standardize_hidden {
            h = tape.column_standardize(h, 1e-5)?;
        }
        if opts.dropout > 0.0 {
            let r = rng.as_deref_mut().ok_or_else(|| Error::InvalidArgument("dropout needs an rng".into()))?;
            h = tape.dropout(h, opts.dropout, r)?;
        }
    }
    Ok(h)
}

/// LM-enhanced aggregation of transformed node states `z` (pre-activation).
///
/// For every enhanced orientation `i -> j` the message is
/// `m = β q + (1 - β) [α ⊙ z_i + (1 - α) ⊙ z_j]` with
/// `α = sigmoid([z_i ‖ q ‖ z_j] W_gate)`, and node `j` receives
/// `Â_jj z_j + Σ_i Â_ij m_ij`. Non-enhanced edges pass `z_i` unchanged, so an
/// empty plan is exactly `Â z`.
pub fn lemp_aggregate(
    tape: &mut Tape,
    z: Var,
    projected: Option<Var>,
    gate: Option<Var>,
    plan: &EnhancedPlan,
    beta: f64,
) -> Result<Var> {
    let base = tape.spmm(plan.residual.clone(), z)?;
    if plan.is_empty() {
        return Ok(base);
    }
    let (q, gate) = match (projected, gate) {
        (Some(q), Some(g)) => (q, g),
        _ => return Err(Error::InvalidArgument("enhanced plan without messages or gate".into())),
    };
    let n = tape.value(z).rows();
    let zi = tape.gather(z, plan.sources.clone())?;
    let zj = tape.gather(z, plan.targets.clone())?;
    let zm = tape.gather(q, plan.pair_index.clone())?;
    let cat = tape.concat(&[zi, zm, zj])?;
    let pre = tape.matmul(cat, gate)?;
    let alpha = tape.sigmoid(pre)?;
    let from_src = tape.mul(alpha, zi)?;
    let keep = tape.affine(alpha, -1.0, 1.0)?;
    let from_dst = tape.mul(keep, zj)?;
    let mix = tape.add(from_src, from_dst)?;
    let msg_part = tape.affine(zm, beta, 0.0)?;
    let mix_part = tape.affine(mix, 1.0 - beta, 0.0)?;
    let messages = tape.add(msg_part, mix_part)?;
    let incoming = tape.scatter_add(messages, plan.targets.clone(), Some(plan.weights.clone()), n)?;
    tape.add(base, incoming)
}

fn eval_logits(params: &ModelParams, plan: &EnhancedPlan, x: &Matrix, activation: Activation) -> Result<Matrix> {
    params.validate()?;
    if x.cols() != params.in_dim() {
        return Err(Error::shape("forward", format!("features have {} columns, model expects {}", x.cols(), params.in_dim())));
    }
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false);
    let xv = tape.constant(x.clone());
    let out = forward(&mut tape, &pv, plan, xv, &ForwardOptions::eval(activation), None)?;
    Ok(tape.value(out).clone())
}

/// Evaluation-mode MLP logits.
pub fn mlp_forward(params: &ModelParams, x: &Matrix, activation: Activation) -> Result<Matrix> {
    if params.kind != ModelKind::Mlp {
        return Err(Error::InvalidArgument(format!("mlp_forward on {} parameters", params.kind)));
    }
    let dummy = EnhancedPlan {
        messages: Matrix::zeros(0, 0),
        sources: vec![],
        targets: vec![],
        pair_index: vec![],
        weights: vec![],
        residual: std::sync::Arc::new(crate::ndmath::Csr::from_triplets(0, 0, vec![])?),
    };
    eval_logits(params, &dummy, x, activation)
}

/// Evaluation-mode GCN logits.
pub fn gcn_forward(params: &ModelParams, adj: &NormAdj, x: &Matrix, activation: Activation) -> Result<Matrix> {
    if params.kind != ModelKind::Gcn {
        return Err(Error::InvalidArgument(format!("gcn_forward on {} parameters", params.kind)));
    }
    eval_logits(params, &EnhancedPlan::empty(adj), x, activation)
}

/// Gate vector `sigmoid([h_i ‖ h_msg ‖ h_j] W_gate)`.
pub fn gate(h_i: &[f64], h_msg: &[f64], h_j: &[f64], w_gate: &Matrix) -> Result<Vec<f64>> {
    let d = h_i.len();
    if h_msg.len() != d || h_j.len() != d || w_gate.rows() != 3 * d {
        return Err(Error::shape(
            "gate",
            format!("operands {}/{}/{} with gate {:?}", d, h_msg.len(), h_j.len(), w_gate.shape()),
        ));
    }
    let cat: Vec<f64> = h_i.iter().chain(h_msg).chain(h_j).copied().collect();
    let wt = w_gate.transpose();
    Ok((0..w_gate.cols()).map(|c| sigmoid(dot(&cat, wt.row(c)))).collect())
}

/// `β h_msg + (1 - β) [α ⊙ h_i + (1 - α) ⊙ h_j]`.
pub fn synthesize_message(h_i: &[f64], h_msg: &[f64], h_j: &[f64], alpha: &[f64], beta: f64) -> Result<Vec<f64>> {
    let d = h_i.len();
    if h_msg.len() != d || h_j.len() != d || alpha.len() != d {
        return Err(Error::shape("synthesize_message", "operand lengths differ"));
    }
    Ok((0..d).map(|k| beta * h_msg[k] + (1.0 - beta) * (alpha[k] * h_i[k] + (1.0 - alpha[k]) * h_j[k])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gate_is_one_half() {
        let w = Matrix::zeros(6, 2);
        assert_eq!(gate(&[1.0, -2.0], &[0.3, 0.3], &[5.0, 1.0], &w).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn gate_saturates() {
        let w = Matrix::filled(3, 1, 1.0);
        let mut last = 0.0;
        for scale in [1.0, 10.0, 100.0, 1000.0] {
            let a = gate(&[0.2], &[0.1], &[0.3], &w.scale(scale)).unwrap()[0];
            assert!(a >= last);
            last = a;
        }
        assert!(last > 1.0 - 1e-12);
    }

    #[test]
    fn gate_matches_concat_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = Matrix::uniform(12, 4, -1.0, 1.0, &mut rng);
        let hs: Vec<Matrix> = (0..3).map(|_| Matrix::uniform(1, 4, -1.0, 1.0, &mut rng)).collect();
        let got = gate(hs[0].row(0), hs[1].row(0), hs[2].row(0), &w).unwrap();
        let mut cat = Vec::new();
        for h in &hs {
            cat.extend_from_slice(h.row(0));
        }
        for c in 0..4 {
            let mut s = 0.0;
            for (r, v) in cat.iter().enumerate() {
                s += v * w[(r, c)];
            }
            let want = 1.0 / (1.0 + (-s).exp());
            assert!((got[c] - want).abs() <= 1e-12);
        }
        assert!(gate(&[1.0], &[1.0, 2.0], &[1.0], &w).is_err());
    }

    #[test]
    fn synthesis_examples() {
        let m = synthesize_message(&[1.0, 2.0], &[7.0, -7.0], &[3.0, 4.0], &[0.9, 0.1], 1.0).unwrap();
        assert_eq!(m, vec![7.0, -7.0]);
        let h = [0.4, -1.2, 3.0];
        let msg = [1.0, 1.0, 1.0];
        let m = synthesize_message(&h, &msg, &h, &[0.5; 3], 0.5).unwrap();
        for k in 0..3 {
            assert_eq!(m[k], 0.5 * msg[k] + 0.5 * h[k]);
        }
    }

    #[test]
    fn synthesis_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<Matrix> = (0..4).map(|_| Matrix::uniform(1, 5, -2.0, 2.0, &mut rng)).collect();
        let alpha: Vec<f64> = v[3].row(0).iter().map(|&x| sigmoid(x)).collect();
        let beta = 0.37;
        let m = synthesize_message(v[0].row(0), v[1].row(0), v[2].row(0), &alpha, beta).unwrap();
        for k in 0..5 {
            let want = beta * v[1][(0, k)] + (1.0 - beta) * (alpha[k] * v[0][(0, k)] + (1.0 - alpha[k]) * v[2][(0, k)]);
            assert_eq!(m[k], want);
        }
    }
}
