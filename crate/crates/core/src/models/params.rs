use rand::Rng;

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::ndmath::Matrix;

/// Trainable parameters of a stacked classifier.
///
/// Layer `l` maps `dims[l] -> dims[l + 1]`. LEMP models additionally carry a
/// gate matrix (`3 d x d`) and a message projection (`msg_dim x d`) per layer,
/// where `d = dims[l + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
    pub gates: Vec<Matrix>,
    pub projections: Vec<Matrix>,
    pub beta: f64,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases. Gates and projections are drawn
    /// after every layer weight, so MLP/GCN/LEMP models built from the same
    /// seed share their layer weights.
    pub fn init<R: Rng + ?Sized>(
        kind: ModelKind,
        in_dim: usize,
        hidden: usize,
        classes: usize,
        layers: usize,
        msg_dim: usize,
        beta: f64,
        rng: &mut R,
    ) -> Self {
        let dims = layer_dims(in_dim, hidden, classes, layers);
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for w in dims.windows(2) {
            weights.push(Matrix::glorot(w[0], w[1], rng));
            biases.push(Matrix::zeros(1, w[1]));
        }
        let (mut gates, mut projections) = (Vec::new(), Vec::new());
        if kind == ModelKind::Lemp {
            for &d in &dims[1..] {
                gates.push(Matrix::glorot(3 * d, d, rng));
            }
            for &d in &dims[1..] {
                projections.push(Matrix::glorot(msg_dim, d, rng));
            }
        }
        Self { kind, weights, biases, gates, projections, beta }
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Matrix::rows)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.last().map_or(0, Matrix::cols)
    }

    /// Raw message dimension expected by the projections (0 for non-LEMP).
    pub fn msg_dim(&self) -> usize {
        self.projections.first().map_or(0, Matrix::rows)
    }

    /// All matrices in a fixed order: weights, biases, gates, projections.
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.weights.iter().chain(&self.biases).chain(&self.gates).chain(&self.projections).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .chain(self.gates.iter_mut())
            .chain(self.projections.iter_mut())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.weights.len();
        if l == 0 || self.biases.len() != l {
            return Err(Error::InvalidArgument("layer count mismatch".into()));
        }
        for i in 0..l {
            let w = &self.weights[i];
            if i > 0 && self.weights[i - 1].cols() != w.rows() {
                return Err(Error::shape("model_params", format!("layer {i} input {} vs {}", w.rows(), self.weights[i - 1].cols())));
            }
            if self.biases[i].shape() != (1, w.cols()) {
                return Err(Error::shape("model_params", format!("bias {i} shape {:?}", self.biases[i].shape())));
            }
        }
        if self.kind == ModelKind::Lemp {
            if self.gates.len() != l || self.projections.len() != l {
                return Err(Error::InvalidArgument("LEMP needs one gate and projection per layer".into()));
            }
            let msg = self.msg_dim();
            for i in 0..l {
                let d = self.weights[i].cols();
                if self.gates[i].shape() != (3 * d, d) || self.projections[i].shape() != (msg, d) {
                    return Err(Error::shape("model_params", format!("LEMP layer {i} gate/projection shapes")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!("beta {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }
}

pub(crate) fn layer_dims(in_dim: usize, hidden: usize, classes: usize, layers: usize) -> Vec<usize> {
    let mut dims = vec![in_dim];
    dims.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
    dims.push(classes);
    dims
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_shared_prefix() {
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let gcn = ModelParams::init(ModelKind::Gcn, 10, 8, 3, 2, 0, 0.5, &mut r1);
        let lemp = ModelParams::init(ModelKind::Lemp, 10, 8, 3, 2, 6, 0.5, &mut r2);
        gcn.validate().unwrap();
        lemp.validate().unwrap();
        assert_eq!(gcn.weights, lemp.weights);
        assert_eq!(lemp.gates[0].shape(), (24, 8));
        assert_eq!(lemp.gates[1].shape(), (9, 3));
        assert_eq!(lemp.projections[1].shape(), (6, 3));
        let bound = (6.0f64 / 18.0).sqrt();
        assert!(gcn.weights[0].as_slice().iter().all(|v| v.abs() <= bound));
        assert!(gcn.biases.iter().all(|b| b.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn four_layer_dims() {
        assert_eq!(layer_dims(5, 4, 2, 4), vec![5, 4, 4, 4, 2]);
        assert_eq!(layer_dims(5, 4, 2, 1), vec![5, 2]);
    }
}
