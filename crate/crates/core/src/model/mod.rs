//! Native model families and the evaluation/differentiation surface the
//! attribution methods work against.
//!
//! Models are immutable after construction; every operation here is a pure
//! function of (model, input) and safe to call concurrently.

mod linear;
mod net;
mod tree;

pub use linear::LinearModel;
pub use net::{Layer, SequentialNet};
pub use tree::{Aggregation, DecisionTree, TreeEnsemble, TreeNode};

use crate::error::{Error, Result};
use crate::tensor::{argmax, Tensor};

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-class scores plus the argmax class (ties go to the lowest index).
/// Scores are post-softmax probabilities when the model ends in a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub scores: Vec<f64>,
    pub predicted_class: usize,
}

#[derive(Debug, Clone)]
pub enum Model {
    Linear(LinearModel),
    Tree(TreeEnsemble),
    Sequential(SequentialNet),
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Tree(_) => "tree-ensemble",
            Model::Sequential(_) => "sequential-net",
        }
    }

    /// Expected input shape: `[n_features]` for tabular families, CHW (or
    /// whatever the net declares) for sequential nets.
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Model::Linear(m) => vec![m.n_features()],
            Model::Tree(m) => vec![m.n_features()],
            Model::Sequential(m) => m.input_shape().to_vec(),
        }
    }

    /// Total number of scalar inputs.
    pub fn n_inputs(&self) -> usize {
        self.input_shape().iter().product()
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_classes(),
            Model::Tree(m) => m.n_classes(),
            Model::Sequential(m) => m.n_classes(),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Model::Tree(_))
    }

    pub fn has_softmax(&self) -> bool {
        match self {
            Model::Linear(m) => m.has_softmax(),
            Model::Tree(_) => false,
            Model::Sequential(m) => m.has_softmax(),
        }
    }

    /// Drop the final softmax so all scores are raw logits. Tree ensembles
    /// are unchanged. This is the probability/logit switch exposed in run
    /// configs.
    pub fn strip_softmax(&mut self) {
        match self {
            Model::Linear(m) => m.strip_softmax(),
            Model::Tree(_) => {}
            Model::Sequential(m) => m.strip_softmax(),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = self.input_shape();
        if x.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                expected,
                got: x.shape().to_vec(),
            });
        }
        if !x.all_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Deterministic forward evaluation.
    pub fn predict(&self, x: &Tensor) -> Result<ModelOutput> {
        self.check_input(x)?;
        let scores = match self {
            Model::Linear(m) => m.scores(x.data()),
            Model::Tree(m) => m.scores(x.data()),
            Model::Sequential(m) => m.scores(x)?,
        };
        let predicted_class = argmax(&scores);
        Ok(ModelOutput {
            scores,
            predicted_class,
        })
    }

    /// Convenience for tabular callers.
    pub fn predict_slice(&self, x: &[f64]) -> Result<ModelOutput> {
        self.predict(&Tensor::from_slice(x))
    }

    /// `scores[class_idx]`; the scalar f(x) every metric formula consumes.
    pub fn target_score(&self, x: &Tensor, class_idx: usize) -> Result<f64> {
        if class_idx >= self.n_classes() {
            return Err(Error::ClassOutOfRange {
                class: class_idx,
                n_classes: self.n_classes(),
            });
        }
        Ok(self.predict(x)?.scores[class_idx])
    }

    pub fn target_score_slice(&self, x: &[f64], class_idx: usize) -> Result<f64> {
        self.target_score(&Tensor::from_slice(x), class_idx)
    }

    /// Reverse-mode gradient of `target_score` with respect to the input.
    pub fn input_gradient(&self, x: &Tensor, class_idx: usize) -> Result<Tensor> {
        if class_idx >= self.n_classes() {
            return Err(Error::ClassOutOfRange {
                class: class_idx,
                n_classes: self.n_classes(),
            });
        }
        self.check_input(x)?;
        match self {
            Model::Linear(m) => Ok(Tensor::from_slice(&m.gradient(x.data(), class_idx))),
            Model::Tree(_) => Err(Error::NotDifferentiable),
            Model::Sequential(m) => m.input_gradient(x, class_idx),
        }
    }

    /// Forward pass returning both the prediction and one conv layer's
    /// output feature maps.
    pub fn forward_with_activations(
        &self,
        x: &Tensor,
        layer_idx: usize,
    ) -> Result<(ModelOutput, Tensor)> {
        let net = self.as_sequential()?;
        if !net.is_conv_layer(layer_idx) {
            return Err(Error::LayerNotConvolutional { layer: layer_idx });
        }
        let trace = net.activations(x)?;
        let scores = trace.last().unwrap().data().to_vec();
        let predicted_class = argmax(&scores);
        Ok((
            ModelOutput {
                scores,
                predicted_class,
            },
            trace[layer_idx + 1].clone(),
        ))
    }

    /// Gradient of `target_score` with respect to a conv layer's output.
    pub fn activation_gradient(
        &self,
        x: &Tensor,
        layer_idx: usize,
        class_idx: usize,
    ) -> Result<Tensor> {
        let net = self.as_sequential()?;
        if !net.is_conv_layer(layer_idx) {
            return Err(Error::LayerNotConvolutional { layer: layer_idx });
        }
        net.gradient_at_layer(x, layer_idx, class_idx)
    }

    pub fn as_sequential(&self) -> Result<&SequentialNet> {
        match self {
            Model::Sequential(m) => Ok(m),
            _ => Err(Error::NotDifferentiable),
        }
    }
}
