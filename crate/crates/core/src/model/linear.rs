//! Affine models: regression (single output) and softmax classifiers.

use crate::error::{Error, Result};

/// Per-class affine map, optionally followed by a softmax.
///
/// `weights[c]` holds the coefficient vector for class `c`. A model with a
/// single class and no softmax is a plain regressor.
#[derive(Debug, Clone)]
pub struct LinearModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    n_features: usize,
    softmax: bool,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, softmax: bool) -> Result<Self> {
        if weights.is_empty() || weights.len() != bias.len() {
            return Err(Error::schema(
                "weights",
                "need one weight vector and one bias per class",
            ));
        }
        let n_features = weights[0].len();
        if n_features == 0 {
            return Err(Error::schema("weights[0]", "empty weight vector"));
        }
        for (c, row) in weights.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::schema(
                    format!("weights[{c}]"),
                    format!("expected {} coefficients, got {}", n_features, row.len()),
                ));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::schema(format!("weights[{c}]"), "non-finite value"));
            }
        }
        if !bias.iter().all(|v| v.is_finite()) {
            return Err(Error::schema("bias", "non-finite value"));
        }
        if softmax && weights.len() < 2 {
            return Err(Error::schema("softmax", "softmax needs at least 2 classes"));
        }
        Ok(Self {
            n_features,
            weights,
            bias,
            softmax,
        })
    }

    pub fn regression(weights: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(vec![weights], vec![bias], false)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn has_softmax(&self) -> bool {
        self.softmax
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn strip_softmax(&mut self) {
        self.softmax = false;
    }

    /// Raw affine scores, one per class.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.logits(x);
        if self.softmax {
            crate::model::softmax(&z)
        } else {
            z
        }
    }

    /// Gradient of scores[class] with respect to x.
    pub fn gradient(&self, x: &[f64], class: usize) -> Vec<f64> {
        if !self.softmax {
            return self.weights[class].clone();
        }
        // d softmax_c / d x_j = s_c (w_cj - sum_k s_k w_kj)
        let s = self.scores(x);
        let mut avg = vec![0.0; self.n_features];
        for (k, w) in self.weights.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                avg[j] += s[k] * wj;
            }
        }
        (0..self.n_features)
            .map(|j| s[class] * (self.weights[class][j] - avg[j]))
            .collect()
    }
}
