//! Attribution records and the explainer interfaces the metric suite and
//! CLI dispatch against.

pub mod image;
pub mod tabular;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

/// Per-feature signed relevance scores for one instance and one target class.
#[derive(Debug, Clone)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_class: usize,
    pub method: String,
}

impl Attribution {
    pub fn new(
        values: Vec<f64>,
        feature_names: Vec<String>,
        target_class: usize,
        method: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != feature_names.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![feature_names.len()],
                got: vec![values.len()],
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            values,
            feature_names,
            target_class,
            method: method.into(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }
}

/// Per-pixel relevance map, channel-reduced to the input's H x W grid.
#[derive(Debug, Clone)]
pub struct AttributionMap {
    pub values: Tensor,
    pub target_class: usize,
    pub method: String,
    pub input_shape: Vec<usize>,
}

impl AttributionMap {
    pub fn new(
        values: Tensor,
        target_class: usize,
        method: impl Into<String>,
        input_shape: Vec<usize>,
    ) -> Result<Self> {
        if values.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                expected: vec![0, 0],
                got: values.shape().to_vec(),
            });
        }
        if input_shape.len() == 3
            && (input_shape[1] != values.shape()[0] || input_shape[2] != values.shape()[1])
        {
            return Err(Error::ShapeMismatch {
                expected: input_shape[1..].to_vec(),
                got: values.shape().to_vec(),
            });
        }
        if !values.data().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            values,
            target_class,
            method: method.into(),
            input_shape,
        })
    }

    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Reference instances; the per-feature baseline defaults to column means.
#[derive(Debug, Clone)]
pub struct Background {
    samples: Vec<Vec<f64>>,
    baseline: Vec<f64>,
}

impl Background {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBackground);
        }
        let n = samples[0].len();
        if n == 0 || samples.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: vec![n],
                got: vec![samples.iter().map(|r| r.len()).find(|&l| l != n).unwrap_or(0)],
            });
        }
        if !samples.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let m = samples.len() as f64;
        let mut baseline = vec![0.0; n];
        for row in &samples {
            for (b, v) in baseline.iter_mut().zip(row) {
                *b += v;
            }
        }
        for b in &mut baseline {
            *b /= m;
        }
        Ok(Self { samples, baseline })
    }

    /// Single-row background; baseline equals that row.
    pub fn from_baseline(baseline: Vec<f64>) -> Result<Self> {
        Self::new(vec![baseline])
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn n_features(&self) -> usize {
        self.baseline.len()
    }

    /// Population standard deviation per column.
    pub fn feature_stds(&self) -> Vec<f64> {
        let n = self.n_features();
        let m = self.samples.len() as f64;
        let mut out = vec![0.0; n];
        for row in &self.samples {
            for (acc, (v, mean)) in out.iter_mut().zip(row.iter().zip(&self.baseline)) {
                let d = v - mean;
                *acc += d * d;
            }
        }
        for acc in &mut out {
            *acc = (*acc / m).sqrt();
        }
        out
    }
}

/// A tabular attribution method with its options and base seed baked in.
/// `seed` lets batch drivers re-derive a per-instance stream; deterministic
/// methods ignore it.
pub trait TabularExplainer: Sync {
    fn name(&self) -> &str;
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, seed: u64)
        -> Result<Attribution>;
}

/// Image-side counterpart of [`TabularExplainer`].
pub trait ImageExplainer: Sync {
    fn name(&self) -> &str;
    fn explain(
        &self,
        model: &Model,
        x: &Tensor,
        target_class: usize,
        seed: u64,
    ) -> Result<AttributionMap>;
}

pub(crate) fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_baseline_is_column_mean() {
        let bg = Background::new(vec![vec![1.0, 10.0], vec![3.0, 30.0]]).unwrap();
        assert_eq!(bg.baseline(), &[2.0, 20.0]);
        assert_eq!(bg.feature_stds(), &[1.0, 10.0]);
    }

    #[test]
    fn background_rejects_ragged_and_empty() {
        assert!(matches!(
            Background::new(vec![]),
            Err(Error::EmptyBackground)
        ));
        assert!(Background::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn attribution_rejects_nonfinite() {
        assert!(Attribution::new(
            vec![f64::INFINITY],
            vec!["a".into()],
            0,
            "test"
        )
        .is_err());
    }
}
