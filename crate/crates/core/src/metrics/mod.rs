//! Quantitative evaluation of attributions: an eight-metric tabular suite
//! and a six-metric image suite, each with per-instance rows and a
//! NaN-excluding aggregate.

pub mod image;
pub mod tabular;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use image::{
    aggregate_image_rows, avg_sensitivity, calculate_image_metrics, faithfulness_correlation,
    faithfulness_estimate, max_sensitivity, mprt, smooth_mprt, Granularity, ImageMetricEngine,
    ImageMetricRow, ImageMetricsConfig, ImageMetricsReport, RegionPerturbation, RegionSpec,
    IMAGE_METRIC_COLUMNS,
};
pub use tabular::{
    aggregate_rows, calculate_metrics, complexity, comprehensiveness, faithfulness,
    faithfulness_product, infidelity, monotonicity, sensitivity, sparseness, sufficiency,
    MetricEngine, MetricRow, MetricsConfig, MetricsReport, TopKSpec, METRIC_COLUMNS,
};

/// How a single feature (or a whole vector) gets perturbed.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind {
    /// Replace the feature with the matching baseline entry.
    BaselineReplace { baseline: Vec<f64> },
    /// Add Gaussian noise with standard deviation
    /// `noise_sigma * feature_stds[i]` to feature i.
    GaussianNoise {
        noise_sigma: f64,
        feature_stds: Vec<f64>,
    },
}

/// A perturbation recipe plus the seed that makes it reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn baseline_replace(baseline: Vec<f64>) -> Result<Self> {
        if baseline.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            kind: PerturbationKind::BaselineReplace { baseline },
            seed: 0,
        })
    }

    /// Gaussian spec with per-feature scales taken from `feature_stds`;
    /// zero-variance entries fall back to a unit scale.
    pub fn gaussian(noise_sigma: f64, feature_stds: &[f64], seed: u64) -> Result<Self> {
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::param("noise_sigma must be finite and >= 0"));
        }
        let stds = feature_stds
            .iter()
            .map(|&s| if s == 0.0 { 1.0 } else { s })
            .collect();
        Ok(Self {
            kind: PerturbationKind::GaussianNoise {
                noise_sigma,
                feature_stds: stds,
            },
            seed,
        })
    }

    pub fn n_features(&self) -> usize {
        match &self.kind {
            PerturbationKind::BaselineReplace { baseline } => baseline.len(),
            PerturbationKind::GaussianNoise { feature_stds, .. } => feature_stds.len(),
        }
    }

    /// The instance with only feature `i` perturbed.
    pub(crate) fn perturb_feature(&self, x: &[f64], i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = x.to_vec();
        match &self.kind {
            PerturbationKind::BaselineReplace { baseline } => out[i] = baseline[i],
            PerturbationKind::GaussianNoise {
                noise_sigma,
                feature_stds,
            } => {
                let eps: f64 = StandardNormal.sample(rng);
                out[i] += eps * noise_sigma * feature_stds[i];
            }
        }
        out
    }

    /// A full Gaussian displacement vector; errors for baseline-replace.
    pub(crate) fn draw_displacement(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match &self.kind {
            PerturbationKind::GaussianNoise {
                noise_sigma,
                feature_stds,
            } => Ok((0..n)
                .map(|i| {
                    let eps: f64 = StandardNormal.sample(rng);
                    eps * noise_sigma * feature_stds[i]
                })
                .collect()),
            PerturbationKind::BaselineReplace { .. } => Err(Error::param("this metric needs a gaussian-noise perturbation")),
        }
    }
}

/// Pearson correlation; NaN when either side has zero variance.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return f64::NAN;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Indices of the k largest |values|, ties broken by ascending index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .abs()
            .partial_cmp(&values[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(k);
    order
}

/// Column means of a row-major matrix.
pub(crate) fn column_means(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut means = vec![0.0; n];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= rows.len() as f64;
    }
    means
}

/// Population standard deviation per column.
pub(crate) fn column_stds(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let means = column_means(rows, n);
    let mut vars = vec![0.0; n];
    for row in rows {
        for i in 0..n {
            let d = row[i] - means[i];
            vars[i] += d * d;
        }
    }
    vars.iter().map(|v| (v / rows.len() as f64).sqrt()).collect()
}

/// Mean of the non-NaN entries in one column of per-instance rows, plus
/// the count of excluded (NaN) entries.
pub(crate) fn nan_excluding_mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut kept = 0usize;
    let mut excluded = 0usize;
    for v in values {
        if v.is_nan() {
            excluded += 1;
        } else {
            sum += v;
            kept += 1;
        }
    }
    if kept == 0 {
        (f64::NAN, excluded)
    } else {
        (sum / kept as f64, excluded)
    }
}
