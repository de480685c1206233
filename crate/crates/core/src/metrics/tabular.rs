//! The eight tabular attribution metrics and their dataset-level
//! aggregation.
//!
//! Metric rows follow one fixed column order: faithfulness, infidelity,
//! sensitivity, comprehensiveness, sufficiency, monotonicity, complexity,
//! sparseness. Metrics that are undefined for an instance (zero variance,
//! fewer than two features) come back as NaN and are excluded from the
//! aggregate, with the exclusion counted.

use rayon::prelude::*;
use serde::Serialize;

use crate::attrib::{Attribution, TabularExplainer};
use crate::error::{Error, Result};
use crate::io::TabularDataset;
use crate::metrics::{
    column_means, column_stds, nan_excluding_mean, pearson, top_k_indices, PerturbationSpec,
};
use crate::model::Model;
use crate::seed::{derive_seed, purpose_id, rng_from};

/// Top-k feature selection: k largest |a_i|, ties by ascending index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopKSpec {
    pub k: usize,
}

impl TopKSpec {
    pub fn new(k: usize, n_features: usize) -> Result<Self> {
        if k == 0 || k > n_features {
            return Err(Error::param(format!(
                "top-k must satisfy 1 <= k <= {n_features}, got {k}"
            )));
        }
        Ok(Self { k })
    }

    /// Default k = ceil(n / 4).
    pub fn default_for(n_features: usize) -> Self {
        Self {
            k: n_features.div_ceil(4).max(1),
        }
    }
}

pub const METRIC_COLUMNS: [&str; 8] = [
    "faithfulness",
    "infidelity",
    "sensitivity",
    "comprehensiveness",
    "sufficiency",
    "monotonicity",
    "complexity",
    "sparseness",
];

/// One instance's metric values, in report column order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricRow {
    pub faithfulness: f64,
    pub infidelity: f64,
    pub sensitivity: f64,
    pub comprehensiveness: f64,
    pub sufficiency: f64,
    pub monotonicity: f64,
    pub complexity: f64,
    pub sparseness: f64,
}

impl MetricRow {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.faithfulness,
            self.infidelity,
            self.sensitivity,
            self.comprehensiveness,
            self.sufficiency,
            self.monotonicity,
            self.complexity,
            self.sparseness,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            faithfulness: a[0],
            infidelity: a[1],
            sensitivity: a[2],
            comprehensiveness: a[3],
            sufficiency: a[4],
            monotonicity: a[5],
            complexity: a[6],
            sparseness: a[7],
        }
    }
}

/// Dataset-level result: one row per instance plus the NaN-excluding mean.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub per_instance: Vec<MetricRow>,
    pub aggregate: MetricRow,
    /// Per column, how many instances were NaN and left out of the mean.
    pub excluded: [usize; 8],
}

fn per_feature_deltas(
    model: &Model,
    x: &[f64],
    target_class: usize,
    pspec: &PerturbationSpec,
) -> Result<Vec<f64>> {
    let fx = model.target_score_slice(x, target_class)?;
    let mut rng = rng_from(pspec.seed);
    (0..x.len())
        .map(|i| {
            let xp = pspec.perturb_feature(x, i, &mut rng);
            Ok((fx - model.target_score_slice(&xp, target_class)?).abs())
        })
        .collect()
}

/// Pearson correlation between |a_i| and |f(x) - f(x_i')| over features;
/// NaN when either side is constant.
pub fn faithfulness(
    model: &Model,
    x: &[f64],
    attribution: &Attribution,
    pspec: &PerturbationSpec,
) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::param("faithfulness needs at least 2 features"));
    }
    if attribution.values.len() != n || pspec.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![attribution.values.len()],
        });
    }
    let deltas = per_feature_deltas(model, x, attribution.target_class, pspec)?;
    let abs_a: Vec<f64> = attribution.values.iter().map(|v| v.abs()).collect();
    Ok(pearson(&abs_a, &deltas))
}

/// The literal mean-product form: (1/n) Σ |Δf_i| · |a_i|.
pub fn faithfulness_product(
    model: &Model,
    x: &[f64],
    attribution: &Attribution,
    pspec: &PerturbationSpec,
) -> Result<f64> {
    let n = x.len();
    if attribution.values.len() != n || pspec.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![attribution.values.len()],
        });
    }
    let deltas = per_feature_deltas(model, x, attribution.target_class, pspec)?;
    Ok(attribution
        .values
        .iter()
        .zip(&deltas)
        .map(|(a, d)| a.abs() * d)
        .sum::<f64>()
        / n as f64)
}

/// Mean squared residual between the attribution's predicted effect of a
/// Gaussian displacement and the model's actual response:
/// mean over draws of (Iᵀa - (f(x) - f(x - I)))².
pub fn infidelity(
    model: &Model,
    x: &[f64],
    attribution: &Attribution,
    pspec: &PerturbationSpec,
    n_draws: usize,
) -> Result<f64> {
    let n = x.len();
    if attribution.values.len() != n || pspec.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![attribution.values.len()],
        });
    }
    if n_draws == 0 {
        return Err(Error::param("infidelity needs n_draws >= 1"));
    }
    let fx = model.target_score_slice(x, attribution.target_class)?;
    let mut rng = rng_from(pspec.seed);
    let mut acc = 0.0;
    let mut moved = vec![0.0; n];
    for _ in 0..n_draws {
        let disp = pspec.draw_displacement(n, &mut rng)?;
        for i in 0..n {
            moved[i] = x[i] - disp[i];
        }
        let predicted: f64 = disp.iter().zip(&attribution.values).map(|(d, a)| d * a).sum();
        let actual = fx - model.target_score_slice(&moved, attribution.target_class)?;
        acc += (predicted - actual) * (predicted - actual);
    }
    Ok(acc / n_draws as f64)
}

/// Mean absolute attribution change when the explainer is re-run on a
/// slightly displaced instance. The explainer sees the same seed both
/// times, so any difference comes from the input, not the RNG.
pub fn sensitivity(
    explainer: &dyn TabularExplainer,
    model: &Model,
    x: &[f64],
    target_class: usize,
    pspec: &PerturbationSpec,
    explainer_seed: u64,
) -> Result<f64> {
    let n = x.len();
    if pspec.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![pspec.n_features()],
        });
    }
    let a = explainer.explain(model, x, target_class, explainer_seed)?;
    let mut rng = rng_from(pspec.seed);
    let disp = pspec.draw_displacement(n, &mut rng)?;
    let moved: Vec<f64> = x.iter().zip(&disp).map(|(v, d)| v + d).collect();
    let b = explainer.explain(model, &moved, target_class, explainer_seed)?;
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / n as f64)
}

/// Output drop when the top-k features are replaced by their baseline
/// values: f(x) - f(x_mask).
pub fn comprehensiveness(
    model: &Model,
    x: &[f64],
    attribution: &Attribution,
    topk: TopKSpec,
    baseline: &[f64],
) -> Result<f64> {
    let n = x.len();
    if attribution.values.len() != n || baseline.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![baseline.len()],
        });
    }
    TopKSpec::new(topk.k, n)?;
    let mut masked = x.to_vec();
    for i in top_k_indices(&attribution.values, topk.k) {
        masked[i] = baseline[i];
    }
    let fx = model.target_score_slice(x, attribution.target_class)?;
    Ok(fx - model.target_score_slice(&masked, attribution.target_class)?)
}

/// Output drop when everything except the top-k features is replaced by
/// the baseline: f(x) - f(x_focused).
pub fn sufficiency(
    model: &Model,
    x: &[f64],
    attribution: &Attribution,
    topk: TopKSpec,
    baseline: &[f64],
) -> Result<f64> {
    let n = x.len();
    if attribution.values.len() != n || baseline.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![baseline.len()],
        });
    }
    TopKSpec::new(topk.k, n)?;
    let mut focused = baseline.to_vec();
    for i in top_k_indices(&attribution.values, topk.k) {
        focused[i] = x[i];
    }
    let fx = model.target_score_slice(x, attribution.target_class)?;
    Ok(fx - model.target_score_slice(&focused, attribution.target_class)?)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Fraction of consecutive feature pairs (dataset column order) whose
/// attributions share a sign; NaN for fewer than two features.
pub fn monotonicity(attribution: &Attribution) -> f64 {
    let v = &attribution.values;
    if v.len() < 2 {
        return f64::NAN;
    }
    let agreements = v
        .windows(2)
        .filter(|w| sign(w[0]) == sign(w[1]))
        .count();
    agreements as f64 / (v.len() - 1) as f64
}

/// Count of features with |a_i| > zero_tol (a count, not a fraction).
pub fn complexity(attribution: &Attribution, zero_tol: f64) -> f64 {
    attribution
        .values
        .iter()
        .filter(|a| a.abs() > zero_tol)
        .count() as f64
}

/// 1 - complexity / n.
pub fn sparseness(attribution: &Attribution, zero_tol: f64) -> f64 {
    1.0 - complexity(attribution, zero_tol) / attribution.values.len() as f64
}

/// Knobs for [`calculate_metrics`]; `Default` gives the documented
/// defaults.
#[derive(Debug, Clone)]
pub struct MetricsConfig {
    pub seed: u64,
    /// Defaults to ceil(n/4) when None.
    pub top_k: Option<usize>,
    pub zero_tol: f64,
    /// Std multiplier for infidelity's Gaussian displacement.
    pub infidelity_sigma: f64,
    pub infidelity_draws: usize,
    /// Std multiplier for the sensitivity re-run displacement.
    pub sensitivity_sigma: f64,
    /// None = baseline-replace faithfulness perturbation (default);
    /// Some(sigma) switches to per-feature Gaussian noise.
    pub faithfulness_gaussian_sigma: Option<f64>,
    /// Fill non-top-k features with literal zero instead of the baseline
    /// when computing sufficiency.
    pub sufficiency_zero_baseline: bool,
    /// Replacement values for masking; column means of the dataset when
    /// None.
    pub baseline: Option<Vec<f64>>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            top_k: None,
            zero_tol: 1e-12,
            infidelity_sigma: 0.1,
            infidelity_draws: 32,
            sensitivity_sigma: 0.01,
            faithfulness_gaussian_sigma: None,
            sufficiency_zero_baseline: false,
            baseline: None,
        }
    }
}

/// Precomputed dataset statistics shared by every instance's metric
/// evaluation; lets batch drivers score instances one at a time with the
/// exact same numbers as [`calculate_metrics`].
pub struct MetricEngine<'a> {
    model: &'a Model,
    dataset: &'a TabularDataset,
    config: &'a MetricsConfig,
    baseline: Vec<f64>,
    suff_baseline: Vec<f64>,
    stds: Vec<f64>,
    topk: TopKSpec,
}

impl<'a> MetricEngine<'a> {
    pub fn new(
        model: &'a Model,
        dataset: &'a TabularDataset,
        config: &'a MetricsConfig,
    ) -> Result<Self> {
        if dataset.features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = dataset.n_features();
        if model.input_shape() != vec![n] {
            return Err(Error::ShapeMismatch {
                expected: model.input_shape(),
                got: vec![n],
            });
        }
        let baseline = config
            .baseline
            .clone()
            .unwrap_or_else(|| column_means(&dataset.features, n));
        if baseline.len() != n {
            return Err(Error::ShapeMismatch {
                expected: vec![n],
                got: vec![baseline.len()],
            });
        }
        let stds = column_stds(&dataset.features, n);
        let topk = match config.top_k {
            Some(k) => TopKSpec::new(k, n)?,
            None => TopKSpec::default_for(n),
        };
        let suff_baseline = if config.sufficiency_zero_baseline {
            vec![0.0; n]
        } else {
            baseline.clone()
        };
        Ok(Self {
            model,
            dataset,
            config,
            baseline,
            suff_baseline,
            stds,
            topk,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.dataset.n_rows()
    }

    /// All eight metrics for one instance. Every random stream is derived
    /// from (seed, instance index, purpose), so the result is independent
    /// of evaluation order and thread count.
    pub fn row(&self, explainer: &dyn TabularExplainer, idx: usize) -> Result<MetricRow> {
        let x = self
            .dataset
            .features
            .get(idx)
            .ok_or_else(|| Error::param(format!("instance index {idx} out of range")))?;
        let model = self.model;
        let config = self.config;
        let class = model.predict_slice(x)?.predicted_class;
        let explain_seed = derive_seed(config.seed, &[idx as u64, purpose_id(explainer.name())]);
        let a = explainer.explain(model, x, class, explain_seed)?;

        let faith_spec = match config.faithfulness_gaussian_sigma {
            None => PerturbationSpec::baseline_replace(self.baseline.clone())?,
            Some(sigma) => {
                let mut s = PerturbationSpec::gaussian(sigma, &self.stds, 0)?;
                s.seed = derive_seed(config.seed, &[idx as u64, purpose_id("metric:faithfulness")]);
                s
            }
        };
        let faith = faithfulness(model, x, &a, &faith_spec)?;

        let inf_spec = PerturbationSpec::gaussian(
            config.infidelity_sigma,
            &self.stds,
            derive_seed(config.seed, &[idx as u64, purpose_id("metric:infidelity")]),
        )?;
        let inf = infidelity(model, x, &a, &inf_spec, config.infidelity_draws)?;

        let sens_spec = PerturbationSpec::gaussian(
            config.sensitivity_sigma,
            &self.stds,
            derive_seed(config.seed, &[idx as u64, purpose_id("metric:sensitivity")]),
        )?;
        let sens = sensitivity(explainer, model, x, class, &sens_spec, explain_seed)?;

        Ok(MetricRow {
            faithfulness: faith,
            infidelity: inf,
            sensitivity: sens,
            comprehensiveness: comprehensiveness(model, x, &a, self.topk, &self.baseline)?,
            sufficiency: sufficiency(model, x, &a, self.topk, &self.suff_baseline)?,
            monotonicity: monotonicity(&a),
            complexity: complexity(&a, config.zero_tol),
            sparseness: sparseness(&a, config.zero_tol),
        })
    }
}

/// Average per-instance rows column-wise, skipping NaNs and counting them.
pub fn aggregate_rows(per_instance: &[MetricRow]) -> (MetricRow, [usize; 8]) {
    let mut agg = [0.0; 8];
    let mut excluded = [0usize; 8];
    for c in 0..8 {
        let (mean, ex) = nan_excluding_mean(per_instance.iter().map(|r| r.as_array()[c]));
        agg[c] = mean;
        excluded[c] = ex;
    }
    (MetricRow::from_array(agg), excluded)
}

/// Explain and score every instance, then average each metric over the
/// instances where it is defined. Rows are computed in parallel; the
/// result is byte-identical regardless of thread count because every
/// random stream is derived from (seed, instance index, purpose).
pub fn calculate_metrics(
    model: &Model,
    explainer: &dyn TabularExplainer,
    dataset: &TabularDataset,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    let engine = MetricEngine::new(model, dataset, config)?;
    let per_instance: Vec<MetricRow> = (0..engine.n_instances())
        .into_par_iter()
        .map(|idx| engine.row(explainer, idx))
        .collect::<Result<_>>()?;
    let (aggregate, excluded) = aggregate_rows(&per_instance);
    Ok(MetricsReport {
        per_instance,
        aggregate,
        excluded,
    })
}
