//! Tabular attribution methods: exact and kernel-weighted Shapley values,
//! a local ridge surrogate, and the gradient/perturbation family.
//!
//! Coalition games use background marginalization: the value of a coalition
//! S is the mean model output over background rows with features in S taken
//! from the instance and the rest from the row.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashSet;

use crate::attrib::{default_feature_names, Attribution, Background, TabularExplainer};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::seed::rng_from;

/// Hard cap on exact enumeration (2^n coalition values).
pub const MAX_EXACT_FEATURES: usize = 15;

fn check_tabular(model: &Model, x: &[f64]) -> Result<usize> {
    let shape = model.input_shape();
    if shape.len() != 1 || shape[0] != x.len() {
        return Err(Error::ShapeMismatch {
            expected: shape,
            got: vec![x.len()],
        });
    }
    Ok(x.len())
}

/// Mean model output over the background with the masked features taken
/// from `x`.
fn coalition_value(
    model: &Model,
    x: &[f64],
    background: &Background,
    target_class: usize,
    mask: u64,
) -> Result<f64> {
    let n = x.len();
    let mut buf = vec![0.0; n];
    let mut acc = 0.0;
    for row in background.samples() {
        for i in 0..n {
            buf[i] = if mask >> i & 1 == 1 { x[i] } else { row[i] };
        }
        acc += model.target_score_slice(&buf, target_class)?;
    }
    Ok(acc / background.samples().len() as f64)
}

/// Exact Shapley values by full coalition enumeration (n <= 15).
///
/// Attribution i is the Shapley value of feature i in the background
/// marginalization game; the values satisfy completeness, symmetry, and the
/// dummy axiom by construction.
pub fn exact_shapley(
    model: &Model,
    x: &[f64],
    background: &Background,
    target_class: usize,
) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    if background.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![background.n_features()],
        });
    }
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            n,
            max: MAX_EXACT_FEATURES,
        });
    }
    let full = 1u64 << n;
    let mut v = vec![0.0; full as usize];
    for mask in 0..full {
        v[mask as usize] = coalition_value(model, x, background, target_class, mask)?;
    }
    // w(s) = s! (n-1-s)! / n!
    let mut fact = vec![1.0; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut values = vec![0.0; n];
    for mask in 0..full {
        let s = mask.count_ones() as usize;
        if s == n {
            continue;
        }
        let weight = fact[s] * fact[n - 1 - s] / fact[n];
        for (i, value) in values.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *value += weight * (v[(mask | 1 << i) as usize] - v[mask as usize]);
            }
        }
    }
    Attribution::new(values, default_feature_names(n), target_class, "exact_shapley")
}

/// Shapley kernel weight for a coalition of size s out of n features.
fn kernel_weight(n: usize, s: usize) -> f64 {
    let mut binom = 1.0;
    for i in 0..s {
        binom *= (n - i) as f64 / (i + 1) as f64;
    }
    (n - 1) as f64 / (binom * (s * (n - s)) as f64)
}

/// Coalition masks in paired size order (1, n-1, 2, n-2, ...), complete
/// levels first, the tail of the budget filled by seeded sampling without
/// replacement inside the next level.
fn sample_coalitions(n: usize, budget: usize, seed: u64) -> Vec<u64> {
    let mut sizes = Vec::new();
    let (mut lo, mut hi) = (1usize, n - 1);
    while lo <= hi {
        sizes.push(lo);
        if hi != lo {
            sizes.push(hi);
        }
        lo += 1;
        hi -= 1;
    }
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(budget);
    for s in sizes {
        if out.len() >= budget {
            break;
        }
        let remaining = budget - out.len();
        let count = {
            let mut c = 1u128;
            for i in 0..s {
                c = c * (n - i) as u128 / (i + 1) as u128;
            }
            c
        };
        if count <= remaining as u128 {
            // enumerate every subset of this size
            let mut mask = (1u64 << s) - 1;
            let limit = 1u64 << n;
            while mask < limit {
                out.push(mask);
                // Gosper's hack: next subset of equal popcount
                let c = mask & mask.wrapping_neg();
                let r = mask + c;
                if r >= limit || c == 0 {
                    break;
                }
                mask = r | (((mask ^ r) / c) >> 2);
            }
        } else {
            let mut seen = HashSet::new();
            let mut indices: Vec<usize> = (0..n).collect();
            while seen.len() < remaining {
                indices.shuffle(&mut rng);
                let mask = indices[..s].iter().fold(0u64, |m, &i| m | 1 << i);
                if seen.insert(mask) {
                    out.push(mask);
                }
            }
        }
    }
    out
}

/// Kernel SHAP: Shapley-kernel-weighted least squares over sampled
/// coalitions, constrained so the surrogate's total equals f(x) - v(empty).
/// With every proper coalition enumerated this reproduces [`exact_shapley`].
pub fn kernel_shap(
    model: &Model,
    x: &[f64],
    background: &Background,
    target_class: usize,
    n_coalitions: usize,
    seed: u64,
) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    if background.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![background.n_features()],
        });
    }
    if n_coalitions < n + 2 {
        return Err(Error::param(format!(
            "n_coalitions must be at least n_features + 2 = {}",
            n + 2
        )));
    }
    let v0 = coalition_value(model, x, background, target_class, 0)?;
    let fx = model.target_score_slice(x, target_class)?;
    let fx_delta = fx - v0;
    if n == 1 {
        return Attribution::new(
            vec![fx_delta],
            default_feature_names(1),
            target_class,
            "kernel_shap",
        );
    }

    let masks = sample_coalitions(n, n_coalitions, seed);
    // Constraint elimination: phi_{n-1} = fx_delta - sum of the others, so
    // regress y - z_last * fx_delta on columns z_i - z_last.
    let p = n - 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for &mask in &masks {
        let w = kernel_weight(n, mask.count_ones() as usize);
        let z_last = (mask >> (n - 1) & 1) as f64;
        for (i, r) in row.iter_mut().enumerate() {
            *r = (mask >> i & 1) as f64 - z_last;
        }
        let y = coalition_value(model, x, background, target_class, mask)? - v0
            - z_last * fx_delta;
        for i in 0..p {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..p {
                xtwx[(i, j)] += w * row[i] * row[j];
            }
            xtwy[i] += w * row[i] * y;
        }
    }
    let beta = xtwx
        .cholesky()
        .map(|ch| ch.solve(&xtwy))
        .ok_or(Error::SingularSystem)?;
    let mut values: Vec<f64> = beta.iter().cloned().collect();
    let rest: f64 = values.iter().sum();
    values.push(fx_delta - rest);
    Attribution::new(values, default_feature_names(n), target_class, "kernel_shap")
}

/// Default LIME kernel width, 0.75 * sqrt(n_features).
pub fn default_kernel_width(n_features: usize) -> f64 {
    0.75 * (n_features as f64).sqrt()
}

/// LIME: fit a ridge surrogate to the model on Gaussian perturbations of
/// the instance, weighted by exp(-d^2 / kernel_width^2) with d the
/// standardized distance from the instance. Attribution = coefficients.
pub fn lime_tabular(
    model: &Model,
    x: &[f64],
    background: &Background,
    target_class: usize,
    n_samples: usize,
    kernel_width: f64,
    ridge: f64,
    seed: u64,
) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    if background.n_features() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![background.n_features()],
        });
    }
    if n_samples < 10 * n {
        return Err(Error::param(format!(
            "n_samples must be at least 10 * n_features = {}",
            10 * n
        )));
    }
    if kernel_width <= 0.0 || ridge < 0.0 {
        return Err(Error::param("kernel_width must be > 0 and ridge >= 0"));
    }
    let mut stds = background.feature_stds();
    for (i, s) in stds.iter_mut().enumerate() {
        if *s == 0.0 {
            log::warn!("background column {i} has zero variance; perturbation scale falls back to 1.0");
            *s = 1.0;
        }
    }

    let mut rng = rng_from(seed);
    // ridge with unpenalized intercept: params = [intercept, coefs...]
    let p = n + 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut sample = vec![0.0; n];
    let mut row = vec![0.0; p];
    let kw2 = kernel_width * kernel_width;
    for _ in 0..n_samples {
        let mut d2 = 0.0;
        for i in 0..n {
            let eps: f64 = StandardNormal.sample(&mut rng);
            sample[i] = x[i] + eps * stds[i];
            d2 += eps * eps;
        }
        let w = (-d2 / kw2).exp();
        let y = model.target_score_slice(&sample, target_class)?;
        row[0] = 1.0;
        row[1..].copy_from_slice(&sample);
        for i in 0..p {
            for j in 0..p {
                xtwx[(i, j)] += w * row[i] * row[j];
            }
            xtwy[i] += w * row[i] * y;
        }
    }
    for i in 1..p {
        xtwx[(i, i)] += ridge;
    }
    let beta = xtwx
        .cholesky()
        .map(|ch| ch.solve(&xtwy))
        .ok_or(Error::SingularSystem)?;
    let values = beta.iter().skip(1).cloned().collect();
    Attribution::new(values, default_feature_names(n), target_class, "lime")
}

/// Integrated gradients with a midpoint Riemann sum along the straight path
/// from `baseline` to `x`.
pub fn integrated_gradients(
    model: &Model,
    x: &[f64],
    baseline: &[f64],
    target_class: usize,
    steps: usize,
) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    if baseline.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![baseline.len()],
        });
    }
    if steps < 8 {
        return Err(Error::param("integrated gradients needs steps >= 8"));
    }
    if !model.is_differentiable() {
        return Err(Error::NotDifferentiable);
    }
    let mut mean_grad = vec![0.0; n];
    let mut point = vec![0.0; n];
    for k in 1..=steps {
        let t = (k as f64 - 0.5) / steps as f64;
        for i in 0..n {
            point[i] = baseline[i] + t * (x[i] - baseline[i]);
        }
        let g = model.input_gradient(&crate::tensor::Tensor::from_slice(&point), target_class)?;
        for (m, gi) in mean_grad.iter_mut().zip(g.data()) {
            *m += gi;
        }
    }
    let values = (0..n)
        .map(|i| (x[i] - baseline[i]) * mean_grad[i] / steps as f64)
        .collect();
    Attribution::new(
        values,
        default_feature_names(n),
        target_class,
        "integrated_gradients",
    )
}

/// Absolute input gradient.
pub fn saliency(model: &Model, x: &[f64], target_class: usize) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    let g = model.input_gradient(&crate::tensor::Tensor::from_slice(x), target_class)?;
    let values = g.data().iter().map(|v| v.abs()).collect();
    Attribution::new(values, default_feature_names(n), target_class, "saliency")
}

/// Elementwise input times gradient.
pub fn grad_x_input(model: &Model, x: &[f64], target_class: usize) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    let g = model.input_gradient(&crate::tensor::Tensor::from_slice(x), target_class)?;
    let values = g.data().iter().zip(x).map(|(gi, xi)| gi * xi).collect();
    Attribution::new(values, default_feature_names(n), target_class, "grad_x_input")
}

/// Per-feature ablation: the output drop when one feature is replaced by
/// its baseline value.
pub fn feature_ablation(
    model: &Model,
    x: &[f64],
    baseline: &[f64],
    target_class: usize,
) -> Result<Attribution> {
    let n = check_tabular(model, x)?;
    if baseline.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![baseline.len()],
        });
    }
    let fx = model.target_score_slice(x, target_class)?;
    let mut values = vec![0.0; n];
    let mut buf = x.to_vec();
    for i in 0..n {
        let keep = buf[i];
        buf[i] = baseline[i];
        values[i] = fx - model.target_score_slice(&buf, target_class)?;
        buf[i] = keep;
    }
    Attribution::new(
        values,
        default_feature_names(n),
        target_class,
        "feature_ablation",
    )
}

// ── Explainer wrappers for batch drivers ────────────────────────────────

pub struct ExactShapleyExplainer {
    pub background: Background,
}

impl TabularExplainer for ExactShapleyExplainer {
    fn name(&self) -> &str {
        "exact_shapley"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, _seed: u64) -> Result<Attribution> {
        exact_shapley(model, x, &self.background, target_class)
    }
}

pub struct KernelShapExplainer {
    pub background: Background,
    pub n_coalitions: usize,
}

impl TabularExplainer for KernelShapExplainer {
    fn name(&self) -> &str {
        "kernel_shap"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, seed: u64) -> Result<Attribution> {
        kernel_shap(model, x, &self.background, target_class, self.n_coalitions, seed)
    }
}

pub struct LimeExplainer {
    pub background: Background,
    pub n_samples: usize,
    /// Defaults to 0.75 * sqrt(n_features) when None.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
}

impl TabularExplainer for LimeExplainer {
    fn name(&self) -> &str {
        "lime"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, seed: u64) -> Result<Attribution> {
        let kw = self.kernel_width.unwrap_or_else(|| default_kernel_width(x.len()));
        lime_tabular(
            model,
            x,
            &self.background,
            target_class,
            self.n_samples,
            kw,
            self.ridge,
            seed,
        )
    }
}

pub struct IntegratedGradientsExplainer {
    pub baseline: Vec<f64>,
    pub steps: usize,
}

impl TabularExplainer for IntegratedGradientsExplainer {
    fn name(&self) -> &str {
        "integrated_gradients"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, _seed: u64) -> Result<Attribution> {
        integrated_gradients(model, x, &self.baseline, target_class, self.steps)
    }
}

pub struct SaliencyExplainer;

impl TabularExplainer for SaliencyExplainer {
    fn name(&self) -> &str {
        "saliency"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, _seed: u64) -> Result<Attribution> {
        saliency(model, x, target_class)
    }
}

pub struct GradXInputExplainer;

impl TabularExplainer for GradXInputExplainer {
    fn name(&self) -> &str {
        "grad_x_input"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, _seed: u64) -> Result<Attribution> {
        grad_x_input(model, x, target_class)
    }
}

pub struct FeatureAblationExplainer {
    pub baseline: Vec<f64>,
}

impl TabularExplainer for FeatureAblationExplainer {
    fn name(&self) -> &str {
        "feature_ablation"
    }
    fn explain(&self, model: &Model, x: &[f64], target_class: usize, _seed: u64) -> Result<Attribution> {
        feature_ablation(model, x, &self.baseline, target_class)
    }
}
