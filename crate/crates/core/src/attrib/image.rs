//! Attribution maps for image classifiers.
//!
//! All methods take a CHW input tensor and return an H×W map. Signed
//! methods (gradient×input, integrated gradients) reduce channels by
//! summation; saliency reduces by the maximum absolute value, so its maps
//! are non-negative.

use rand_distr::{Distribution, StandardNormal};

use crate::attrib::{AttributionMap, ImageExplainer};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::seed::rng_from;
use crate::tensor::Tensor;

/// Interpolation used to stretch a coarse map to the input resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Upsampling {
    #[default]
    Bilinear,
    Nearest,
}

fn check_image(model: &Model, x: &Tensor) -> Result<(usize, usize, usize)> {
    let shape = model.input_shape();
    if shape != x.shape() {
        return Err(Error::ShapeMismatch {
            expected: shape,
            got: x.shape().to_vec(),
        });
    }
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch {
            expected: vec![0, 0, 0],
            got: shape,
        });
    }
    Ok((shape[0], shape[1], shape[2]))
}

fn reduce_abs_max(grad: &Tensor, c: usize, h: usize, w: usize) -> Tensor {
    let mut map = Tensor::zeros(vec![h, w]);
    for i in 0..h {
        for j in 0..w {
            let mut best = 0.0f64;
            for ch in 0..c {
                best = best.max(grad.at3(ch, i, j).abs());
            }
            *map.data_mut().get_mut(i * w + j).unwrap() = best;
        }
    }
    map
}

fn reduce_sum(per_channel: &Tensor, c: usize, h: usize, w: usize) -> Tensor {
    let mut map = Tensor::zeros(vec![h, w]);
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for ch in 0..c {
                acc += per_channel.at3(ch, i, j);
            }
            map.data_mut()[i * w + j] = acc;
        }
    }
    map
}

/// Per-pixel maximum absolute gradient across channels.
pub fn saliency_map(model: &Model, x: &Tensor, target_class: usize) -> Result<AttributionMap> {
    let (c, h, w) = check_image(model, x)?;
    let grad = model.input_gradient(x, target_class)?;
    AttributionMap::new(
        reduce_abs_max(&grad, c, h, w),
        target_class,
        "saliency_map",
        x.shape().to_vec(),
    )
}

/// Gradient times input, summed over channels.
pub fn grad_input_map(model: &Model, x: &Tensor, target_class: usize) -> Result<AttributionMap> {
    let (c, h, w) = check_image(model, x)?;
    let grad = model.input_gradient(x, target_class)?;
    let prod = Tensor::new(
        x.shape().to_vec(),
        grad.data().iter().zip(x.data()).map(|(g, v)| g * v).collect(),
    )?;
    AttributionMap::new(
        reduce_sum(&prod, c, h, w),
        target_class,
        "grad_input_map",
        x.shape().to_vec(),
    )
}

/// Integrated gradients along the straight path from `baseline`, midpoint
/// rule, summed over channels.
pub fn integrated_gradients_map(
    model: &Model,
    x: &Tensor,
    baseline: &Tensor,
    steps: usize,
    target_class: usize,
) -> Result<AttributionMap> {
    let (c, h, w) = check_image(model, x)?;
    if baseline.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            expected: x.shape().to_vec(),
            got: baseline.shape().to_vec(),
        });
    }
    if steps < 8 {
        return Err(Error::param("integrated gradients needs steps >= 8"));
    }
    if !model.is_differentiable() {
        return Err(Error::NotDifferentiable);
    }
    let len = x.len();
    let mut mean_grad = vec![0.0; len];
    let mut point = vec![0.0; len];
    for k in 1..=steps {
        let t = (k as f64 - 0.5) / steps as f64;
        for i in 0..len {
            point[i] = baseline.data()[i] + t * (x.data()[i] - baseline.data()[i]);
        }
        let g = model.input_gradient(&Tensor::new(x.shape().to_vec(), point.clone())?, target_class)?;
        for (m, gi) in mean_grad.iter_mut().zip(g.data()) {
            *m += gi;
        }
    }
    let per_channel = Tensor::new(
        x.shape().to_vec(),
        (0..len)
            .map(|i| (x.data()[i] - baseline.data()[i]) * mean_grad[i] / steps as f64)
            .collect(),
    )?;
    AttributionMap::new(
        reduce_sum(&per_channel, c, h, w),
        target_class,
        "integrated_gradients_map",
        x.shape().to_vec(),
    )
}

/// Mean saliency over Gaussian-noised copies of the input; the noise
/// standard deviation is `sigma * (max(x) - min(x))`.
///
/// `sigma == 0` takes the plain saliency path so the result is identical
/// bit for bit.
pub fn smoothgrad(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    n_samples: usize,
    sigma: f64,
    seed: u64,
) -> Result<AttributionMap> {
    let (c, h, w) = check_image(model, x)?;
    if n_samples == 0 {
        return Err(Error::param("smoothgrad needs n_samples >= 1"));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::param("sigma must be finite and >= 0"));
    }
    if sigma == 0.0 {
        let base = saliency_map(model, x, target_class)?;
        return AttributionMap::new(base.values, target_class, "smoothgrad", x.shape().to_vec());
    }
    let (min, max) = x.min_max();
    let std = sigma * (max - min);
    let mut rng = rng_from(seed);
    let mut acc = Tensor::zeros(vec![h, w]);
    let mut noisy = vec![0.0; x.len()];
    for _ in 0..n_samples {
        for (dst, src) in noisy.iter_mut().zip(x.data()) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *dst = src + eps * std;
        }
        let grad = model.input_gradient(&Tensor::new(x.shape().to_vec(), noisy.clone())?, target_class)?;
        let m = reduce_abs_max(&grad, c, h, w);
        for (a, v) in acc.data_mut().iter_mut().zip(m.data()) {
            *a += v;
        }
    }
    for a in acc.data_mut() {
        *a /= n_samples as f64;
    }
    AttributionMap::new(acc, target_class, "smoothgrad", x.shape().to_vec())
}

/// Occlusion sensitivity: slide a patch over the image, replace the covered
/// window (all channels) with `baseline_value`, and credit every covered
/// cell with f(x) - f(occluded); overlapping credits are averaged by
/// coverage count. Cells no full patch placement reaches stay zero.
pub fn occlusion_sensitivity(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    patch_size: (usize, usize),
    stride: (usize, usize),
    baseline_value: f64,
) -> Result<AttributionMap> {
    let (c, h, w) = check_image(model, x)?;
    let (ph, pw) = patch_size;
    let (sh, sw) = stride;
    if ph == 0 || pw == 0 || sh == 0 || sw == 0 {
        return Err(Error::param("patch_size and stride must be positive"));
    }
    if ph > h || pw > w {
        return Err(Error::PatchLargerThanImage {
            patch: (ph, pw),
            image: (h, w),
        });
    }
    if !baseline_value.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let fx = model.target_score(x, target_class)?;
    let mut acc = vec![0.0; h * w];
    let mut count = vec![0u32; h * w];
    let mut patched = x.clone();
    let mut r = 0;
    while r + ph <= h {
        let mut col = 0;
        while col + pw <= w {
            for ch in 0..c {
                for i in r..r + ph {
                    for j in col..col + pw {
                        patched.data_mut()[ch * h * w + i * w + j] = baseline_value;
                    }
                }
            }
            let diff = fx - model.target_score(&patched, target_class)?;
            for i in r..r + ph {
                for j in col..col + pw {
                    acc[i * w + j] += diff;
                    count[i * w + j] += 1;
                }
            }
            // restore the window
            for ch in 0..c {
                for i in r..r + ph {
                    for j in col..col + pw {
                        patched.data_mut()[ch * h * w + i * w + j] = x.at3(ch, i, j);
                    }
                }
            }
            col += sw;
        }
        r += sh;
    }
    for (a, &n) in acc.iter_mut().zip(&count) {
        if n > 0 {
            *a /= n as f64;
        }
    }
    AttributionMap::new(
        Tensor::new(vec![h, w], acc)?,
        target_class,
        "occlusion_sensitivity",
        x.shape().to_vec(),
    )
}

/// Stretch an H'×W' map to H×W.
fn upsample(map: &Tensor, h: usize, w: usize, mode: Upsampling) -> Tensor {
    let (sh, sw) = (map.shape()[0], map.shape()[1]);
    if (sh, sw) == (h, w) {
        return map.clone();
    }
    let mut out = Tensor::zeros(vec![h, w]);
    for i in 0..h {
        // align corners: endpoints of both grids coincide
        let fy = if h > 1 { i as f64 * (sh - 1) as f64 / (h - 1) as f64 } else { 0.0 };
        for j in 0..w {
            let fx = if w > 1 { j as f64 * (sw - 1) as f64 / (w - 1) as f64 } else { 0.0 };
            let v = match mode {
                Upsampling::Nearest => {
                    let y = fy.round() as usize;
                    let x = fx.round() as usize;
                    map.at2(y.min(sh - 1), x.min(sw - 1))
                }
                Upsampling::Bilinear => {
                    let y0 = fy.floor() as usize;
                    let x0 = fx.floor() as usize;
                    let y1 = (y0 + 1).min(sh - 1);
                    let x1 = (x0 + 1).min(sw - 1);
                    let dy = fy - y0 as f64;
                    let dx = fx - x0 as f64;
                    map.at2(y0, x0) * (1.0 - dy) * (1.0 - dx)
                        + map.at2(y0, x1) * (1.0 - dy) * dx
                        + map.at2(y1, x0) * dy * (1.0 - dx)
                        + map.at2(y1, x1) * dy * dx
                }
            };
            out.data_mut()[i * w + j] = v;
        }
    }
    out
}

/// Grad-CAM: relu of the sum of activation channels weighted by their
/// spatially averaged gradients, upsampled to the input resolution and
/// scaled into [0, 1] when the maximum is positive.
pub fn grad_cam(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    conv_layer_idx: Option<usize>,
    upsampling: Upsampling,
) -> Result<AttributionMap> {
    let (_, h, w) = check_image(model, x)?;
    let net = model
        .as_sequential()
        .map_err(|_| Error::param("grad-cam requires a sequential network"))?;
    let layer = match conv_layer_idx {
        Some(i) => i,
        None => net
            .last_conv_layer()
            .ok_or_else(|| Error::param("model has no convolutional layer"))?,
    };
    let (_, activations) = model.forward_with_activations(x, layer)?;
    let grads = model.activation_gradient(x, layer, target_class)?;
    let (ac, ah, aw) = (
        activations.shape()[0],
        activations.shape()[1],
        activations.shape()[2],
    );
    let mut cam = Tensor::zeros(vec![ah, aw]);
    for ch in 0..ac {
        let mut weight = 0.0;
        for i in 0..ah {
            for j in 0..aw {
                weight += grads.at3(ch, i, j);
            }
        }
        weight /= (ah * aw) as f64;
        for i in 0..ah {
            for j in 0..aw {
                cam.data_mut()[i * aw + j] += weight * activations.at3(ch, i, j);
            }
        }
    }
    for v in cam.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut full = upsample(&cam, h, w, upsampling);
    let (_, max) = full.min_max();
    if max > 0.0 {
        for v in full.data_mut() {
            *v /= max;
        }
    }
    AttributionMap::new(full, target_class, "grad_cam", x.shape().to_vec())
}

// ── Explainer wrappers for batch drivers ────────────────────────────────

pub struct SaliencyMapExplainer;

impl ImageExplainer for SaliencyMapExplainer {
    fn name(&self) -> &str {
        "saliency_map"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, _seed: u64) -> Result<AttributionMap> {
        saliency_map(model, x, target_class)
    }
}

pub struct GradInputMapExplainer;

impl ImageExplainer for GradInputMapExplainer {
    fn name(&self) -> &str {
        "grad_input_map"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, _seed: u64) -> Result<AttributionMap> {
        grad_input_map(model, x, target_class)
    }
}

pub struct IntegratedGradientsMapExplainer {
    /// Black image when None.
    pub baseline: Option<Tensor>,
    pub steps: usize,
}

impl ImageExplainer for IntegratedGradientsMapExplainer {
    fn name(&self) -> &str {
        "integrated_gradients_map"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, _seed: u64) -> Result<AttributionMap> {
        let black;
        let baseline = match &self.baseline {
            Some(b) => b,
            None => {
                black = Tensor::zeros(x.shape().to_vec());
                &black
            }
        };
        integrated_gradients_map(model, x, baseline, self.steps, target_class)
    }
}

pub struct SmoothGradExplainer {
    pub n_samples: usize,
    pub sigma: f64,
}

impl ImageExplainer for SmoothGradExplainer {
    fn name(&self) -> &str {
        "smoothgrad"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, seed: u64) -> Result<AttributionMap> {
        smoothgrad(model, x, target_class, self.n_samples, self.sigma, seed)
    }
}

pub struct OcclusionExplainer {
    pub patch_size: (usize, usize),
    pub stride: (usize, usize),
    pub baseline_value: f64,
}

impl ImageExplainer for OcclusionExplainer {
    fn name(&self) -> &str {
        "occlusion_sensitivity"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, _seed: u64) -> Result<AttributionMap> {
        occlusion_sensitivity(model, x, target_class, self.patch_size, self.stride, self.baseline_value)
    }
}

pub struct GradCamExplainer {
    /// Last convolutional layer when None.
    pub conv_layer_idx: Option<usize>,
    pub upsampling: Upsampling,
}

impl ImageExplainer for GradCamExplainer {
    fn name(&self) -> &str {
        "grad_cam"
    }
    fn explain(&self, model: &Model, x: &Tensor, target_class: usize, _seed: u64) -> Result<AttributionMap> {
        grad_cam(model, x, target_class, self.conv_layer_idx, self.upsampling)
    }
}
