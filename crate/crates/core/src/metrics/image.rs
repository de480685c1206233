//! The six image attribution metrics, evaluated over perturbed regions.
//!
//! A region is a pixel or a clipped patch tile; its attribution is the sum
//! of the map over the region. Every metric perturbs one region at a time
//! and watches the target-class output move.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::attrib::{AttributionMap, ImageExplainer};
use crate::error::{Error, Result};
use crate::metrics::nan_excluding_mean;
use crate::model::Model;
use crate::seed::{derive_seed, purpose_id, rng_from};
use crate::tensor::Tensor;

/// Region granularity: single pixels or a patch tiling (edge tiles are
/// clipped to the image).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Pixel,
    Patch { h: usize, w: usize },
}

/// How a region is replaced or disturbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionPerturbation {
    BlackBaseline,
    /// Replace with the image's per-channel mean.
    MeanBaseline,
    /// Add iid N(0, sigma^2) noise to the region.
    Gaussian { sigma: f64 },
}

/// Region sampling plan for one metric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub granularity: Granularity,
    pub perturbation: RegionPerturbation,
    /// Upper bound on evaluated regions; a uniform seeded subsample is
    /// drawn when the tiling exceeds it.
    pub max_regions: usize,
    pub seed: u64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            granularity: Granularity::Patch { h: 4, w: 4 },
            perturbation: RegionPerturbation::BlackBaseline,
            max_regions: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    r: usize,
    c: usize,
    h: usize,
    w: usize,
}

fn build_regions(h: usize, w: usize, granularity: Granularity) -> Result<Vec<Rect>> {
    let (ph, pw) = match granularity {
        Granularity::Pixel => (1, 1),
        Granularity::Patch { h: ph, w: pw } => {
            if ph == 0 || pw == 0 {
                return Err(Error::param("patch dimensions must be positive"));
            }
            (ph, pw)
        }
    };
    if ph > h || pw > w {
        return Err(Error::PatchLargerThanImage {
            patch: (ph, pw),
            image: (h, w),
        });
    }
    let mut out = Vec::new();
    let mut r = 0;
    while r < h {
        let mut c = 0;
        while c < w {
            out.push(Rect {
                r,
                c,
                h: ph.min(h - r),
                w: pw.min(w - c),
            });
            c += pw;
        }
        r += ph;
    }
    Ok(out)
}

/// Keep at most `max` regions, chosen uniformly without replacement and
/// returned in tiling order. Consumes no randomness when the cap is not
/// binding, so capped == exhaustive whenever max >= total.
fn subsample(regions: Vec<Rect>, max: usize, rng: &mut ChaCha8Rng) -> Vec<Rect> {
    if regions.len() <= max {
        return regions;
    }
    let mut idx: Vec<usize> = (0..regions.len()).collect();
    for i in 0..max {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx.truncate(max);
    idx.sort_unstable();
    idx.into_iter().map(|i| regions[i]).collect()
}

fn channel_means(x: &Tensor) -> Vec<f64> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    (0..c)
        .map(|ch| {
            let mut acc = 0.0;
            for i in 0..h {
                for j in 0..w {
                    acc += x.at3(ch, i, j);
                }
            }
            acc / (h * w) as f64
        })
        .collect()
}

/// |f(x) - f(x with one region perturbed)| for each region, in order.
fn region_deltas(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    regions: &[Rect],
    perturbation: RegionPerturbation,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let means = match perturbation {
        RegionPerturbation::MeanBaseline => channel_means(x),
        _ => Vec::new(),
    };
    let fx = model.target_score(x, target_class)?;
    let mut patched = x.clone();
    let mut deltas = Vec::with_capacity(regions.len());
    for rect in regions {
        for ch in 0..c {
            for i in rect.r..rect.r + rect.h {
                for j in rect.c..rect.c + rect.w {
                    let pos = ch * h * w + i * w + j;
                    patched.data_mut()[pos] = match perturbation {
                        RegionPerturbation::BlackBaseline => 0.0,
                        RegionPerturbation::MeanBaseline => means[ch],
                        RegionPerturbation::Gaussian { sigma } => {
                            let eps: f64 = StandardNormal.sample(rng);
                            x.at3(ch, i, j) + eps * sigma
                        }
                    };
                }
            }
        }
        deltas.push((fx - model.target_score(&patched, target_class)?).abs());
        for ch in 0..c {
            for i in rect.r..rect.r + rect.h {
                for j in rect.c..rect.c + rect.w {
                    patched.data_mut()[ch * h * w + i * w + j] = x.at3(ch, i, j);
                }
            }
        }
    }
    Ok(deltas)
}

fn region_attr(map: &AttributionMap, rect: &Rect) -> f64 {
    let mut acc = 0.0;
    for i in rect.r..rect.r + rect.h {
        for j in rect.c..rect.c + rect.w {
            acc += map.values.at2(i, j);
        }
    }
    acc
}

fn check_image(model: &Model, x: &Tensor) -> Result<(usize, usize)> {
    let shape = model.input_shape();
    if shape != x.shape() || shape.len() != 3 {
        return Err(Error::ShapeMismatch {
            expected: shape,
            got: x.shape().to_vec(),
        });
    }
    Ok((shape[1], shape[2]))
}

fn check_map(x: &Tensor, map: &AttributionMap) -> Result<()> {
    if map.values.shape() != [x.shape()[1], x.shape()[2]] {
        return Err(Error::ShapeMismatch {
            expected: vec![x.shape()[1], x.shape()[2]],
            got: map.values.shape().to_vec(),
        });
    }
    Ok(())
}

fn prepared_regions(
    model: &Model,
    x: &Tensor,
    rspec: &RegionSpec,
) -> Result<(Vec<Rect>, ChaCha8Rng)> {
    let (h, w) = check_image(model, x)?;
    if rspec.max_regions == 0 {
        return Err(Error::param("max_regions must be >= 1"));
    }
    let mut rng = rng_from(rspec.seed);
    let regions = subsample(build_regions(h, w, rspec.granularity)?, rspec.max_regions, &mut rng);
    Ok((regions, rng))
}

/// Σ |Δf_i|·|a_i| / Σ |a_i| over regions; NaN when the map is all zero on
/// the sampled regions.
pub fn faithfulness_correlation(
    model: &Model,
    x: &Tensor,
    map: &AttributionMap,
    rspec: &RegionSpec,
) -> Result<f64> {
    check_map(x, map)?;
    let (regions, mut rng) = prepared_regions(model, x, rspec)?;
    let attrs: Vec<f64> = regions.iter().map(|r| region_attr(map, r).abs()).collect();
    let total: f64 = attrs.iter().sum();
    if total == 0.0 {
        return Ok(f64::NAN);
    }
    let deltas = region_deltas(model, x, map.target_class, &regions, rspec.perturbation, &mut rng)?;
    Ok(deltas.iter().zip(&attrs).map(|(d, a)| d * a).sum::<f64>() / total)
}

/// Largest per-region output response.
pub fn max_sensitivity(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    rspec: &RegionSpec,
) -> Result<f64> {
    let (regions, mut rng) = prepared_regions(model, x, rspec)?;
    let deltas = region_deltas(model, x, target_class, &regions, rspec.perturbation, &mut rng)?;
    Ok(deltas.iter().cloned().fold(0.0, f64::max))
}

/// Mean per-region output response.
pub fn avg_sensitivity(
    model: &Model,
    x: &Tensor,
    target_class: usize,
    rspec: &RegionSpec,
) -> Result<f64> {
    let (regions, mut rng) = prepared_regions(model, x, rspec)?;
    let deltas = region_deltas(model, x, target_class, &regions, rspec.perturbation, &mut rng)?;
    Ok(deltas.iter().sum::<f64>() / deltas.len() as f64)
}

/// Mean |f(x) - f(x_i')| over regions (this engine's perturbation-response
/// reading of the name; not the parameter-randomization test from the
/// sanity-check literature).
pub fn mprt(model: &Model, x: &Tensor, target_class: usize, rspec: &RegionSpec) -> Result<f64> {
    avg_sensitivity(model, x, target_class, rspec)
}

/// Mean |Δf_i| / (1 + |a_i|); equals [`mprt`] for a zero map and never
/// exceeds it.
pub fn smooth_mprt(
    model: &Model,
    x: &Tensor,
    map: &AttributionMap,
    rspec: &RegionSpec,
) -> Result<f64> {
    check_map(x, map)?;
    let (regions, mut rng) = prepared_regions(model, x, rspec)?;
    let deltas = region_deltas(model, x, map.target_class, &regions, rspec.perturbation, &mut rng)?;
    Ok(regions
        .iter()
        .zip(&deltas)
        .map(|(r, d)| d / (1.0 + region_attr(map, r).abs()))
        .sum::<f64>()
        / regions.len() as f64)
}

/// Mean |Δf_i|·|a_i| with the region always replaced by the black
/// baseline, whatever perturbation the region spec configures.
pub fn faithfulness_estimate(
    model: &Model,
    x: &Tensor,
    map: &AttributionMap,
    rspec: &RegionSpec,
) -> Result<f64> {
    check_map(x, map)?;
    let (regions, mut rng) = prepared_regions(model, x, rspec)?;
    let deltas = region_deltas(
        model,
        x,
        map.target_class,
        &regions,
        RegionPerturbation::BlackBaseline,
        &mut rng,
    )?;
    Ok(regions
        .iter()
        .zip(&deltas)
        .map(|(r, d)| d * region_attr(map, r).abs())
        .sum::<f64>()
        / regions.len() as f64)
}

pub const IMAGE_METRIC_COLUMNS: [&str; 6] = [
    "faithfulness_correlation",
    "max_sensitivity",
    "mprt",
    "smooth_mprt",
    "avg_sensitivity",
    "faithfulness_estimate",
];

/// One image's metric values, in report column order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImageMetricRow {
    pub faithfulness_correlation: f64,
    pub max_sensitivity: f64,
    pub mprt: f64,
    pub smooth_mprt: f64,
    pub avg_sensitivity: f64,
    pub faithfulness_estimate: f64,
}

impl ImageMetricRow {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.faithfulness_correlation,
            self.max_sensitivity,
            self.mprt,
            self.smooth_mprt,
            self.avg_sensitivity,
            self.faithfulness_estimate,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            faithfulness_correlation: a[0],
            max_sensitivity: a[1],
            mprt: a[2],
            smooth_mprt: a[3],
            avg_sensitivity: a[4],
            faithfulness_estimate: a[5],
        }
    }
}

/// Batch result over an image stack.
#[derive(Debug, Clone, Serialize)]
pub struct ImageMetricsReport {
    pub per_instance: Vec<ImageMetricRow>,
    pub aggregate: ImageMetricRow,
    pub excluded: [usize; 6],
}

/// Knobs for [`calculate_image_metrics`].
#[derive(Debug, Clone)]
pub struct ImageMetricsConfig {
    pub seed: u64,
    pub granularity: Granularity,
    pub perturbation: RegionPerturbation,
    pub max_regions: usize,
}

impl Default for ImageMetricsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            granularity: Granularity::Patch { h: 4, w: 4 },
            perturbation: RegionPerturbation::BlackBaseline,
            max_regions: 256,
        }
    }
}

/// Per-image scoring shared by the batch entry point and external batch
/// drivers that need per-instance failure isolation.
pub struct ImageMetricEngine<'a> {
    model: &'a Model,
    images: &'a [Tensor],
    config: &'a ImageMetricsConfig,
}

impl<'a> ImageMetricEngine<'a> {
    pub fn new(
        model: &'a Model,
        images: &'a [Tensor],
        config: &'a ImageMetricsConfig,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            model,
            images,
            config,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.images.len()
    }

    /// All six metrics for one image; they share one region sample and one
    /// perturbation stream, so the row-level order relations
    /// (max >= avg, smooth_mprt <= mprt) hold exactly.
    pub fn row(&self, explainer: &dyn ImageExplainer, idx: usize) -> Result<ImageMetricRow> {
        let x = self
            .images
            .get(idx)
            .ok_or_else(|| Error::param(format!("instance index {idx} out of range")))?;
        let model = self.model;
        let config = self.config;
        let class = model.predict(x)?.predicted_class;
        let explain_seed = derive_seed(config.seed, &[idx as u64, purpose_id(explainer.name())]);
        let map = explainer.explain(model, x, class, explain_seed)?;
        let rspec = RegionSpec {
            granularity: config.granularity,
            perturbation: config.perturbation,
            max_regions: config.max_regions,
            seed: derive_seed(config.seed, &[idx as u64, purpose_id("metric:image")]),
        };
        Ok(ImageMetricRow {
            faithfulness_correlation: faithfulness_correlation(model, x, &map, &rspec)?,
            max_sensitivity: max_sensitivity(model, x, class, &rspec)?,
            mprt: mprt(model, x, class, &rspec)?,
            smooth_mprt: smooth_mprt(model, x, &map, &rspec)?,
            avg_sensitivity: avg_sensitivity(model, x, class, &rspec)?,
            faithfulness_estimate: faithfulness_estimate(model, x, &map, &rspec)?,
        })
    }
}

/// Average per-instance rows column-wise, skipping NaNs and counting them.
pub fn aggregate_image_rows(per_instance: &[ImageMetricRow]) -> (ImageMetricRow, [usize; 6]) {
    let mut agg = [0.0; 6];
    let mut excluded = [0usize; 6];
    for c in 0..6 {
        let (mean, ex) = nan_excluding_mean(per_instance.iter().map(|r| r.as_array()[c]));
        agg[c] = mean;
        excluded[c] = ex;
    }
    (ImageMetricRow::from_array(agg), excluded)
}

/// Explain and score every image in parallel; deterministic for any thread
/// count because every random stream derives from (seed, index, purpose).
pub fn calculate_image_metrics(
    model: &Model,
    explainer: &dyn ImageExplainer,
    images: &[Tensor],
    config: &ImageMetricsConfig,
) -> Result<ImageMetricsReport> {
    let engine = ImageMetricEngine::new(model, images, config)?;
    let per_instance: Vec<ImageMetricRow> = (0..engine.n_instances())
        .into_par_iter()
        .map(|idx| engine.row(explainer, idx))
        .collect::<Result<_>>()?;
    let (aggregate, excluded) = aggregate_image_rows(&per_instance);
    Ok(ImageMetricsReport {
        per_instance,
        aggregate,
        excluded,
    })
}
