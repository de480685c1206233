//! Run configuration: one JSON document naming the model, the data, the
//! explainers with their options, and every determinism knob.
//!
//! Everything that influences numbers lives in the file (or the --seed
//! override); nothing is read from the clock or the environment, so two
//! runs of the same config are byte-identical.

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::Value;

use crate::attrib::image::{
    GradCamExplainer, GradInputMapExplainer, IntegratedGradientsMapExplainer, OcclusionExplainer,
    SaliencyMapExplainer, SmoothGradExplainer, Upsampling,
};
use crate::attrib::tabular::{
    ExactShapleyExplainer, FeatureAblationExplainer, GradXInputExplainer,
    IntegratedGradientsExplainer, KernelShapExplainer, LimeExplainer, SaliencyExplainer,
};
use crate::attrib::{Background, ImageExplainer, TabularExplainer};
use crate::error::{Error, Result};
use crate::metrics::{Granularity, ImageMetricsConfig, MetricsConfig, RegionPerturbation};

/// Method identifiers that explain one flat feature vector.
pub const TABULAR_METHODS: &[&str] = &[
    "exact_shapley",
    "kernel_shap",
    "lime",
    "integrated_gradients",
    "saliency",
    "grad_x_input",
    "feature_ablation",
];

/// Method identifiers that explain a channels-first image.
pub const IMAGE_METHODS: &[&str] = &[
    "saliency_map",
    "grad_input_map",
    "integrated_gradients_map",
    "smoothgrad",
    "occlusion_sensitivity",
    "grad_cam",
];

fn all_methods() -> String {
    TABULAR_METHODS
        .iter()
        .chain(IMAGE_METHODS)
        .copied()
        .collect::<Vec<_>>()
        .join(", ")
}

/// Declared prediction task; checked against the model's class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    BinaryClassification,
    MulticlassClassification,
    Regression,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::BinaryClassification => "binary-classification",
            Task::MulticlassClassification => "multiclass-classification",
            Task::Regression => "regression",
        }
    }

    /// Whether a model with `n_classes` outputs plausibly serves this task.
    pub fn matches_class_count(self, n_classes: usize) -> bool {
        match self {
            Task::BinaryClassification => n_classes == 2,
            Task::MulticlassClassification => n_classes >= 2,
            Task::Regression => n_classes == 1,
        }
    }
}

/// What the model scores mean: class probabilities (default), or raw
/// pre-softmax scores (the trailing softmax is stripped before any
/// attribution or metric touches the model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSpace {
    #[default]
    Probability,
    Logit,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum AllTag {
    #[serde(rename = "all")]
    All,
}

/// Which dataset rows get explained and scored.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InstanceSelection {
    All(AllTag),
    Indices { indices: Vec<usize> },
    Head { head: usize },
}

impl Default for InstanceSelection {
    fn default() -> Self {
        InstanceSelection::All(AllTag::All)
    }
}

impl InstanceSelection {
    /// Concrete dataset row indices, ascending for `all`/`head`, given
    /// order for explicit indices. Out-of-range indices are rejected by
    /// name.
    pub fn resolve(&self, n_rows: usize) -> Result<Vec<usize>> {
        match self {
            InstanceSelection::All(_) => Ok((0..n_rows).collect()),
            InstanceSelection::Head { head } => Ok((0..n_rows.min(*head)).collect()),
            InstanceSelection::Indices { indices } => {
                if indices.is_empty() {
                    return Err(Error::param("instance selection is empty"));
                }
                for &i in indices {
                    if i >= n_rows {
                        return Err(Error::param(format!(
                            "instance index {i} out of range (dataset has {n_rows} rows)"
                        )));
                    }
                }
                Ok(indices.clone())
            }
        }
    }
}

/// CSV ingestion switches, mirroring [`crate::io::CsvOptions`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataOptions {
    pub has_header: bool,
    pub label_column: Option<String>,
    pub allow_missing: bool,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label_column: None,
            allow_missing: false,
        }
    }
}

/// Metric knobs shared by evaluate and benchmark; the image-only fields
/// are ignored for tabular runs and vice versa.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricOptions {
    pub top_k: Option<usize>,
    pub zero_tol: f64,
    pub infidelity_sigma: f64,
    pub infidelity_draws: usize,
    pub sensitivity_sigma: f64,
    pub faithfulness_gaussian_sigma: Option<f64>,
    pub sufficiency_zero_baseline: bool,
    pub baseline: Option<Vec<f64>>,
    /// "pixel" or "patch".
    pub granularity: String,
    pub patch_size: [usize; 2],
    /// "black", "mean", or "gaussian".
    pub region_perturbation: String,
    pub region_sigma: f64,
    pub max_regions: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            top_k: None,
            zero_tol: 1e-12,
            infidelity_sigma: 0.1,
            infidelity_draws: 32,
            sensitivity_sigma: 0.01,
            faithfulness_gaussian_sigma: None,
            sufficiency_zero_baseline: false,
            baseline: None,
            granularity: "patch".into(),
            patch_size: [4, 4],
            region_perturbation: "black".into(),
            region_sigma: 0.1,
            max_regions: 256,
        }
    }
}

impl MetricOptions {
    pub fn to_tabular_config(&self, seed: u64) -> MetricsConfig {
        MetricsConfig {
            seed,
            top_k: self.top_k,
            zero_tol: self.zero_tol,
            infidelity_sigma: self.infidelity_sigma,
            infidelity_draws: self.infidelity_draws,
            sensitivity_sigma: self.sensitivity_sigma,
            faithfulness_gaussian_sigma: self.faithfulness_gaussian_sigma,
            sufficiency_zero_baseline: self.sufficiency_zero_baseline,
            baseline: self.baseline.clone(),
        }
    }

    pub fn to_image_config(&self, seed: u64) -> Result<ImageMetricsConfig> {
        let granularity = match self.granularity.as_str() {
            "pixel" => Granularity::Pixel,
            "patch" => Granularity::Patch {
                h: self.patch_size[0],
                w: self.patch_size[1],
            },
            other => {
                return Err(Error::param(format!(
                    "unknown granularity {other:?}; valid options: pixel, patch"
                )))
            }
        };
        let perturbation = match self.region_perturbation.as_str() {
            "black" => RegionPerturbation::BlackBaseline,
            "mean" => RegionPerturbation::MeanBaseline,
            "gaussian" => RegionPerturbation::Gaussian {
                sigma: self.region_sigma,
            },
            other => {
                return Err(Error::param(format!(
                    "unknown region perturbation {other:?}; valid options: black, mean, gaussian"
                )))
            }
        };
        Ok(ImageMetricsConfig {
            seed,
            granularity,
            perturbation,
            max_regions: self.max_regions,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct KernelShapOpts {
    n_coalitions: usize,
}

impl Default for KernelShapOpts {
    fn default() -> Self {
        Self { n_coalitions: 2048 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LimeOpts {
    n_samples: usize,
    kernel_width: Option<f64>,
    ridge: f64,
}

impl Default for LimeOpts {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            kernel_width: None,
            ridge: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct StepsOpts {
    steps: usize,
}

impl Default for StepsOpts {
    fn default() -> Self {
        Self { steps: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SmoothGradOpts {
    n_samples: usize,
    sigma: f64,
}

impl Default for SmoothGradOpts {
    fn default() -> Self {
        Self {
            n_samples: 25,
            sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OcclusionOpts {
    patch_size: [usize; 2],
    stride: Option<[usize; 2]>,
    baseline_value: f64,
}

impl Default for OcclusionOpts {
    fn default() -> Self {
        Self {
            patch_size: [4, 4],
            stride: None,
            baseline_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GradCamOpts {
    conv_layer_idx: Option<usize>,
    /// "bilinear" or "nearest".
    upsampling: String,
}

impl Default for GradCamOpts {
    fn default() -> Self {
        Self {
            conv_layer_idx: None,
            upsampling: "bilinear".into(),
        }
    }
}

/// One entry of the config's `explainers` list: a method identifier plus
/// that method's options, already validated field-by-field.
#[derive(Debug, Clone)]
pub enum ExplainerConfig {
    ExactShapley,
    KernelShap {
        n_coalitions: usize,
    },
    Lime {
        n_samples: usize,
        kernel_width: Option<f64>,
        ridge: f64,
    },
    IntegratedGradients {
        steps: usize,
    },
    Saliency,
    GradXInput,
    FeatureAblation,
    SaliencyMap,
    GradInputMap,
    IntegratedGradientsMap {
        steps: usize,
    },
    SmoothGrad {
        n_samples: usize,
        sigma: f64,
    },
    Occlusion {
        patch_size: (usize, usize),
        stride: (usize, usize),
        baseline_value: f64,
    },
    GradCam {
        conv_layer_idx: Option<usize>,
        upsampling: Upsampling,
    },
}

impl ExplainerConfig {
    fn from_value(value: Value) -> std::result::Result<Self, String> {
        let Value::Object(mut obj) = value else {
            return Err("explainer entry must be a JSON object".into());
        };
        let method = match obj.remove("method") {
            Some(Value::String(m)) => m,
            Some(_) => return Err("explainer \"method\" must be a string".into()),
            None => return Err("explainer entry is missing \"method\"".into()),
        };
        let rest = Value::Object(obj);
        fn opts<T: serde::de::DeserializeOwned>(
            method: &str,
            rest: Value,
        ) -> std::result::Result<T, String> {
            serde_json::from_value(rest).map_err(|e| format!("{method} options: {e}"))
        }
        match method.as_str() {
            "exact_shapley" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::ExactShapley)
            }
            "kernel_shap" => {
                let o: KernelShapOpts = opts(&method, rest)?;
                Ok(ExplainerConfig::KernelShap {
                    n_coalitions: o.n_coalitions,
                })
            }
            "lime" => {
                let o: LimeOpts = opts(&method, rest)?;
                Ok(ExplainerConfig::Lime {
                    n_samples: o.n_samples,
                    kernel_width: o.kernel_width,
                    ridge: o.ridge,
                })
            }
            "integrated_gradients" => {
                let o: StepsOpts = opts(&method, rest)?;
                Ok(ExplainerConfig::IntegratedGradients { steps: o.steps })
            }
            "saliency" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::Saliency)
            }
            "grad_x_input" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::GradXInput)
            }
            "feature_ablation" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::FeatureAblation)
            }
            "saliency_map" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::SaliencyMap)
            }
            "grad_input_map" => {
                opts::<NoOpts>(&method, rest)?;
                Ok(ExplainerConfig::GradInputMap)
            }
            "integrated_gradients_map" => {
                let o: StepsOpts = opts(&method, rest)?;
                Ok(ExplainerConfig::IntegratedGradientsMap { steps: o.steps })
            }
            "smoothgrad" => {
                let o: SmoothGradOpts = opts(&method, rest)?;
                Ok(ExplainerConfig::SmoothGrad {
                    n_samples: o.n_samples,
                    sigma: o.sigma,
                })
            }
            "occlusion_sensitivity" => {
                let o: OcclusionOpts = opts(&method, rest)?;
                let patch = (o.patch_size[0], o.patch_size[1]);
                let stride = o.stride.map_or(patch, |s| (s[0], s[1]));
                Ok(ExplainerConfig::Occlusion {
                    patch_size: patch,
                    stride,
                    baseline_value: o.baseline_value,
                })
            }
            "grad_cam" => {
                let o: GradCamOpts = opts(&method, rest)?;
                let upsampling = match o.upsampling.as_str() {
                    "bilinear" => Upsampling::Bilinear,
                    "nearest" => Upsampling::Nearest,
                    other => {
                        return Err(format!(
                            "grad_cam upsampling {other:?} unknown; valid options: bilinear, nearest"
                        ))
                    }
                };
                Ok(ExplainerConfig::GradCam {
                    conv_layer_idx: o.conv_layer_idx,
                    upsampling,
                })
            }
            other => Err(format!(
                "unknown method {other:?}; valid methods: {}",
                all_methods()
            )),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            ExplainerConfig::ExactShapley => "exact_shapley",
            ExplainerConfig::KernelShap { .. } => "kernel_shap",
            ExplainerConfig::Lime { .. } => "lime",
            ExplainerConfig::IntegratedGradients { .. } => "integrated_gradients",
            ExplainerConfig::Saliency => "saliency",
            ExplainerConfig::GradXInput => "grad_x_input",
            ExplainerConfig::FeatureAblation => "feature_ablation",
            ExplainerConfig::SaliencyMap => "saliency_map",
            ExplainerConfig::GradInputMap => "grad_input_map",
            ExplainerConfig::IntegratedGradientsMap { .. } => "integrated_gradients_map",
            ExplainerConfig::SmoothGrad { .. } => "smoothgrad",
            ExplainerConfig::Occlusion { .. } => "occlusion_sensitivity",
            ExplainerConfig::GradCam { .. } => "grad_cam",
        }
    }

    pub fn is_image(&self) -> bool {
        IMAGE_METHODS.contains(&self.method_name())
    }

    /// Instantiate a tabular explainer; backgrounds and baselines come
    /// from the dataset the caller resolved.
    pub fn build_tabular(&self, background: &Background) -> Result<Box<dyn TabularExplainer>> {
        if self.is_image() {
            return Err(Error::param(format!(
                "method {:?} works on images, but this run is tabular; valid tabular methods: {}",
                self.method_name(),
                TABULAR_METHODS.join(", ")
            )));
        }
        Ok(match self.clone() {
            ExplainerConfig::ExactShapley => Box::new(ExactShapleyExplainer {
                background: background.clone(),
            }),
            ExplainerConfig::KernelShap { n_coalitions } => Box::new(KernelShapExplainer {
                background: background.clone(),
                n_coalitions,
            }),
            ExplainerConfig::Lime {
                n_samples,
                kernel_width,
                ridge,
            } => Box::new(LimeExplainer {
                background: background.clone(),
                n_samples,
                kernel_width,
                ridge,
            }),
            ExplainerConfig::IntegratedGradients { steps } => {
                Box::new(IntegratedGradientsExplainer {
                    baseline: background.baseline().to_vec(),
                    steps,
                })
            }
            ExplainerConfig::Saliency => Box::new(SaliencyExplainer),
            ExplainerConfig::GradXInput => Box::new(GradXInputExplainer),
            ExplainerConfig::FeatureAblation => Box::new(FeatureAblationExplainer {
                baseline: background.baseline().to_vec(),
            }),
            _ => unreachable!("image methods rejected above"),
        })
    }

    /// Instantiate an image explainer.
    pub fn build_image(&self) -> Result<Box<dyn ImageExplainer>> {
        if !self.is_image() {
            return Err(Error::param(format!(
                "method {:?} works on tabular data, but this run is image; valid image methods: {}",
                self.method_name(),
                IMAGE_METHODS.join(", ")
            )));
        }
        Ok(match self.clone() {
            ExplainerConfig::SaliencyMap => Box::new(SaliencyMapExplainer),
            ExplainerConfig::GradInputMap => Box::new(GradInputMapExplainer),
            ExplainerConfig::IntegratedGradientsMap { steps } => {
                Box::new(IntegratedGradientsMapExplainer {
                    baseline: None,
                    steps,
                })
            }
            ExplainerConfig::SmoothGrad { n_samples, sigma } => {
                Box::new(SmoothGradExplainer { n_samples, sigma })
            }
            ExplainerConfig::Occlusion {
                patch_size,
                stride,
                baseline_value,
            } => Box::new(OcclusionExplainer {
                patch_size,
                stride,
                baseline_value,
            }),
            ExplainerConfig::GradCam {
                conv_layer_idx,
                upsampling,
            } => Box::new(GradCamExplainer {
                conv_layer_idx,
                upsampling,
            }),
            _ => unreachable!("tabular methods rejected above"),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoOpts {}

impl<'de> Deserialize<'de> for ExplainerConfig {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let value = Value::deserialize(deserializer)?;
        ExplainerConfig::from_value(value).map_err(serde::de::Error::custom)
    }
}

/// Data modality of a run, fixed by the model's input rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Tabular,
    Image,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Tabular => "tabular",
            Modality::Image => "image",
        }
    }
}

/// The whole run configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model_path: PathBuf,
    pub data_path: PathBuf,
    pub task: Task,
    pub seed: u64,
    pub explainers: Vec<ExplainerConfig>,
    /// Subset of metric columns to emit; all of them when absent.
    #[serde(default)]
    pub metrics: Option<Vec<String>>,
    #[serde(default)]
    pub instances: InstanceSelection,
    #[serde(default)]
    pub score_space: ScoreSpace,
    #[serde(default)]
    pub data: DataOptions,
    #[serde(default)]
    pub options: MetricOptions,
    /// Cap on background rows for shapley/lime (first rows of the
    /// dataset); whole dataset when absent.
    #[serde(default)]
    pub background_size: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::schema("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.explainers.is_empty() {
            return Err(Error::schema("config.explainers", "at least one explainer is required"));
        }
        let image_count = self.explainers.iter().filter(|e| e.is_image()).count();
        if image_count != 0 && image_count != self.explainers.len() {
            return Err(Error::schema(
                "config.explainers",
                "tabular and image methods cannot be mixed in one run",
            ));
        }
        if self.background_size == Some(0) {
            return Err(Error::schema("config.background_size", "must be at least 1"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.explainers {
            if !seen.insert(e.method_name()) {
                return Err(Error::schema(
                    "config.explainers",
                    format!("method {:?} appears more than once", e.method_name()),
                ));
            }
        }
        Ok(())
    }

    /// Modality implied by the explainer list.
    pub fn modality(&self) -> Modality {
        if self.explainers.first().is_some_and(|e| e.is_image()) {
            Modality::Image
        } else {
            Modality::Tabular
        }
    }
}

/// Indices of the requested metric columns within the canonical column
/// order (which is preserved regardless of request order).
pub fn select_metric_columns(
    all_columns: &[&str],
    requested: &Option<Vec<String>>,
) -> Result<Vec<usize>> {
    let Some(names) = requested else {
        return Ok((0..all_columns.len()).collect());
    };
    if names.is_empty() {
        return Err(Error::schema("config.metrics", "metric list is empty"));
    }
    for name in names {
        if !all_columns.contains(&name.as_str()) {
            return Err(Error::schema(
                "config.metrics",
                format!(
                    "unknown metric {name:?}; valid metrics: {}",
                    all_columns.join(", ")
                ),
            ));
        }
    }
    Ok((0..all_columns.len())
        .filter(|&i| names.iter().any(|n| n == all_columns[i]))
        .collect())
}
