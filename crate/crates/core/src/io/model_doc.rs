//! Versioned JSON model documents.
//!
//! A document is a single object with `schema_version`, `family`, and the
//! family's payload fields inline. Unknown fields are rejected, and every
//! semantic failure (bad dimensions, tree cycles, softmax placement) comes
//! back as a SchemaViolation naming the offending field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Aggregation, DecisionTree, Layer, LinearModel, Model, SequentialNet, TreeEnsemble, TreeNode};
use crate::tensor::Tensor;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearDoc {
    n_features: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    #[serde(default)]
    softmax: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    n_features: usize,
    n_classes: usize,
    aggregation: String,
    trees: Vec<Vec<NodeDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernels: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    padding: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequentialDoc {
    input_shape: Vec<usize>,
    layers: Vec<LayerDoc>,
}

fn node_to_doc(node: &TreeNode) -> NodeDoc {
    match node {
        TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } => NodeDoc {
            kind: "internal".into(),
            feature: Some(*feature),
            threshold: Some(*threshold),
            left: Some(*left),
            right: Some(*right),
            values: None,
        },
        TreeNode::Leaf { values } => NodeDoc {
            kind: "leaf".into(),
            feature: None,
            threshold: None,
            left: None,
            right: None,
            values: Some(values.clone()),
        },
    }
}

fn node_from_doc(doc: &NodeDoc, path: &str) -> Result<TreeNode> {
    let field = |name: &str| format!("{path}.{name}");
    match doc.kind.as_str() {
        "internal" => {
            if doc.values.is_some() {
                return Err(Error::schema(field("values"), "not allowed on internal nodes"));
            }
            Ok(TreeNode::Internal {
                feature: doc
                    .feature
                    .ok_or_else(|| Error::schema(field("feature"), "missing"))?,
                threshold: doc
                    .threshold
                    .ok_or_else(|| Error::schema(field("threshold"), "missing"))?,
                left: doc.left.ok_or_else(|| Error::schema(field("left"), "missing"))?,
                right: doc
                    .right
                    .ok_or_else(|| Error::schema(field("right"), "missing"))?,
            })
        }
        "leaf" => {
            if doc.feature.is_some() || doc.threshold.is_some() || doc.left.is_some() || doc.right.is_some() {
                return Err(Error::schema(
                    field("kind"),
                    "leaf nodes carry only `values`",
                ));
            }
            Ok(TreeNode::Leaf {
                values: doc
                    .values
                    .clone()
                    .ok_or_else(|| Error::schema(field("values"), "missing"))?,
            })
        }
        other => Err(Error::schema(
            field("kind"),
            format!("unknown node kind {other:?} (expected internal | leaf)"),
        )),
    }
}

fn layer_to_doc(layer: &Layer) -> LayerDoc {
    let empty = LayerDoc {
        kind: layer.kind().into(),
        weights: None,
        kernels: None,
        bias: None,
        stride: None,
        padding: None,
        kernel: None,
    };
    match layer {
        Layer::Dense { weights, bias } => {
            let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
            let w = (0..rows)
                .map(|r| weights.data()[r * cols..(r + 1) * cols].to_vec())
                .collect();
            LayerDoc {
                weights: Some(w),
                bias: Some(bias.clone()),
                ..empty
            }
        }
        Layer::Conv2d {
            kernels,
            bias,
            stride,
            padding,
        } => {
            let (oc, ic, kh, kw) = (
                kernels.shape()[0],
                kernels.shape()[1],
                kernels.shape()[2],
                kernels.shape()[3],
            );
            let k = (0..oc)
                .map(|o| {
                    (0..ic)
                        .map(|i| {
                            (0..kh)
                                .map(|r| {
                                    let base = ((o * ic + i) * kh + r) * kw;
                                    kernels.data()[base..base + kw].to_vec()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            LayerDoc {
                kernels: Some(k),
                bias: Some(bias.clone()),
                stride: Some([stride.0, stride.1]),
                padding: Some([padding.0, padding.1]),
                ..empty
            }
        }
        Layer::MaxPool { kernel, stride } => LayerDoc {
            kernel: Some([kernel.0, kernel.1]),
            stride: Some([stride.0, stride.1]),
            ..empty
        },
        Layer::Relu | Layer::Flatten | Layer::Softmax => empty,
    }
}

fn layer_from_doc(doc: &LayerDoc, path: &str) -> Result<Layer> {
    let field = |name: &str| format!("{path}.{name}");
    let no_params = |doc: &LayerDoc| {
        doc.weights.is_none()
            && doc.kernels.is_none()
            && doc.bias.is_none()
            && doc.stride.is_none()
            && doc.padding.is_none()
            && doc.kernel.is_none()
    };
    match doc.kind.as_str() {
        "dense" => {
            let rows = doc
                .weights
                .as_ref()
                .ok_or_else(|| Error::schema(field("weights"), "missing"))?;
            if rows.is_empty() {
                return Err(Error::schema(field("weights"), "empty matrix"));
            }
            let cols = rows[0].len();
            if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                return Err(Error::schema(field("weights"), "rows must share a positive length"));
            }
            let data: Vec<f64> = rows.iter().flatten().cloned().collect();
            let weights = Tensor::new(vec![rows.len(), cols], data)
                .map_err(|e| Error::schema(field("weights"), e.to_string()))?;
            Ok(Layer::Dense {
                weights,
                bias: doc
                    .bias
                    .clone()
                    .ok_or_else(|| Error::schema(field("bias"), "missing"))?,
            })
        }
        "conv2d" => {
            let k = doc
                .kernels
                .as_ref()
                .ok_or_else(|| Error::schema(field("kernels"), "missing"))?;
            let oc = k.len();
            let ic = k.first().map(|v| v.len()).unwrap_or(0);
            let kh = k.first().and_then(|v| v.first()).map(|v| v.len()).unwrap_or(0);
            let kw = k
                .first()
                .and_then(|v| v.first())
                .and_then(|v| v.first())
                .map(|v| v.len())
                .unwrap_or(0);
            if oc == 0 || ic == 0 || kh == 0 || kw == 0 {
                return Err(Error::schema(field("kernels"), "empty kernel dimensions"));
            }
            let mut data = Vec::with_capacity(oc * ic * kh * kw);
            for (o, per_in) in k.iter().enumerate() {
                if per_in.len() != ic {
                    return Err(Error::schema(
                        format!("{path}.kernels[{o}]"),
                        "inconsistent input-channel count",
                    ));
                }
                for rows in per_in {
                    if rows.len() != kh || rows.iter().any(|r| r.len() != kw) {
                        return Err(Error::schema(
                            format!("{path}.kernels[{o}]"),
                            "inconsistent kernel window",
                        ));
                    }
                    for r in rows {
                        data.extend_from_slice(r);
                    }
                }
            }
            let stride = doc.stride.unwrap_or([1, 1]);
            let padding = doc.padding.unwrap_or([0, 0]);
            Ok(Layer::Conv2d {
                kernels: Tensor::new(vec![oc, ic, kh, kw], data)
                    .map_err(|e| Error::schema(field("kernels"), e.to_string()))?,
                bias: doc
                    .bias
                    .clone()
                    .ok_or_else(|| Error::schema(field("bias"), "missing"))?,
                stride: (stride[0], stride[1]),
                padding: (padding[0], padding[1]),
            })
        }
        "maxpool" => {
            let kernel = doc
                .kernel
                .ok_or_else(|| Error::schema(field("kernel"), "missing"))?;
            let stride = doc.stride.unwrap_or(kernel);
            Ok(Layer::MaxPool {
                kernel: (kernel[0], kernel[1]),
                stride: (stride[0], stride[1]),
            })
        }
        "relu" | "flatten" | "softmax" => {
            if !no_params(doc) {
                return Err(Error::schema(
                    field("kind"),
                    format!("{} layers take no parameters", doc.kind),
                ));
            }
            Ok(match doc.kind.as_str() {
                "relu" => Layer::Relu,
                "flatten" => Layer::Flatten,
                _ => Layer::Softmax,
            })
        }
        other => Err(Error::schema(
            field("kind"),
            format!("unknown layer kind {other:?}"),
        )),
    }
}

/// Serialize a model to the document JSON (pretty-printed, stable field
/// order).
pub fn model_to_json(model: &Model) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), SCHEMA_VERSION.into());
    doc.insert("family".into(), model.family().into());
    let payload = match model {
        Model::Linear(m) => serde_json::to_value(LinearDoc {
            n_features: m.n_features(),
            weights: m.weights().to_vec(),
            bias: m.bias().to_vec(),
            softmax: m.has_softmax(),
        }),
        Model::Tree(m) => serde_json::to_value(TreeDoc {
            n_features: m.n_features(),
            n_classes: m.n_classes(),
            aggregation: match m.aggregation() {
                Aggregation::Sum => "sum".into(),
                Aggregation::Mean => "mean".into(),
            },
            trees: m
                .trees()
                .iter()
                .map(|t| t.nodes.iter().map(node_to_doc).collect())
                .collect(),
        }),
        Model::Sequential(m) => serde_json::to_value(SequentialDoc {
            input_shape: m.input_shape().to_vec(),
            layers: m.layers().iter().map(layer_to_doc).collect(),
        }),
    }
    .expect("document structs serialize infallibly");
    if let Value::Object(fields) = payload {
        for (k, v) in fields {
            doc.insert(k, v);
        }
    }
    serde_json::to_string_pretty(&Value::Object(doc)).expect("json encoding cannot fail") + "\n"
}

/// Parse and semantically validate a model document.
pub fn model_from_json(text: &str) -> Result<Model> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::schema("$", format!("not valid JSON: {e}")))?;
    let Value::Object(mut fields) = value else {
        return Err(Error::schema("$", "document must be a JSON object"));
    };
    let version = fields
        .remove("schema_version")
        .ok_or_else(|| Error::schema("schema_version", "missing"))?;
    if version.as_u64() != Some(SCHEMA_VERSION) {
        return Err(Error::schema(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {version}"),
        ));
    }
    let family = fields
        .remove("family")
        .and_then(|v| v.as_str().map(str::to_string))
        .ok_or_else(|| Error::schema("family", "missing or not a string"))?;
    let payload = Value::Object(fields);

    match family.as_str() {
        "linear" => {
            let doc: LinearDoc = serde_json::from_value(payload)
                .map_err(|e| Error::schema("linear", e.to_string()))?;
            if doc.weights.first().map(|w| w.len()) != Some(doc.n_features) {
                return Err(Error::schema(
                    "n_features",
                    "does not match the weight vector length",
                ));
            }
            Ok(Model::Linear(LinearModel::new(doc.weights, doc.bias, doc.softmax)?))
        }
        "tree-ensemble" => {
            let doc: TreeDoc = serde_json::from_value(payload)
                .map_err(|e| Error::schema("tree-ensemble", e.to_string()))?;
            let aggregation = match doc.aggregation.as_str() {
                "sum" => Aggregation::Sum,
                "mean" => Aggregation::Mean,
                other => {
                    return Err(Error::schema(
                        "aggregation",
                        format!("unknown aggregation {other:?} (expected sum | mean)"),
                    ))
                }
            };
            let mut trees = Vec::with_capacity(doc.trees.len());
            for (t, nodes) in doc.trees.iter().enumerate() {
                let nodes = nodes
                    .iter()
                    .enumerate()
                    .map(|(i, n)| node_from_doc(n, &format!("trees[{t}][{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                trees.push(DecisionTree { nodes });
            }
            Ok(Model::Tree(TreeEnsemble::new(
                trees,
                aggregation,
                doc.n_features,
                doc.n_classes,
            )?))
        }
        "sequential-net" => {
            let doc: SequentialDoc = serde_json::from_value(payload)
                .map_err(|e| Error::schema("sequential-net", e.to_string()))?;
            let layers = doc
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| layer_from_doc(l, &format!("layers[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Model::Sequential(SequentialNet::new(doc.input_shape, layers)?))
        }
        other => Err(Error::schema(
            "family",
            format!("unknown family {other:?} (expected linear | tree-ensemble | sequential-net)"),
        )),
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}
