//! On-disk formats: CSV datasets, NPY-subset tensor files, versioned JSON
//! model documents, report emitters, and PGM map renders.

pub mod csv;
pub mod model_doc;
pub mod npy;
pub mod pgm;
pub mod report;

pub use self::csv::{load_csv, CsvOptions};
pub use model_doc::{load_model, model_from_json, model_to_json, save_model};
pub use npy::{load_tensor, save_tensor, Dtype, TensorFile};
pub use pgm::save_pgm;
pub use report::{Cell, ReportFormat, Table};

use crate::error::{Error, Result};

/// A feature matrix with column names and an optional label column.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub features: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<i64>>,
}

impl TabularDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        labels: Option<Vec<i64>>,
    ) -> Result<Self> {
        let n = feature_names.len();
        if let Some(row) = features.iter().find(|r| r.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: vec![n],
                got: vec![row.len()],
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != features.len() {
                return Err(Error::ShapeMismatch {
                    expected: vec![features.len()],
                    got: vec![labels.len()],
                });
            }
        }
        Ok(Self {
            features,
            feature_names,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}
