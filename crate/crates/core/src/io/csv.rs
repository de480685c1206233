//! CSV dataset loading: RFC-4180 input, numeric cells, optional header and
//! label column, and opt-in mean imputation for missing cells.

use std::path::Path;

use crate::attrib::default_feature_names;
use crate::error::{Error, Result};
use crate::io::TabularDataset;

/// Loader settings; the default expects a header and complete data.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Column to split off as integer labels: a name when there is a
    /// header, a 0-based index otherwise.
    pub label_column: Option<String>,
    /// Impute missing cells (empty or literal NaN) with the column mean
    /// instead of rejecting them.
    pub allow_missing: bool,
}

fn map_csv_error(err: ::csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    let msg = err.to_string();
    match err.into_kind() {
        ::csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::RaggedRow {
            line: pos.as_ref().map(|p| p.line() as usize).unwrap_or(0),
            expected: expected_len as usize,
            got: len as usize,
        },
        ::csv::ErrorKind::Io(io_err) => Error::Io(io_err),
        _ => Error::CsvParse {
            line,
            column: 0,
            msg,
        },
    }
}

fn parse_cell(raw: &str, line: usize, column: usize, allow_missing: bool) -> Result<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        if allow_missing {
            return Ok(f64::NAN);
        }
        return Err(Error::NonNumericCell {
            line,
            column,
            value: raw.to_string(),
        });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_nan() && !allow_missing => Err(Error::NonNumericCell {
            line,
            column,
            value: raw.to_string(),
        }),
        Ok(v) => Ok(v),
        Err(_) => Err(Error::NonNumericCell {
            line,
            column,
            value: raw.to_string(),
        }),
    }
}

/// Load a dataset. Column names come from the header, or are synthesized
/// as f0..f{n-1}; the label column, if named, is removed from the features
/// and parsed as integers.
pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<TabularDataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(false)
        .from_path(path)
        .map_err(map_csv_error)?;

    let header: Option<Vec<String>> = if options.has_header {
        Some(
            reader
                .headers()
                .map_err(map_csv_error)?
                .iter()
                .map(|s| s.trim().to_string())
                .collect(),
        )
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut label_idx: Option<usize> = None;
    let mut n_columns: Option<usize> = None;

    if let Some(spec) = &options.label_column {
        label_idx = Some(match &header {
            Some(names) => names
                .iter()
                .position(|n| n == spec)
                .ok_or_else(|| Error::param(format!("label column {spec:?} not in header")))?,
            None => spec
                .parse::<usize>()
                .map_err(|_| Error::param(format!("label column {spec:?} is not an index")))?,
        });
    }

    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let width = record.len();
        if let Some(idx) = label_idx {
            if idx >= width {
                return Err(Error::param(format!(
                    "label column index {idx} out of range for {width} columns"
                )));
            }
        }
        match n_columns {
            None => n_columns = Some(width),
            Some(expected) if expected != width => {
                return Err(Error::RaggedRow {
                    line,
                    expected,
                    got: width,
                })
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(width);
        for (col, raw) in record.iter().enumerate() {
            if Some(col) == label_idx {
                let v = parse_cell(raw, line, col + 1, false)?;
                if v.fract() != 0.0 {
                    return Err(Error::NonNumericCell {
                        line,
                        column: col + 1,
                        value: raw.to_string(),
                    });
                }
                raw_labels.push(v);
            } else {
                row.push(parse_cell(raw, line, col + 1, options.allow_missing)?);
            }
        }
        rows.push(row);
    }

    let n_features = n_columns.unwrap_or(0).saturating_sub(label_idx.is_some() as usize);
    if options.allow_missing {
        impute_column_means(&mut rows, n_features)?;
    }

    let feature_names = match header {
        Some(names) => names
            .into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, n)| n)
            .collect(),
        None => default_feature_names(n_features),
    };
    let labels = label_idx.map(|_| raw_labels.iter().map(|&v| v as i64).collect());
    TabularDataset::new(rows, feature_names, labels)
}

fn impute_column_means(rows: &mut [Vec<f64>], n: usize) -> Result<()> {
    for col in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for row in rows.iter() {
            if !row[col].is_nan() {
                sum += row[col];
                count += 1;
            }
        }
        if count == 0 && !rows.is_empty() {
            return Err(Error::param(format!(
                "column {col} has no observed values to impute from"
            )));
        }
        let mean = sum / count as f64;
        for row in rows.iter_mut() {
            if row[col].is_nan() {
                row[col] = mean;
            }
        }
    }
    Ok(())
}
