use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// Feature matrix plus fully annotated 0/1 label matrix, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    feature_dim: usize,
    class_names: Vec<String>,
    split: Split,
}

impl Dataset {
    /// Builds a dataset and checks its invariants: unique class names, 0/1
    /// labels and at least one positive per row.
    pub fn new(
        features: Vec<f64>,
        labels: Vec<u8>,
        feature_dim: usize,
        class_names: Vec<String>,
        split: Split,
    ) -> Result<Self> {
        let classes = class_names.len();
        if classes == 0 {
            return Err(Error::Validation("dataset has no classes".into()));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate class name `{name}`")));
            }
        }
        if feature_dim == 0 || !features.len().is_multiple_of(feature_dim) {
            return Err(Error::Validation(format!(
                "feature buffer of length {} does not split into rows of {feature_dim}",
                features.len()
            )));
        }
        let rows = features.len() / feature_dim;
        if labels.len() != rows * classes {
            return Err(Error::Validation(format!(
                "label buffer has {} cells, expected {rows} x {classes}",
                labels.len()
            )));
        }
        if labels.iter().any(|&v| v > 1) {
            return Err(Error::Validation("labels must be 0 or 1".into()));
        }
        let empty: Vec<usize> = labels
            .chunks(classes)
            .enumerate()
            .filter(|(_, row)| row.iter().all(|&v| v == 0))
            .map(|(i, _)| i + 1)
            .collect();
        if !empty.is_empty() {
            return Err(Error::Validation(format!(
                "rows without any positive label: {empty:?}"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_dim,
            class_names,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.feature_dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn features(&self, row: usize) -> &[f64] {
        &self.features[row * self.feature_dim..(row + 1) * self.feature_dim]
    }

    pub fn labels(&self, row: usize) -> &[u8] {
        let c = self.class_count();
        &self.labels[row * c..(row + 1) * c]
    }

    pub fn has_positive_in(&self, row: usize, classes: &[usize]) -> bool {
        let labels = self.labels(row);
        classes.iter().any(|&c| labels[c] == 1)
    }

    /// Rows containing at least one positive among `classes`.
    pub fn rows_with_positive_in(&self, classes: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.has_positive_in(r, classes)).collect()
    }

    pub fn mean_positives(&self) -> f64 {
        self.labels.iter().map(|&v| v as f64).sum::<f64>() / self.len() as f64
    }

    /// Writes the CSV format read by [`load_dataset`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let text = self.to_csv_string();
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = (0..self.feature_dim).map(|i| format!("f{i}")).collect();
        header.extend(self.class_names.iter().map(|n| format!("class:{n}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.len() {
            let mut cells: Vec<String> = self.features(r).iter().map(|v| format!("{v:?}")).collect();
            cells.extend(self.labels(r).iter().map(|v| v.to_string()));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Reads a dataset CSV: `f0..f{d-1}` feature columns followed by
/// `class:<name>` label columns holding exactly `0` or `1`.
pub fn load_dataset(path: &Path, split: Split) -> Result<Dataset> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();

    let header_err = |column: &str, message: String| Error::Parse {
        path: display.clone(),
        row: 1,
        column: column.to_string(),
        message,
    };
    let mut feature_dim = 0;
    let mut class_names = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if let Some(class) = name.strip_prefix("class:") {
            if class.is_empty() {
                return Err(header_err(name, "empty class name".into()));
            }
            class_names.push(class.to_string());
        } else if class_names.is_empty() && name == format!("f{i}") {
            feature_dim += 1;
        } else {
            return Err(header_err(
                name,
                format!("expected `f{i}` or a `class:<name>` column"),
            ));
        }
    }
    if feature_dim == 0 {
        return Err(header_err("f0", "no feature columns".into()));
    }
    if class_names.is_empty() {
        return Err(header_err("class:", "no class columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: display.clone(),
                row,
                column: "*".into(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j < feature_dim {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    path: display.clone(),
                    row,
                    column: header[j].to_string(),
                    message: format!("`{cell}` is not a number"),
                })?;
                features.push(v);
            } else {
                let v = match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::Parse {
                            path: display.clone(),
                            row,
                            column: header[j].to_string(),
                            message: format!("label `{cell}` must be 0 or 1"),
                        })
                    }
                };
                labels.push(v);
            }
        }
    }
    Dataset::new(features, labels, feature_dim, class_names, split).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{display}: {msg}")),
        other => other,
    })
}
