//! Schema-typed datasets, delimited-text ingestion, splitting and folds.
//!
//! # File formats
//!
//! **Data file.** Plain text, one instance per line, cells separated by a
//! single comma, no header line and no quoting. Leading and trailing
//! whitespace around a cell is ignored, and blank lines are skipped. Each
//! line has exactly as many cells as the schema declares columns, in
//! declaration order. A cell equal to the schema's missing token is a missing
//! value. Numeric cells are parsed as `f64`; categorical cells are matched
//! verbatim against the column's category names.
//!
//! **Schema file.** TOML with these keys:
//!
//! ```toml
//! label = "class"          # name of the label column (required)
//! missing = "?"            # missing-value token (optional, default "?")
//!
//! [[columns]]              # one table per column, in file order
//! name = "A1"
//! kind = "categorical"     # "numeric" or "categorical"
//! categories = ["a", "b"]  # optional; omit to collect from the data
//!
//! [[columns]]
//! name = "A2"
//! kind = "numeric"
//! ```
//!
//! When `categories` is omitted for a categorical column the set is collected
//! from the data in first-appearance order. When it is given, any other value
//! is an error. The label column must be categorical and end up with at least
//! two categories; label cells may not be missing.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

pub const DEFAULT_MISSING_TOKEN: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: Some(categories.into_iter().map(Into::into).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    #[serde(rename = "label")]
    pub label_column: String,
    #[serde(rename = "missing", default = "default_missing")]
    pub missing_token: String,
}

fn default_missing() -> String {
    DEFAULT_MISSING_TOKEN.to_string()
}

/// Feature typing as seen by the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical { levels: usize },
}

impl Schema {
    pub fn new(columns: Vec<Column>, label_column: impl Into<String>) -> Result<Self> {
        let schema = Schema {
            columns,
            label_column: label_column.into(),
            missing_token: default_missing(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema is always representable as TOML")
    }

    /// Checks the structural invariants. Open category sets are allowed here.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
            match (c.kind, &c.categories) {
                (ColumnKind::Numeric, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "numeric column `{}` declares categories",
                        c.name
                    )))
                }
                (ColumnKind::Categorical, Some(cats)) => {
                    let mut s = HashSet::new();
                    if let Some(dup) = cats.iter().find(|v| !s.insert(v.as_str())) {
                        return Err(Error::Schema(format!(
                            "column `{}` declares category `{dup}` twice",
                            c.name
                        )));
                    }
                }
                _ => {}
            }
        }
        let label = self.label_position()?;
        let col = &self.columns[label];
        if col.kind != ColumnKind::Categorical {
            return Err(Error::Schema(format!(
                "label column `{}` must be categorical",
                col.name
            )));
        }
        if let Some(cats) = &col.categories {
            if cats.len() < 2 {
                return Err(Error::Schema(format!(
                    "label column `{}` needs at least two categories",
                    col.name
                )));
            }
        }
        Ok(())
    }

    pub fn label_position(&self) -> Result<usize> {
        let hits: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name == self.label_column)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::Schema(format!(
                "label column `{}` not declared",
                self.label_column
            ))),
            _ => Err(Error::Schema(format!(
                "label column `{}` declared twice",
                self.label_column
            ))),
        }
    }

    /// Feature columns in file order (every column except the label).
    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .filter(move |c| c.name != self.label_column)
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn label_categories(&self) -> &[String] {
        let label = self.label_position().expect("validated schema");
        self.columns[label].categories.as_deref().unwrap_or(&[])
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.feature_columns()
            .map(|c| match c.kind {
                ColumnKind::Numeric => FeatureKind::Numeric,
                ColumnKind::Categorical => FeatureKind::Categorical {
                    levels: c.categories.as_ref().map_or(0, Vec::len),
                },
            })
            .collect()
    }
}

/// A single non-missing feature value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Numeric(f64),
    Category(usize),
}

impl Value {
    pub fn as_numeric(self) -> Option<f64> {
        match self {
            Value::Numeric(v) => Some(v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(self) -> Option<usize> {
        match self {
            Value::Category(c) => Some(c),
            Value::Numeric(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// `None` marks a missing value.
    pub features: Vec<Option<Value>>,
    pub label: usize,
}

impl Instance {
    pub fn new(features: Vec<Option<Value>>, label: usize) -> Self {
        Instance { features, label }
    }

    /// Convenience constructor for all-numeric instances.
    pub fn numeric(features: &[f64], label: usize) -> Self {
        Instance {
            features: features.iter().map(|&v| Some(Value::Numeric(v))).collect(),
            label,
        }
    }
}

/// An immutable, validated table of labelled instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    instances: Vec<Instance>,
    class_count: usize,
}

impl Dataset {
    /// Builds a dataset, checking every instance against the schema. All
    /// categorical columns of `schema` must have closed category sets.
    pub fn new(schema: Schema, instances: Vec<Instance>) -> Result<Self> {
        schema.validate()?;
        if let Some(c) = schema
            .columns
            .iter()
            .find(|c| c.kind == ColumnKind::Categorical && c.categories.is_none())
        {
            return Err(Error::Schema(format!(
                "column `{}` has no category set",
                c.name
            )));
        }
        let kinds = schema.feature_kinds();
        let class_count = schema.label_categories().len();
        for (row, inst) in instances.iter().enumerate() {
            if inst.features.len() != kinds.len() {
                return Err(Error::invalid(format!(
                    "instance {row}: {} features, schema has {}",
                    inst.features.len(),
                    kinds.len()
                )));
            }
            if inst.label >= class_count {
                return Err(Error::invalid(format!(
                    "instance {row}: label {} out of range",
                    inst.label
                )));
            }
            for (j, (v, k)) in inst.features.iter().zip(&kinds).enumerate() {
                let ok = match (v, k) {
                    (None, _) => true,
                    (Some(Value::Numeric(x)), FeatureKind::Numeric) => x.is_finite(),
                    (Some(Value::Category(c)), FeatureKind::Categorical { levels }) => c < levels,
                    _ => false,
                };
                if !ok {
                    return Err(Error::invalid(format!(
                        "instance {row}: feature {j} does not match its column kind"
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            instances,
            class_count,
        })
    }

    /// Parses delimited text under `schema` (see the module docs).
    pub fn from_reader<R: Read>(schema: &Schema, reader: R) -> Result<Self> {
        schema.validate()?;
        let mut schema = schema.clone();
        let label_pos = schema.label_position()?;
        let ncols = schema.columns.len();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .quoting(false)
            .from_reader(reader);

        // Open category sets are filled as values are seen.
        let open: Vec<bool> = schema
            .columns
            .iter()
            .map(|c| c.kind == ColumnKind::Categorical && c.categories.is_none())
            .collect();
        for (c, &is_open) in schema.columns.iter_mut().zip(&open) {
            if is_open {
                c.categories = Some(Vec::new());
            }
        }

        let mut instances = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = record.position().map_or(i + 1, |p| p.line() as usize);
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            if record.len() != ncols {
                return Err(Error::ColumnCount {
                    row,
                    expected: ncols,
                    found: record.len(),
                });
            }
            let mut features = Vec::with_capacity(ncols - 1);
            let mut label = None;
            for (j, cell) in record.iter().enumerate() {
                let missing = cell == schema.missing_token;
                let col = &mut schema.columns[j];
                let value = if missing {
                    None
                } else {
                    match col.kind {
                        ColumnKind::Numeric => {
                            let v: f64 = cell.parse().map_err(|_| Error::NumericCell {
                                row,
                                column: col.name.clone(),
                                value: cell.to_string(),
                            })?;
                            if !v.is_finite() {
                                return Err(Error::NumericCell {
                                    row,
                                    column: col.name.clone(),
                                    value: cell.to_string(),
                                });
                            }
                            Some(Value::Numeric(v))
                        }
                        ColumnKind::Categorical => {
                            let cats = col.categories.as_mut().expect("filled above");
                            let idx = match cats.iter().position(|c| c == cell) {
                                Some(idx) => idx,
                                None if open[j] => {
                                    cats.push(cell.to_string());
                                    cats.len() - 1
                                }
                                None => {
                                    return Err(Error::UnknownCategory {
                                        row,
                                        column: col.name.clone(),
                                        value: cell.to_string(),
                                    })
                                }
                            };
                            Some(Value::Category(idx))
                        }
                    }
                };
                if j == label_pos {
                    match value {
                        Some(Value::Category(c)) => label = Some(c),
                        _ => return Err(Error::invalid(format!("row {row}: missing class label"))),
                    }
                } else {
                    features.push(value);
                }
            }
            instances.push(Instance::new(features, label.expect("label cell present")));
        }
        if instances.is_empty() {
            return Err(Error::NoInstances);
        }
        if schema.label_categories().len() < 2 {
            return Err(Error::Schema(format!(
                "label column `{}` has fewer than two classes",
                schema.label_column
            )));
        }
        Dataset::new(schema, instances)
    }

    /// Writes the data section in the format `from_reader` accepts.
    pub fn to_delimited_string(&self) -> String {
        let label_pos = self.schema.label_position().expect("validated");
        let feature_cols: Vec<&Column> = self.schema.feature_columns().collect();
        let label_names = self.schema.label_categories();
        let mut out = String::new();
        for inst in &self.instances {
            let mut cells: Vec<String> = inst
                .features
                .iter()
                .zip(&feature_cols)
                .map(|(v, col)| match v {
                    None => self.schema.missing_token.clone(),
                    Some(Value::Numeric(x)) => format!("{x}"),
                    Some(Value::Category(c)) => {
                        col.categories.as_ref().expect("closed")[*c].clone()
                    }
                })
                .collect();
            cells.insert(label_pos, label_names[inst.label].clone());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.data` and `<stem>.schema.toml`-style pairs: data to
    /// `data_path`, the resolved (closed) schema to `schema_path`.
    pub fn save(&self, data_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<()> {
        let (d, s) = (data_path.as_ref(), schema_path.as_ref());
        std::fs::write(d, self.to_delimited_string()).map_err(|e| Error::io(d, e))?;
        std::fs::write(s, self.schema.to_toml_string()).map_err(|e| Error::io(s, e))?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> &[String] {
        self.schema.label_categories()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.schema.feature_kinds()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for i in &self.instances {
            h[i.label] += 1;
        }
        h
    }

    /// Instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            class_count: self.class_count,
        }
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: &[usize]) -> Result<Dataset> {
        if labels.len() != self.len() {
            return Err(Error::invalid(
                "label vector length differs from instance count",
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.class_count) {
            return Err(Error::invalid(format!("label {bad} out of range")));
        }
        let mut out = self.clone();
        for (inst, &l) in out.instances.iter_mut().zip(labels) {
            inst.label = l;
        }
        Ok(out)
    }

    pub(crate) fn map_features(
        &self,
        f: impl Fn(usize, Option<Value>) -> Option<Value>,
    ) -> Dataset {
        let mut out = self.clone();
        for inst in &mut out.instances {
            for (j, v) in inst.features.iter_mut().enumerate() {
                *v = f(j, *v);
            }
        }
        out
    }
}

/// Reads a data file under the schema file at `schema_path`.
pub fn load_dataset(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema = Schema::load(schema_path)?;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_reader(&schema, std::io::BufReader::new(file))
}

/// Round-half-up of `fraction * n`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

/// Seeded random `(train, test)` index partition of `0..n`.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: Seed,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} not in (0,1)"
        )));
    }
    if n == 0 {
        return Err(Error::NoInstances);
    }
    let cut = train_size(n, train_fraction);
    if cut == 0 || cut == n {
        return Err(Error::invalid(format!(
            "split of {n} instances at {train_fraction} leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    let test = perm.split_off(cut);
    Ok((perm, test))
}

/// Unstratified random train/test split.
pub fn split_train_test(
    ds: &Dataset,
    train_fraction: f64,
    seed: Seed,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), train_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Seeded partition of `0..n_instances` into `n_folds` parts whose sizes
/// differ by at most one. Each part is sorted.
pub fn make_folds(n_instances: usize, n_folds: usize, seed: Seed) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 || n_folds > n_instances {
        return Err(Error::invalid(format!(
            "cannot make {n_folds} folds over {n_instances} instances"
        )));
    }
    let mut perm: Vec<usize> = (0..n_instances).collect();
    perm.shuffle(&mut seed.rng());
    let mut folds = vec![Vec::with_capacity(n_instances / n_folds + 1); n_folds];
    for (pos, idx) in perm.into_iter().enumerate() {
        folds[pos % n_folds].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-feature z-scoring of numeric columns, fitted on one dataset and
/// applied to others. Constant columns are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    params: Vec<Option<(f64, f64)>>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let params = ds
            .feature_kinds()
            .iter()
            .enumerate()
            .map(|(j, k)| {
                if *k != FeatureKind::Numeric {
                    return None;
                }
                let vals: Vec<f64> = ds
                    .instances()
                    .iter()
                    .filter_map(|i| i.features[j].and_then(Value::as_numeric))
                    .collect();
                if vals.is_empty() {
                    return Some((0.0, 1.0));
                }
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                Some((mean, if sd > 0.0 { sd } else { 1.0 }))
            })
            .collect();
        Standardizer { params }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        ds.map_features(|j, v| match (v, self.params[j]) {
            (Some(Value::Numeric(x)), Some((m, s))) => Some(Value::Numeric((x - m) / s)),
            (v, _) => v,
        })
    }
}
