//! Tabular subject data: loading, validation, standardization, outlier
//! filtering, and binding of columns to causal and classification roles.
//!
//! A [`Dataset`] is immutable once built; every transformation returns a new
//! value. Continuous columns hold raw measurement units (VOCs in ppb, glucose
//! in mg/dL). Categorical columns are coded by first appearance and carry their
//! code book.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// Column-type declarations for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn new(id: impl Into<String>) -> Self {
        Schema {
            id: id.into(),
            columns: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, kind: ColumnKind) -> Self {
        self.columns.insert(name.into(), kind);
        self
    }

    /// Declares every non-id column continuous when all of its tokens parse
    /// as numbers, categorical otherwise.
    pub fn infer(path: impl AsRef<Path>, id: &str) -> Result<Schema> {
        let path = path.as_ref();
        let (header, rows) = read_records(path)?;
        let mut schema = Schema::new(id);
        for (j, name) in header.iter().enumerate() {
            if name == id {
                continue;
            }
            let numeric = rows.iter().all(|r| r[j].trim().parse::<f64>().is_ok());
            let kind = if numeric {
                ColumnKind::Continuous
            } else {
                ColumnKind::Categorical
            };
            schema.columns.insert(name.clone(), kind);
        }
        if !header.iter().any(|h| h == id) {
            return Err(Error::Schema(format!("id column {id:?} not in header")));
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Continuous(_) => ColumnKind::Continuous,
            Column::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    /// Codes levels by first appearance, starting at 0.
    pub fn categorical_from_tokens<S: AsRef<str>>(tokens: &[S]) -> Column {
        let mut levels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let codes = tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                *index.entry(t.to_string()).or_insert_with(|| {
                    levels.push(t.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column::Categorical { codes, levels }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical { codes, levels } => Column::Categorical {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        }
    }

    fn render(&self, i: usize) -> String {
        match self {
            Column::Continuous(v) => format_number(v[i]),
            Column::Categorical { codes, levels } => levels[codes[i] as usize].clone(),
        }
    }
}

/// Shortest round-trip decimal rendering.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

/// Location and population scale used to standardize a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
    /// Row count the population sd was computed over; `sd * sqrt(n / (n - 1))`
    /// recovers the sample convention.
    pub n: usize,
}

impl Scaling {
    pub fn of(values: &[f64]) -> Scaling {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Scaling {
            mean,
            sd: var.sqrt(),
            n,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }

    pub fn sample_sd(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.sd * (self.n as f64 / (self.n as f64 - 1.0)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id_name: String,
    row_ids: Vec<String>,
    names: Vec<String>,
    columns: Vec<Column>,
    scaling: BTreeMap<String, Scaling>,
}

impl Dataset {
    pub fn new(
        id_name: impl Into<String>,
        row_ids: Vec<String>,
        names: Vec<String>,
        columns: Vec<Column>,
    ) -> Result<Dataset> {
        let id_name = id_name.into();
        if names.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name == &id_name || !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {name:?}")));
            }
        }
        let mut ids = HashSet::new();
        for id in &row_ids {
            if !ids.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != row_ids.len() {
                return Err(Error::Schema(format!(
                    "column {name:?} has {} entries, expected {}",
                    col.len(),
                    row_ids.len()
                )));
            }
            if let Column::Continuous(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::MissingValue {
                        row: row + 1,
                        column: name.clone(),
                    });
                }
            }
        }
        Ok(Dataset {
            id_name,
            row_ids,
            names,
            columns,
            scaling: BTreeMap::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn id_name(&self) -> &str {
        &self.id_name
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn scaling(&self) -> &BTreeMap<String, Scaling> {
        &self.scaling
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| &self.columns[j])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn continuous(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Continuous(v) => Ok(v),
            Column::Categorical { .. } => Err(Error::InvalidArgument(format!(
                "column {name:?} is categorical"
            ))),
        }
    }

    /// Returns a copy with `name` appended (or replaced if present).
    pub fn with_column(&self, name: &str, column: Column) -> Result<Dataset> {
        if column.len() != self.n_rows() {
            return Err(Error::Dimension(format!(
                "column {name:?} has {} entries, dataset has {} rows",
                column.len(),
                self.n_rows()
            )));
        }
        let mut out = self.clone();
        match out.names.iter().position(|n| n == name) {
            Some(j) => out.columns[j] = column,
            None => {
                out.names.push(name.to_string());
                out.columns.push(column);
            }
        }
        out.scaling.remove(name);
        Ok(out)
    }

    /// Rows at `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            id_name: self.id_name.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            scaling: self.scaling.clone(),
        }
    }

    pub fn row_index(&self) -> HashMap<&str, usize> {
        self.row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Replaces each named column with `(x − mean)/sd` (population sd) and
    /// records the parameters.
    pub fn standardize(&self, cols: &[String]) -> Result<Dataset> {
        let mut out = self.clone();
        for name in cols {
            let j = out
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            let values = match &out.columns[j] {
                Column::Continuous(v) => v,
                Column::Categorical { .. } => {
                    return Err(Error::InvalidArgument(format!(
                        "cannot standardize categorical column {name:?}"
                    )))
                }
            };
            let s = Scaling::of(values);
            if !(s.sd > 0.0) {
                return Err(Error::ZeroVariance(name.clone()));
            }
            let z = values.iter().map(|&x| s.apply(x)).collect();
            out.columns[j] = Column::Continuous(z);
            out.scaling.insert(name.clone(), s);
        }
        Ok(out)
    }

    /// Removes rows where any named column falls outside
    /// `[Q1 − fence·IQR, Q3 + fence·IQR]`. Returns the kept dataset and the
    /// removed ids in input order.
    pub fn filter_outliers(&self, cols: &[String], fence: f64) -> Result<(Dataset, Vec<String>)> {
        if !(fence >= 0.0) || !fence.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "fence must be non-negative, got {fence}"
            )));
        }
        let mut keep = vec![true; self.n_rows()];
        for name in cols {
            let v = self.continuous(name)?;
            let mut sorted = v.to_vec();
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - fence * iqr, q3 + fence * iqr);
            for (k, &x) in keep.iter_mut().zip(v) {
                if x < lo || x > hi {
                    *k = false;
                }
            }
        }
        let kept: Vec<usize> = (0..self.n_rows()).filter(|&i| keep[i]).collect();
        if kept.is_empty() {
            return Err(Error::Degenerate(
                "outlier filter removed every row".to_string(),
            ));
        }
        let removed = (0..self.n_rows())
            .filter(|&i| !keep[i])
            .map(|i| self.row_ids[i].clone())
            .collect();
        Ok((self.select_rows(&kept), removed))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec![self.id_name.clone()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_ids[i].clone()];
            rec.extend(self.columns.iter().map(|c| c.render(i)));
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<memory>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()?)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Linear interpolation between order statistics (`h = (n − 1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn is_missing(token: &str) -> bool {
    matches!(token, "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a CSV with a header row under a declared schema.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, rows) = read_records(path)?;
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate header {h:?}")));
        }
    }
    let id_col = header
        .iter()
        .position(|h| h == &schema.id)
        .ok_or_else(|| Error::Schema(format!("id column {:?} missing from header", schema.id)))?;
    for h in &header {
        if h != &schema.id && !schema.columns.contains_key(h) {
            return Err(Error::Schema(format!("header column {h:?} not declared")));
        }
    }
    for name in schema.columns.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!("declared column {name:?} not in header")));
        }
    }

    let row_ids: Vec<String> = rows.iter().map(|r| r[id_col].trim().to_string()).collect();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == id_col {
            continue;
        }
        let tokens: Vec<&str> = rows.iter().map(|r| r[j].trim()).collect();
        if let Some(row) = tokens.iter().position(|t| is_missing(t)) {
            return Err(Error::MissingValue {
                row: row + 1,
                column: name.clone(),
            });
        }
        let col = match schema.columns[name] {
            ColumnKind::Continuous => {
                let mut v = Vec::with_capacity(tokens.len());
                for (i, t) in tokens.iter().enumerate() {
                    let x: f64 = t.parse().map_err(|_| Error::NonNumeric {
                        row: i + 1,
                        column: name.clone(),
                        value: t.to_string(),
                    })?;
                    v.push(x);
                }
                Column::Continuous(v)
            }
            ColumnKind::Categorical => Column::categorical_from_tokens(&tokens),
        };
        names.push(name.clone());
        columns.push(col);
    }
    Dataset::new(schema.id.clone(), row_ids, names, columns)
}

/// Binds dataset columns to causal and classification roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub treatments: Vec<String>,
    pub outcome: String,
    pub confounders: Vec<String>,
    #[serde(default)]
    pub label: Option<String>,
    pub id: String,
}

/// Column names never admitted as classifier or clustering features.
pub const BLOOD_MARKERS: [&str; 3] = ["glucose", "ketone", "ketones"];

impl RoleConfig {
    pub fn from_json(text: &str) -> Result<RoleConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RoleConfig> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let mut seen = HashSet::new();
        let all = self
            .treatments
            .iter()
            .chain(std::iter::once(&self.outcome))
            .chain(&self.confounders);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::Roles(format!(
                    "column {name:?} assigned to more than one role"
                )));
            }
            if !ds.has_column(name) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        if self.treatments.is_empty() {
            return Err(Error::Roles("no treatment columns".to_string()));
        }
        if ds.id_name() != self.id {
            return Err(Error::Roles(format!(
                "id column {:?} does not match dataset id {:?}",
                self.id,
                ds.id_name()
            )));
        }
        if let Some(label) = &self.label {
            if seen.contains(label.as_str()) {
                return Err(Error::Roles(format!("label {label:?} reused in another role")));
            }
            binary_labels(ds, label)?;
        }
        Ok(())
    }

    /// Classifier and clustering features: treatments then confounders.
    pub fn features(&self) -> Vec<String> {
        self.treatments
            .iter()
            .chain(&self.confounders)
            .cloned()
            .collect()
    }

    /// Errors when `features` contains the outcome column or a blood marker.
    pub fn check_leakage(&self, features: &[String]) -> Result<()> {
        for f in features {
            if f == &self.outcome
                || BLOOD_MARKERS.iter().any(|m| f.eq_ignore_ascii_case(m))
                || self.label.as_deref() == Some(f.as_str())
            {
                return Err(Error::Leakage(f.clone()));
            }
        }
        Ok(())
    }
}

/// Reads a binary label column: continuous 0/1 values or a categorical
/// column whose codes are 0/1.
pub fn binary_labels(ds: &Dataset, name: &str) -> Result<Vec<u8>> {
    match ds.column(name)? {
        Column::Continuous(v) => v
            .iter()
            .map(|&x| {
                if x == 0.0 {
                    Ok(0)
                } else if x == 1.0 {
                    Ok(1)
                } else {
                    Err(Error::Roles(format!("label {name:?} contains non-binary value {x}")))
                }
            })
            .collect(),
        Column::Categorical { codes, levels } => {
            if levels.len() > 2 {
                return Err(Error::Roles(format!("label {name:?} has more than two levels")));
            }
            Ok(codes.iter().map(|&c| c as u8).collect())
        }
    }
}

/// Numeric, model-ready projection of a [`Dataset`] under a [`RoleConfig`].
///
/// Categorical columns are one-hot encoded dropping the first level; the
/// expanded columns are named `column=level`. With `standardized`, every
/// continuous non-outcome column is z-scored and its scaling kept.
#[derive(Debug, Clone)]
pub struct AnalysisView {
    ids: Vec<String>,
    roles: RoleConfig,
    columns: BTreeMap<String, Vec<f64>>,
    expansions: BTreeMap<String, Vec<String>>,
    scaling: BTreeMap<String, Scaling>,
    labels: Option<Vec<u8>>,
    standardized: bool,
}

impl AnalysisView {
    pub fn new(ds: &Dataset, roles: &RoleConfig, standardized: bool) -> Result<AnalysisView> {
        roles.validate(ds)?;
        let labels = match &roles.label {
            Some(l) => Some(binary_labels(ds, l)?),
            None => None,
        };
        let mut columns = BTreeMap::new();
        let mut expansions = BTreeMap::new();
        let mut scaling = BTreeMap::new();
        for name in ds.column_names() {
            if roles.label.as_deref() == Some(name.as_str()) {
                continue;
            }
            match ds.column(name)? {
                Column::Continuous(v) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::MissingValue {
                            row: row + 1,
                            column: name.clone(),
                        });
                    }
                    let values = if standardized && name != &roles.outcome {
                        let s = Scaling::of(v);
                        if !(s.sd > 0.0) {
                            return Err(Error::ZeroVariance(name.clone()));
                        }
                        scaling.insert(name.clone(), s);
                        v.iter().map(|&x| s.apply(x)).collect()
                    } else {
                        v.clone()
                    };
                    columns.insert(name.clone(), values);
                    expansions.insert(name.clone(), vec![name.clone()]);
                }
                Column::Categorical { codes, levels } => {
                    let mut expanded = Vec::new();
                    for (code, level) in levels.iter().enumerate().skip(1) {
                        let col_name = format!("{name}={level}");
                        let dummy = codes
                            .iter()
                            .map(|&c| if c as usize == code { 1.0 } else { 0.0 })
                            .collect();
                        columns.insert(col_name.clone(), dummy);
                        expanded.push(col_name);
                    }
                    expansions.insert(name.clone(), expanded);
                }
            }
        }
        Ok(AnalysisView {
            ids: ds.row_ids().to_vec(),
            roles: roles.clone(),
            columns,
            expansions,
            scaling,
            labels,
            standardized,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn roles(&self) -> &RoleConfig {
        &self.roles
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn scaling(&self) -> &BTreeMap<String, Scaling> {
        &self.scaling
    }

    /// A single numeric column (continuous, or an expanded dummy).
    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn outcome(&self) -> &[f64] {
        &self.columns[&self.roles.outcome]
    }

    /// Expanded model column names for the given dataset column names.
    pub fn expand(&self, names: &[String]) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for n in names {
            let e = self
                .expansions
                .get(n)
                .ok_or_else(|| Error::UnknownColumn(n.clone()))?;
            out.extend(e.iter().cloned());
        }
        Ok(out)
    }

    /// Design matrix (rows = subjects) for dataset columns `names`, with
    /// categorical columns expanded. Returns the expanded column names.
    pub fn design(&self, names: &[String]) -> Result<(DMatrix<f64>, Vec<String>)> {
        let expanded = self.expand(names)?;
        let n = self.n_rows();
        let m = DMatrix::from_fn(n, expanded.len(), |i, j| self.columns[&expanded[j]][i]);
        Ok((m, expanded))
    }

    /// Row-major feature rows for `names` (expanded).
    pub fn rows(&self, names: &[String]) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
        let expanded = self.expand(names)?;
        let cols: Vec<&Vec<f64>> = expanded.iter().map(|e| &self.columns[e]).collect();
        let rows = (0..self.n_rows())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        Ok((rows, expanded))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn simple(values: Vec<f64>) -> Dataset {
        let ids = (0..values.len()).map(|i| format!("s{i}")).collect();
        Dataset::new("id", ids, vec!["x".into()], vec![Column::Continuous(values)]).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("id,acetone,glucose\na,1.5,100\nb,2,110\nc,0.5,95\n");
        let schema = Schema::new("id")
            .with("acetone", ColumnKind::Continuous)
            .with("glucose", ColumnKind::Continuous);
        let ds = load_dataset(f.path(), &schema).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.column_names(), &["acetone", "glucose"]);
        assert_eq!(ds.continuous("glucose").unwrap(), &[100.0, 110.0, 95.0]);
    }

    #[test]
    fn non_numeric_token_names_row_and_column() {
        let f = write_tmp("id,acetone,glucose\na,1,100\nb,2,abc\nc,3,95\n");
        let schema = Schema::new("id")
            .with("acetone", ColumnKind::Continuous)
            .with("glucose", ColumnKind::Continuous);
        match load_dataset(f.path(), &schema) {
            Err(Error::NonNumeric { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "glucose");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn categorical_first_appearance_coding() {
        let f = write_tmp("id,gender\na,M\nb,F\nc,M\n");
        let schema = Schema::new("id").with("gender", ColumnKind::Categorical);
        let ds = load_dataset(f.path(), &schema).unwrap();
        assert_eq!(
            ds.column("gender").unwrap(),
            &Column::Categorical {
                codes: vec![0, 1, 0],
                levels: vec!["M".into(), "F".into()]
            }
        );
    }

    #[test]
    fn load_errors() {
        let schema = Schema::new("id").with("x", ColumnKind::Continuous);
        assert!(matches!(
            load_dataset("/nonexistent/file.csv", &schema),
            Err(Error::Io { .. })
        ));
        let f = write_tmp("id,x,y\na,1,2\n");
        assert!(matches!(load_dataset(f.path(), &schema), Err(Error::Schema(_))));
        let f = write_tmp("id,x\na,1\na,2\n");
        assert!(matches!(load_dataset(f.path(), &schema), Err(Error::DuplicateId(_))));
        let f = write_tmp("id,x\na,1\nb,\n");
        assert!(matches!(
            load_dataset(f.path(), &schema),
            Err(Error::MissingValue { row: 2, .. })
        ));
    }

    #[test]
    fn inferred_schema() {
        let f = write_tmp("id,x,g\na,1,M\nb,2.5,F\n");
        let s = Schema::infer(f.path(), "id").unwrap();
        assert_eq!(s.columns["x"], ColumnKind::Continuous);
        assert_eq!(s.columns["g"], ColumnKind::Categorical);
    }

    #[test]
    fn standardize_population_sd() {
        let ds = simple(vec![1.0, 2.0, 3.0]).standardize(&["x".into()]).unwrap();
        let z = ds.continuous("x").unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        let expect = [-1.0 / sd, 0.0, 1.0 / sd];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = ds.scaling()["x"];
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - sd).abs() < 1e-15);
        // sample convention gives sd 1 for (1,2,3)
        assert!((s.sample_sd() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_errors() {
        assert!(matches!(
            simple(vec![5.0, 5.0, 5.0]).standardize(&["x".into()]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(matches!(
            simple(vec![1.0, 2.0]).standardize(&["nope".into()]),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn quantile_rule() {
        let s = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(quantile_sorted(&s, 0.25), 2.0);
        assert_eq!(quantile_sorted(&s, 0.75), 4.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn outlier_fence() {
        let ds = simple(vec![1.0, 2.0, 3.0, 4.0, 100.0]);
        let (kept, removed) = ds.filter_outliers(&["x".into()], 1.5).unwrap();
        assert_eq!(removed, vec!["s4".to_string()]);
        assert_eq!(kept.n_rows(), 4);

        let (same, none) = simple(vec![1.0, 2.0, 3.0]).filter_outliers(&["x".into()], 1.5).unwrap();
        assert!(none.is_empty());
        assert_eq!(same, simple(vec![1.0, 2.0, 3.0]));

        // Q1 = 1.75, Q3 = 3.25: only the interior rows survive a zero fence
        let (box_only, removed) = simple(vec![4.0, 1.0, 2.0, 3.0])
            .filter_outliers(&["x".into()], 0.0)
            .unwrap();
        assert_eq!(box_only.continuous("x").unwrap(), &[2.0, 3.0]);
        assert_eq!(removed, vec!["s0".to_string(), "s1".to_string()]);
    }

    #[test]
    fn roles_validation() {
        let ds = Dataset::new(
            "id",
            vec!["a".into(), "b".into()],
            vec!["t".into(), "y".into(), "c".into(), "d".into()],
            vec![
                Column::Continuous(vec![1.0, 2.0]),
                Column::Continuous(vec![1.0, 3.0]),
                Column::Continuous(vec![0.0, 1.0]),
                Column::Continuous(vec![0.0, 2.0]),
            ],
        )
        .unwrap();
        let mut roles = RoleConfig {
            treatments: vec!["t".into()],
            outcome: "y".into(),
            confounders: vec!["c".into()],
            label: None,
            id: "id".into(),
        };
        roles.validate(&ds).unwrap();
        roles.confounders.push("t".into());
        assert!(matches!(roles.validate(&ds), Err(Error::Roles(_))));
        roles.confounders = vec!["missing".into()];
        assert!(matches!(roles.validate(&ds), Err(Error::UnknownColumn(_))));
        roles.confounders = vec![];
        roles.label = Some("d".into());
        assert!(matches!(roles.validate(&ds), Err(Error::Roles(_))));
        roles.label = Some("c".into());
        roles.validate(&ds).unwrap();
    }

    #[test]
    fn view_one_hot_and_scaling() {
        let ds = Dataset::new(
            "id",
            vec!["a".into(), "b".into(), "c".into()],
            vec!["t".into(), "y".into(), "g".into()],
            vec![
                Column::Continuous(vec![1.0, 2.0, 6.0]),
                Column::Continuous(vec![3.0, 1.0, 2.0]),
                Column::categorical_from_tokens(&["M", "F", "X"]),
            ],
        )
        .unwrap();
        let roles = RoleConfig {
            treatments: vec!["t".into()],
            outcome: "y".into(),
            confounders: vec!["g".into()],
            label: None,
            id: "id".into(),
        };
        let view = AnalysisView::new(&ds, &roles, true).unwrap();
        let (m, names) = view.design(&["t".into(), "g".into()]).unwrap();
        assert_eq!(names, vec!["t", "g=F", "g=X"]);
        assert_eq!(m.ncols(), 3);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(2, 2)], 1.0);
        // outcome stays raw, treatment reconstructs from its scaling
        assert_eq!(view.outcome(), &[3.0, 1.0, 2.0]);
        let s = view.scaling()["t"];
        for (z, raw) in view.vector("t").unwrap().iter().zip([1.0, 2.0, 6.0]) {
            assert!((s.invert(*z) - raw).abs() <= 1e-9 * raw);
        }
    }

    #[test]
    fn leakage_check() {
        let roles = RoleConfig {
            treatments: vec!["acetone".into()],
            outcome: "glucose".into(),
            confounders: vec!["age".into()],
            label: Some("diabetic".into()),
            id: "id".into(),
        };
        roles.check_leakage(&roles.features()).unwrap();
        assert!(matches!(
            roles.check_leakage(&["acetone".into(), "glucose".into()]),
            Err(Error::Leakage(c)) if c == "glucose"
        ));
        assert!(matches!(
            roles.check_leakage(&["Ketone".into()]),
            Err(Error::Leakage(_))
        ));
    }
}
