use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Name of the log-height target column in binned tables and their CSV form.
pub const LOG_TARGET: &str = "LHeight";
/// Name of the untransformed reference height column (meters).
pub const RAW_TARGET: &str = "Height";

/// Named rectangular table of finite values, one row per object or bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<String>,
    ids: Vec<String>,
    values: Vec<f64>,
    target: Option<String>,
}

impl FeatureTable {
    /// `rows` are full rows aligned with `columns`.
    pub fn new(columns: Vec<String>, ids: Vec<String>, rows: Vec<Vec<f64>>, target: Option<String>) -> Result<Self> {
        let width = columns.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    got: r.len(),
                });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("row {i} column {} is not finite", columns[j])));
            }
            values.extend_from_slice(r);
        }
        Self::from_flat(columns, ids, values, target)
    }

    pub fn from_flat(columns: Vec<String>, ids: Vec<String>, values: Vec<f64>, target: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(d) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Validation(format!("duplicate column {d}")));
        }
        if values.len() != ids.len() * columns.len() {
            return Err(Error::Shape {
                expected: ids.len() * columns.len(),
                got: values.len(),
            });
        }
        if let Some(t) = &target {
            if !columns.contains(t) {
                return Err(Error::Validation(format!("target column {t} not in table")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("table contains non-finite values".into()));
        }
        Ok(FeatureTable {
            columns,
            ids,
            values,
            target,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some((0..self.n_rows()).map(|i| self.row(i)[j]).collect())
    }

    pub fn target_values(&self) -> Result<Vec<f64>> {
        let t = self.target.as_deref().ok_or_else(|| Error::Data("table has no target column".into()))?;
        Ok(self.column(t).expect("target validated at construction"))
    }

    /// Every column except the target.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().filter(|c| Some(c.as_str()) != self.target()).cloned().collect()
    }

    /// Rows at `idx`, in that order.
    pub fn take_rows(&self, idx: &[usize]) -> FeatureTable {
        let mut values = Vec::with_capacity(idx.len() * self.width());
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureTable {
            columns: self.columns.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            values,
            target: self.target.clone(),
        }
    }

    /// Keep the named feature columns (in order) plus the target.
    pub fn select(&self, features: &[String]) -> Result<FeatureTable> {
        let mut cols: Vec<String> = features.to_vec();
        if let Some(t) = &self.target {
            if !cols.contains(t) {
                cols.push(t.clone());
            }
        }
        let missing: Vec<&String> = cols.iter().filter(|c| self.column_index(c).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("table lacks columns {missing:?}")));
        }
        let idx: Vec<usize> = cols.iter().map(|c| self.column_index(c).unwrap()).collect();
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            let r = self.row(i);
            values.extend(idx.iter().map(|&j| r[j]));
        }
        FeatureTable::from_flat(cols, self.ids.clone(), values, self.target.clone())
    }

    /// Features as a dense design matrix plus the target vector.
    pub fn dataset(&self) -> Result<Dataset> {
        let y = self.target_values()?;
        let names = self.feature_names();
        let t = self.column_index(self.target().unwrap()).unwrap();
        let mut x = Vec::with_capacity(self.n_rows() * names.len());
        for i in 0..self.n_rows() {
            x.extend(self.row(i).iter().enumerate().filter(|(j, _)| *j != t).map(|(_, v)| *v));
        }
        Dataset::new(names, x, y)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("id").chain(self.columns.iter().map(String::as_str)))?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.ids[i].clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The target is
    /// `LHeight` if present, otherwise `Height`, otherwise none.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::Data("first CSV column must be `id`".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            ids.push(rec.get(0).unwrap_or_default().to_owned());
            for (j, f) in rec.iter().skip(1).enumerate() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("row {} column {}: not a number: {f:?}", line + 1, columns[j])))?;
                values.push(v);
            }
        }
        let target = [LOG_TARGET, RAW_TARGET].into_iter().find(|t| columns.iter().any(|c| c == t)).map(str::to_owned);
        FeatureTable::from_flat(columns, ids, values, target)
    }
}

/// Dense row-major design matrix with its target; the input to every model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() * names.len() {
            return Err(Error::Shape {
                expected: y.len() * names.len(),
                got: x.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Validation("dataset contains non-finite values".into()));
        }
        Ok(Dataset { names, x, y })
    }

    /// Build from row vectors; feature names default to `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (0..p).map(|j| format!("x{j}")).collect();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::Shape {
                expected: p,
                got: r.len(),
            });
        }
        Dataset::new(names, rows.concat(), y)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.x[i * p..(i + 1) * p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.n_features() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            names: self.names.clone(),
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Column indices of `names` in this dataset.
    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        let missing: Vec<&String> = names.iter().filter(|n| !self.names.contains(n)).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("missing features {missing:?}")));
        }
        Ok(names.iter().map(|n| self.names.iter().position(|m| m == n).unwrap()).collect())
    }

    /// Only the named columns, in that order.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let idx = self.indices_of(names)?;
        let mut x = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            let r = self.row(i);
            x.extend(idx.iter().map(|&j| r[j]));
        }
        Ok(Dataset {
            names: names.to_vec(),
            x,
            y: self.y.clone(),
        })
    }
}
