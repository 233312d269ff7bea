//! Clustered data with a per-cell missing mask, CSV input/output, and the
//! regression views handed to the per-variable samplers.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Continuous,
    Binary,
}

/// Whether the spike-and-slab prior applies to a variable's coefficient when
/// it appears as a covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    #[default]
    Undetermined,
    Forced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub scale: Scale,
    #[serde(default)]
    pub selection_policy: SelectionPolicy,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            scale: Scale::Continuous,
            selection_policy: SelectionPolicy::Undetermined,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            scale: Scale::Binary,
            selection_policy: SelectionPolicy::Undetermined,
        }
    }

    pub fn forced(mut self) -> Self {
        self.selection_policy = SelectionPolicy::Forced;
        self
    }
}

/// One cluster's n_i x d block, row-major. Missing cells hold NaN until they
/// are filled by an imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    id: String,
    n_rows: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Cluster {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    specs: Vec<VariableSpec>,
    clusters: Vec<Cluster>,
    /// (cluster, row-within-cluster) for each input row, in input order.
    row_order: Vec<(usize, usize)>,
    cluster_column: String,
    cluster_column_position: usize,
}

/// Cell-level input for building a dataset in memory: `None` marks a missing
/// cell.
pub type RowInput = Vec<Option<f64>>;

impl ClusteredDataset {
    /// Build from clusters given as `(id, rows)`. Rows are emitted cluster by
    /// cluster when saved.
    pub fn from_clusters(
        specs: Vec<VariableSpec>,
        clusters: Vec<(String, Vec<RowInput>)>,
    ) -> Result<Self> {
        let mut row_order = Vec::new();
        for (i, (_, rows)) in clusters.iter().enumerate() {
            row_order.extend((0..rows.len()).map(|j| (i, j)));
        }
        Self::assemble(specs, clusters, row_order, "cluster".to_string(), 0)
    }

    fn assemble(
        specs: Vec<VariableSpec>,
        clusters: Vec<(String, Vec<RowInput>)>,
        row_order: Vec<(usize, usize)>,
        cluster_column: String,
        cluster_column_position: usize,
    ) -> Result<Self> {
        let d = specs.len();
        if d < 2 {
            return Err(Error::validation(format!("need at least 2 variables, got {d}")));
        }
        let mut seen = HashSet::new();
        for spec in &specs {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::validation(format!("duplicate variable name `{}`", spec.name)));
            }
            if spec.name == cluster_column {
                return Err(Error::validation(format!(
                    "variable `{}` clashes with the cluster column",
                    spec.name
                )));
            }
        }
        if clusters.is_empty() {
            return Err(Error::validation("dataset has no clusters"));
        }
        let mut built = Vec::with_capacity(clusters.len());
        for (id, rows) in clusters {
            if rows.is_empty() {
                return Err(Error::validation(format!("cluster `{id}` is empty")));
            }
            let mut values = Vec::with_capacity(rows.len() * d);
            let mut missing = Vec::with_capacity(rows.len() * d);
            for (j, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::validation(format!(
                        "cluster `{id}` row {j} has {} cells, expected {d}",
                        row.len()
                    )));
                }
                for (k, cell) in row.iter().enumerate() {
                    match cell {
                        Some(v) => {
                            check_value(&specs[k], *v)?;
                            values.push(*v);
                            missing.push(false);
                        }
                        None => {
                            values.push(f64::NAN);
                            missing.push(true);
                        }
                    }
                }
            }
            built.push(Cluster {
                id,
                n_rows: rows.len(),
                values,
                missing,
            });
        }
        Ok(ClusteredDataset {
            specs,
            clusters: built,
            row_order,
            cluster_column,
            cluster_column_position,
        })
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn n_vars(&self) -> usize {
        self.specs.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_rows(&self) -> usize {
        self.clusters.iter().map(|c| c.n_rows).sum()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.n_rows).collect()
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.clusters[i].values[j * self.n_vars() + k]
    }

    pub fn is_missing(&self, i: usize, j: usize, k: usize) -> bool {
        self.clusters[i].missing[j * self.n_vars() + k]
    }

    /// The value if the cell was observed, `None` if it was originally missing.
    pub fn observed(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        (!self.is_missing(i, j, k)).then(|| self.value(i, j, k))
    }

    pub fn missing_count(&self, k: usize) -> usize {
        let d = self.n_vars();
        self.clusters
            .iter()
            .map(|c| (0..c.n_rows).filter(|j| c.missing[j * d + k]).count())
            .sum()
    }

    pub fn missing_counts(&self) -> Vec<usize> {
        (0..self.n_vars()).map(|k| self.missing_count(k)).collect()
    }

    pub fn total_missing(&self) -> usize {
        self.clusters
            .iter()
            .map(|c| c.missing.iter().filter(|m| **m).count())
            .sum()
    }

    /// Masked cells of variable k as (cluster, row) pairs in storage order.
    pub fn missing_cells(&self, k: usize) -> Vec<(usize, usize)> {
        let d = self.n_vars();
        let mut out = Vec::new();
        for (i, c) in self.clusters.iter().enumerate() {
            for j in 0..c.n_rows {
                if c.missing[j * d + k] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True when variable k has no masked cell still holding NaN.
    pub fn is_filled(&self, k: usize) -> bool {
        let d = self.n_vars();
        self.clusters
            .iter()
            .all(|c| (0..c.n_rows).all(|j| !c.values[j * d + k].is_nan()))
    }

    pub fn is_complete(&self) -> bool {
        (0..self.n_vars()).all(|k| self.is_filled(k))
    }

    /// Overwrite one masked cell. Observed cells are never writable.
    pub fn write_cell(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        let d = self.n_vars();
        if i >= self.clusters.len() || j >= self.clusters[i].n_rows || k >= d {
            return Err(Error::MaskViolation(format!("cell ({i}, {j}, {k}) out of range")));
        }
        if !self.clusters[i].missing[j * d + k] {
            return Err(Error::MaskViolation(format!(
                "cell ({i}, {j}, {k}) of `{}` is observed",
                self.specs[k].name
            )));
        }
        check_value(&self.specs[k], value)?;
        self.clusters[i].values[j * d + k] = value;
        Ok(())
    }

    /// Write imputed values for all masked cells of variable k, in the order
    /// of [`missing_cells`](Self::missing_cells).
    pub fn write_back(&mut self, k: usize, values: &[f64]) -> Result<()> {
        let cells = self.missing_cells(k);
        if cells.len() != values.len() {
            return Err(Error::MaskViolation(format!(
                "variable `{}` has {} masked cells but {} values were supplied",
                self.specs[k].name,
                cells.len(),
                values.len()
            )));
        }
        for v in values {
            check_value(&self.specs[k], *v)?;
        }
        for ((i, j), v) in cells.into_iter().zip(values) {
            self.write_cell(i, j, k, *v)?;
        }
        Ok(())
    }

    /// Copy of this dataset with every masked cell reset to NaN.
    pub fn unfilled(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.clusters {
            for (v, m) in c.values.iter_mut().zip(&c.missing) {
                if *m {
                    *v = f64::NAN;
                }
            }
        }
        out
    }

    /// Replace the mask: cells flagged in `mask(i, j, k)` become missing.
    /// Used by missingness simulators; requires no cell to be missing yet.
    pub fn with_mask(&self, mut mask: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        if self.total_missing() > 0 {
            return Err(Error::validation("dataset already has missing cells"));
        }
        let d = self.n_vars();
        let mut out = self.clone();
        for (i, c) in out.clusters.iter_mut().enumerate() {
            for j in 0..c.n_rows {
                for k in 0..d {
                    if mask(i, j, k) {
                        c.missing[j * d + k] = true;
                        c.values[j * d + k] = f64::NAN;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Rows with no originally-missing cell, as a new fully observed dataset.
    /// Clusters left empty are dropped.
    pub fn complete_cases(&self) -> Result<Self> {
        let d = self.n_vars();
        let mut clusters = Vec::new();
        for c in &self.clusters {
            let rows: Vec<RowInput> = (0..c.n_rows)
                .filter(|j| (0..d).all(|k| !c.missing[j * d + k]))
                .map(|j| (0..d).map(|k| Some(c.values[j * d + k])).collect())
                .collect();
            if !rows.is_empty() {
                clusters.push((c.id.clone(), rows));
            }
        }
        Self::from_clusters(self.specs.clone(), clusters)
    }
}

fn check_value(spec: &VariableSpec, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::validation(format!("non-finite value {v} in `{}`", spec.name)));
    }
    if spec.scale == Scale::Binary && v != 0.0 && v != 1.0 {
        return Err(Error::validation(format!(
            "binary variable `{}` cannot hold {v}",
            spec.name
        )));
    }
    Ok(())
}

/// Order variables by ascending missing count, ties broken by column index.
pub fn missing_order(ds: &ClusteredDataset) -> Vec<usize> {
    let counts = ds.missing_counts();
    let mut order: Vec<usize> = (0..ds.n_vars()).collect();
    order.sort_by_key(|&k| (counts[k], k));
    order
}

// ---------------------------------------------------------------------------
// CSV

/// Which column carries the cluster identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClusterColumn {
    Index(usize),
    Name(String),
}

impl Default for ClusterColumn {
    fn default() -> Self {
        ClusterColumn::Index(0)
    }
}

/// How variable scales and policies are determined at load time.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SpecSource {
    /// One spec per variable column, matched by name.
    Explicit(Vec<VariableSpec>),
    /// Columns whose observed values all lie in {0, 1} become binary.
    InferBinary,
    /// Every variable column is continuous.
    #[default]
    AllContinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub missing_token: String,
    pub cluster_column: ClusterColumn,
    pub specs: SpecSource,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            missing_token: "NA".to_string(),
            cluster_column: ClusterColumn::default(),
            specs: SpecSource::default(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<ClusteredDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, options)
}

/// Parse a clustered dataset from CSV text.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<ClusteredDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    };

    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate header `{name}`"),
            });
        }
    }
    let cluster_pos = match &options.cluster_column {
        ClusterColumn::Index(i) if *i < header.len() => *i,
        ClusterColumn::Index(i) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("cluster column index {i} out of range"),
            })
        }
        ClusterColumn::Name(n) => header.iter().position(|h| h == n).ok_or_else(|| {
            Error::Parse {
                line: 1,
                message: format!("no cluster column named `{n}`"),
            }
        })?,
    };
    let var_names: Vec<&String> = header
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != cluster_pos)
        .map(|(_, h)| h)
        .collect();

    // raw cells first, scales resolved after the whole file is read
    let mut raw_rows: Vec<(String, Vec<Option<f64>>, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record[cluster_pos].to_string();
        if id.is_empty() || id == options.missing_token {
            return Err(Error::Parse {
                line,
                message: "missing cluster id".to_string(),
            });
        }
        let mut cells = Vec::with_capacity(var_names.len());
        for (c, field) in record.iter().enumerate() {
            if c == cluster_pos {
                continue;
            }
            if field == options.missing_token {
                cells.push(None);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric value `{field}` in column `{}`", header[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{field}` in column `{}`", header[c]),
                });
            }
            cells.push(Some(v));
        }
        raw_rows.push((id, cells, line));
    }

    let specs: Vec<VariableSpec> = match &options.specs {
        SpecSource::Explicit(given) => {
            let by_name: HashMap<&str, &VariableSpec> =
                given.iter().map(|s| (s.name.as_str(), s)).collect();
            if by_name.len() != given.len() {
                return Err(Error::validation("duplicate names in variable specs"));
            }
            let mut out = Vec::with_capacity(var_names.len());
            for name in &var_names {
                let spec = by_name.get(name.as_str()).ok_or_else(|| {
                    Error::validation(format!("no variable spec for column `{name}`"))
                })?;
                out.push((*spec).clone());
            }
            if given.len() != var_names.len() {
                let extra: Vec<&str> = given
                    .iter()
                    .map(|s| s.name.as_str())
                    .filter(|n| !var_names.iter().any(|v| v.as_str() == *n))
                    .collect();
                return Err(Error::validation(format!(
                    "variable specs name columns absent from the file: {}",
                    extra.join(", ")
                )));
            }
            out
        }
        SpecSource::InferBinary => var_names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let binary = raw_rows
                    .iter()
                    .all(|(_, cells, _)| matches!(cells[k], None | Some(0.0) | Some(1.0)));
                if binary {
                    VariableSpec::binary(name.as_str())
                } else {
                    VariableSpec::continuous(name.as_str())
                }
            })
            .collect(),
        SpecSource::AllContinuous => var_names
            .iter()
            .map(|n| VariableSpec::continuous(n.as_str()))
            .collect(),
    };

    for (_, cells, line) in &raw_rows {
        for (k, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                if specs[k].scale == Scale::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::Parse {
                        line: *line,
                        message: format!("value {v} in binary column `{}`", specs[k].name),
                    });
                }
            }
        }
    }

    // group rows by cluster id in order of first appearance
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut clusters: Vec<(String, Vec<RowInput>)> = Vec::new();
    let mut row_order = Vec::with_capacity(raw_rows.len());
    for (id, cells, _) in raw_rows {
        let i = *index_of.entry(id.clone()).or_insert_with(|| {
            clusters.push((id, Vec::new()));
            clusters.len() - 1
        });
        row_order.push((i, clusters[i].1.len()));
        clusters[i].1.push(cells);
    }
    ClusteredDataset::assemble(
        specs,
        clusters,
        row_order,
        header[cluster_pos].clone(),
        cluster_pos,
    )
}

pub fn save_csv(ds: &ClusteredDataset, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(ds, &mut w, missing_token).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Emit rows in their original input order. Reals use the shortest decimal
/// form that parses back to the identical f64; unfilled cells are written
/// as `missing_token`.
pub fn write_csv<W: Write>(ds: &ClusteredDataset, w: &mut W, missing_token: &str) -> std::io::Result<()> {
    let d = ds.n_vars();
    let mut wtr = csv::WriterBuilder::new().from_writer(w);
    let mut header: Vec<&str> = ds.specs.iter().map(|s| s.name.as_str()).collect();
    header.insert(ds.cluster_column_position, ds.cluster_column.as_str());
    wtr.write_record(&header)?;
    for &(i, j) in &ds.row_order {
        let c = &ds.clusters[i];
        let mut fields: Vec<String> = (0..d)
            .map(|k| format_value(c.values[j * d + k], missing_token))
            .collect();
        fields.insert(ds.cluster_column_position, c.id.clone());
        wtr.write_record(&fields)?;
    }
    wtr.flush()
}

fn format_value(v: f64, missing_token: &str) -> String {
    if v.is_nan() {
        missing_token.to_string()
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------------------
// Regression views

/// One covariate column of a regression view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Covariate {
    /// Source variable, `None` for the intercept.
    pub source: Option<usize>,
    pub policy: SelectionPolicy,
}

/// Response and covariates for imputing one target variable. Rows are stored
/// cluster by cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionView {
    pub target: usize,
    /// Current response values; masked cells hold their latest imputation or
    /// NaN when not yet filled.
    pub y: Vec<f64>,
    pub y_missing: Vec<bool>,
    /// Row-major covariate matrix, `n_rows x n_covariates`.
    pub x: Vec<f64>,
    pub covariates: Vec<Covariate>,
    /// Row offsets of each cluster; cluster i spans
    /// `cluster_starts[i]..cluster_starts[i + 1]`.
    pub cluster_starts: Vec<usize>,
}

impl RegressionView {
    /// Assemble a view from raw parts, checking shapes. Mostly useful for
    /// driving the samplers directly.
    pub fn new(
        y: Vec<f64>,
        y_missing: Vec<bool>,
        x: Vec<f64>,
        covariates: Vec<Covariate>,
        cluster_sizes: &[usize],
    ) -> Result<Self> {
        let n: usize = cluster_sizes.iter().sum();
        let p = covariates.len();
        if y.len() != n || y_missing.len() != n || x.len() != n * p {
            return Err(Error::invalid(format!(
                "view shape mismatch: {} responses, {} flags, {} covariate cells for {n} rows x {p}",
                y.len(),
                y_missing.len(),
                x.len()
            )));
        }
        if cluster_sizes.is_empty() || cluster_sizes.contains(&0) {
            return Err(Error::invalid("every cluster needs at least one row"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariates must be finite"));
        }
        let mut cluster_starts = vec![0];
        for s in cluster_sizes {
            cluster_starts.push(cluster_starts.last().unwrap() + s);
        }
        Ok(RegressionView {
            target: 0,
            y,
            y_missing,
            x,
            covariates,
            cluster_starts,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_starts.len() - 1
    }

    pub fn cluster_rows(&self, i: usize) -> Range<usize> {
        self.cluster_starts[i]..self.cluster_starts[i + 1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let p = self.n_covariates();
        &self.x[r * p..(r + 1) * p]
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|r| self.y_missing[*r]).collect()
    }

    pub fn n_missing(&self) -> usize {
        self.y_missing.iter().filter(|m| **m).count()
    }

    pub fn policies(&self) -> Vec<SelectionPolicy> {
        self.covariates.iter().map(|c| c.policy).collect()
    }
}

/// Options for [`regression_view`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ViewOptions {
    pub include_intercept: bool,
    /// Center and scale continuous covariates by their current mean and sd.
    pub standardize: bool,
}

/// Response `k` against all other variables at their current values.
pub fn regression_view(ds: &ClusteredDataset, k: usize, options: ViewOptions) -> Result<RegressionView> {
    let d = ds.n_vars();
    if k >= d {
        return Err(Error::invalid(format!("target index {k} out of range for {d} variables")));
    }
    let sources: Vec<usize> = (0..d).filter(|&l| l != k).collect();
    for &l in &sources {
        if !ds.is_filled(l) {
            return Err(Error::validation(format!(
                "covariate `{}` has unfilled missing cells",
                ds.specs[l].name
            )));
        }
    }
    let mut covariates = Vec::with_capacity(d);
    if options.include_intercept {
        covariates.push(Covariate {
            source: None,
            policy: SelectionPolicy::Forced,
        });
    }
    covariates.extend(sources.iter().map(|&l| Covariate {
        source: Some(l),
        policy: ds.specs[l].selection_policy,
    }));

    let n = ds.n_rows();
    let p = covariates.len();
    let mut y = Vec::with_capacity(n);
    let mut y_missing = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * p);
    for c in &ds.clusters {
        for j in 0..c.n_rows {
            let row = &c.values[j * d..(j + 1) * d];
            y.push(row[k]);
            y_missing.push(c.missing[j * d + k]);
            if options.include_intercept {
                x.push(1.0);
            }
            x.extend(sources.iter().map(|&l| row[l]));
        }
    }

    if options.standardize {
        for (col, cov) in covariates.iter().enumerate() {
            let Some(src) = cov.source else { continue };
            if ds.specs[src].scale != Scale::Continuous {
                continue;
            }
            let vals: Vec<f64> = (0..n).map(|r| x[r * p + col]).collect();
            let mean = crate::stats::mean(&vals);
            let sd = crate::stats::variance(&vals).sqrt();
            if sd > 0.0 {
                for r in 0..n {
                    x[r * p + col] = (x[r * p + col] - mean) / sd;
                }
            }
        }
    }

    let mut cluster_starts = vec![0];
    for c in &ds.clusters {
        cluster_starts.push(cluster_starts.last().unwrap() + c.n_rows);
    }
    Ok(RegressionView {
        target: k,
        y,
        y_missing,
        x,
        covariates,
        cluster_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ClusteredDataset {
        ClusteredDataset::from_clusters(
            vec![
                VariableSpec::continuous("a"),
                VariableSpec::continuous("b"),
                VariableSpec::binary("c"),
            ],
            vec![
                (
                    "1".into(),
                    vec![vec![Some(1.0), None, Some(0.0)], vec![Some(2.0), Some(3.0), Some(1.0)]],
                ),
                ("2".into(), vec![vec![Some(4.0), Some(5.0), None]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_mask_counts() {
        let text = "cluster,x,y\n1,1.5,NA\n1,2.5,3\n2,0.5,1\n";
        let ds = read_csv(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.n_clusters(), 2);
        assert_eq!(ds.total_missing(), 1);
        assert!(ds.is_missing(0, 0, 1));
    }

    #[test]
    fn csv_rejects_bad_binary() {
        let text = "g,x,y\n1,1.5,0\n1,2.5,2\n";
        let opts = CsvOptions {
            specs: SpecSource::Explicit(vec![
                VariableSpec::continuous("x"),
                VariableSpec::binary("y"),
            ]),
            ..CsvOptions::default()
        };
        match read_csv(text.as_bytes(), &opts) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_non_numeric_and_duplicate_headers() {
        let bad = "g,x,y\n1,abc,0\n";
        assert!(matches!(
            read_csv(bad.as_bytes(), &CsvOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup = "g,x,x\n1,1,0\n";
        assert!(read_csv(dup.as_bytes(), &CsvOptions::default()).is_err());
        let ragged = "g,x,y\n1,1\n";
        assert!(read_csv(ragged.as_bytes(), &CsvOptions::default()).is_err());
    }

    #[test]
    fn csv_infers_binary_on_request() {
        let text = "g,x,y\n1,1.5,0\n2,2.5,NA\n2,3,1\n";
        let opts = CsvOptions {
            specs: SpecSource::InferBinary,
            ..CsvOptions::default()
        };
        let ds = read_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(ds.specs()[0].scale, Scale::Continuous);
        assert_eq!(ds.specs()[1].scale, Scale::Binary);
    }

    #[test]
    fn csv_named_cluster_column_and_order_preserved() {
        let text = "x,site,y\n1,b,2\n3,a,4\n5,b,6\n";
        let opts = CsvOptions {
            cluster_column: ClusterColumn::Name("site".into()),
            ..CsvOptions::default()
        };
        let ds = read_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(ds.n_clusters(), 2);
        assert_eq!(ds.clusters()[0].id(), "b");
        assert_eq!(ds.clusters()[0].n_rows(), 2);
        let mut out = Vec::new();
        write_csv(&ds, &mut out, "NA").unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn missing_order_examples() {
        let mk = |counts: &[usize]| {
            let d = counts.len();
            let n = *counts.iter().max().unwrap().max(&1);
            let rows: Vec<RowInput> = (0..n)
                .map(|j| (0..d).map(|k| if j < counts[k] { None } else { Some(0.0) }).collect())
                .collect();
            let specs = (0..d).map(|k| VariableSpec::continuous(format!("v{k}"))).collect();
            ClusteredDataset::from_clusters(specs, vec![("c".into(), rows)]).unwrap()
        };
        let one_based = |ds: &ClusteredDataset| -> Vec<usize> {
            missing_order(ds).iter().map(|k| k + 1).collect()
        };
        assert_eq!(one_based(&mk(&[5, 0, 2])), vec![2, 3, 1]);
        assert_eq!(one_based(&mk(&[1, 1, 1])), vec![1, 2, 3]);
        assert_eq!(one_based(&mk(&[0, 0, 7, 3])), vec![1, 2, 4, 3]);
    }

    #[test]
    fn view_shapes_and_errors() {
        let mut ds = toy();
        // b and c are unfilled
        assert!(regression_view(&ds, 0, ViewOptions::default()).is_err());
        ds.write_back(1, &[7.0]).unwrap();
        ds.write_back(2, &[1.0]).unwrap();
        let v = regression_view(&ds, 1, ViewOptions::default()).unwrap();
        assert_eq!(v.n_covariates(), 2);
        assert_eq!(v.n_missing(), 1);
        let v = regression_view(
            &ds,
            1,
            ViewOptions {
                include_intercept: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(v.n_covariates(), 3);
        assert_eq!(v.covariates[0].policy, SelectionPolicy::Forced);
        assert_eq!(v.row(0), &[1.0, 1.0, 0.0]);
        // imputed value of b flows into the view for a
        let v = regression_view(&ds, 0, ViewOptions::default()).unwrap();
        assert_eq!(v.row(0), &[7.0, 0.0]);
        assert_eq!(v.n_missing(), 0);
    }

    #[test]
    fn standardized_view_has_unit_scale() {
        let mut ds = toy();
        ds.write_back(1, &[7.0]).unwrap();
        ds.write_back(2, &[1.0]).unwrap();
        let v = regression_view(
            &ds,
            2,
            ViewOptions {
                include_intercept: false,
                standardize: true,
            },
        )
        .unwrap();
        let col: Vec<f64> = (0..v.n_rows()).map(|r| v.row(r)[0]).collect();
        assert!(crate::stats::mean(&col).abs() < 1e-12);
        assert!((crate::stats::variance(&col) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn write_back_discipline() {
        let mut ds = toy();
        let before = ds.clone();
        ds.write_back(1, &[9.0]).unwrap();
        assert_eq!(ds.value(0, 0, 1), 9.0);
        assert_eq!(ds.value(0, 1, 1), before.value(0, 1, 1));
        assert!(matches!(ds.write_cell(0, 1, 1, 0.0), Err(Error::MaskViolation(_))));
        assert!(ds.write_back(2, &[0.7]).is_err());
        assert!(ds.write_back(2, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn construction_invariants() {
        let specs = vec![VariableSpec::continuous("a"), VariableSpec::continuous("a")];
        assert!(ClusteredDataset::from_clusters(specs, vec![("1".into(), vec![vec![Some(1.0), Some(1.0)]])]).is_err());
        let one = vec![VariableSpec::continuous("a")];
        assert!(ClusteredDataset::from_clusters(one, vec![("1".into(), vec![vec![Some(1.0)]])]).is_err());
        let specs = vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")];
        assert!(ClusteredDataset::from_clusters(specs, vec![("1".into(), vec![])]).is_err());
    }
}
