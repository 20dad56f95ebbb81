use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::FeatureCatalog;
use crate::numcore::Matrix;
use crate::{DateRange, Error, Result};

/// One catchment: static attributes, daily forcing and observed discharge.
///
/// Dates are consecutive calendar days starting at [`BasinRecord::start`].
#[derive(Clone, Debug, PartialEq)]
pub struct BasinRecord {
    id: String,
    static_features: Vec<f64>,
    dynamic_names: Vec<String>,
    forcing: Matrix,
    discharge: Vec<f64>,
    start: NaiveDate,
}

impl BasinRecord {
    pub fn new(
        id: impl Into<String>,
        static_features: Vec<f64>,
        dynamic_names: Vec<String>,
        forcing: Matrix,
        discharge: Vec<f64>,
        start: NaiveDate,
    ) -> Result<Self> {
        let id = id.into();
        let bad = |msg: String| Err(Error::Contract(format!("basin {id}: {msg}")));
        if forcing.rows() != discharge.len() {
            return bad(format!(
                "{} forcing days but {} discharge days",
                forcing.rows(),
                discharge.len()
            ));
        }
        if forcing.cols() != dynamic_names.len() {
            return bad("forcing columns do not match dynamic feature names".into());
        }
        if discharge.is_empty() {
            return bad("empty record".into());
        }
        if !forcing.is_finite() || static_features.iter().any(|v| !v.is_finite()) {
            return bad("non-finite input value".into());
        }
        if let Some(k) = discharge.iter().position(|q| !q.is_finite() || *q < 0.0) {
            return bad(format!("invalid discharge {} on day {k}", discharge[k]));
        }
        Ok(Self {
            id,
            static_features,
            dynamic_names,
            forcing,
            discharge,
            start,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Static attributes in catalog order, physical units.
    pub fn static_features(&self) -> &[f64] {
        &self.static_features
    }

    pub fn dynamic_names(&self) -> &[String] {
        &self.dynamic_names
    }

    /// `N_days × n_d` forcing matrix.
    pub fn forcing(&self) -> &Matrix {
        &self.forcing
    }

    /// Observed discharge, mm/day.
    pub fn discharge(&self) -> &[f64] {
        &self.discharge
    }

    pub fn len(&self) -> usize {
        self.discharge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discharge.is_empty()
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.len() - 1)
    }

    pub fn date(&self, k: usize) -> NaiveDate {
        self.start + chrono::Days::new(k as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let k = (date - self.start).num_days();
        (k >= 0 && (k as usize) < self.len()).then_some(k as usize)
    }

    pub fn full_range(&self) -> DateRange {
        DateRange {
            start: self.start,
            end: self.end(),
        }
    }

    /// Day indices covered by `range`, which must lie inside the record.
    pub fn index_range(&self, range: &DateRange) -> Result<std::ops::Range<usize>> {
        match (self.index_of(range.start), self.index_of(range.end)) {
            (Some(a), Some(b)) => Ok(a..b + 1),
            _ => Err(Error::Contract(format!(
                "range {}..{} is outside basin {} record {}..{}",
                range.start,
                range.end,
                self.id,
                self.start,
                self.end()
            ))),
        }
    }

    /// Copy of this record with a different static vector.
    pub fn with_static_features(&self, static_features: Vec<f64>) -> Result<Self> {
        Self::new(
            self.id.clone(),
            static_features,
            self.dynamic_names.clone(),
            self.forcing.clone(),
            self.discharge.clone(),
            self.start,
        )
    }

    /// Training needs at least one lookback window plus a year of targets.
    pub fn check_min_length(&self, lookback: usize) -> Result<()> {
        if self.len() < lookback + 365 {
            return Err(Error::Contract(format!(
                "basin {} has {} days; at least lookback + 365 = {} required",
                self.id,
                self.len(),
                lookback + 365
            )));
        }
        Ok(())
    }
}

fn parse_date(s: &str, path: &Path, line: Option<usize>) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::load(path, line, format!("invalid date `{s}`: {e}")))
}

fn parse_value(s: &str, column: &str, path: &Path, line: Option<usize>) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::load(
            path,
            line,
            format!("missing value in column `{column}`"),
        ));
    }
    let v: f64 = s.parse().map_err(|_| {
        Error::load(
            path,
            line,
            format!("invalid number `{s}` in column `{column}`"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::load(
            path,
            line,
            format!("non-finite value in column `{column}`"),
        ));
    }
    Ok(v)
}

struct DatedTable {
    columns: Vec<String>,
    start: NaiveDate,
    rows: Vec<Vec<f64>>,
}

/// Reads `date,<col>...` with strictly consecutive dates and no gaps.
fn read_dated_table(path: &Path) -> Result<DatedTable> {
    if !path.exists() {
        return Err(Error::load(path, None, "file not found"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, None, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| Error::load(path, Some(1), e.to_string()))?
        .clone();
    if header.is_empty() || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::load(
            path,
            Some(1),
            "first header column must be `date`",
        ));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if columns.is_empty() {
        return Err(Error::load(path, Some(1), "no value columns"));
    }
    let mut start = None;
    let mut prev: Option<NaiveDate> = None;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(path, None, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::load(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let date = parse_date(&rec[0], path, line)?;
        if let Some(p) = prev {
            let expected = p.succ_opt().expect("date overflow");
            if date != expected {
                return Err(Error::load(
                    path,
                    line,
                    format!("date gap: missing {expected} (next row is {date})"),
                ));
            }
        } else {
            start = Some(date);
        }
        prev = Some(date);
        let values = columns
            .iter()
            .enumerate()
            .map(|(j, c)| parse_value(&rec[j + 1], c, path, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    let start = start.ok_or_else(|| Error::load(path, None, "no data rows"))?;
    Ok(DatedTable {
        columns,
        start,
        rows,
    })
}

/// Reads one basin's row of the attributes table, ordered per `catalog`.
pub fn read_attributes(path: &Path, catalog: &FeatureCatalog, id: &str) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(Error::load(path, None, "file not found"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, None, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| Error::load(path, Some(1), e.to_string()))?
        .clone();
    let columns = catalog
        .names()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::load(path, Some(1), format!("missing attribute `{name}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(path, None, e.to_string()))?;
        if rec.get(0) != Some(id) {
            continue;
        }
        let line = rec.position().map(|p| p.line() as usize);
        return columns
            .iter()
            .zip(catalog.names())
            .map(|(&j, name)| {
                let raw = rec.get(j).unwrap_or("");
                parse_value(raw, name, path, line).map_err(|e| match e {
                    Error::Load { .. } if raw.trim().is_empty() => Error::load(
                        path,
                        line,
                        format!("missing attribute `{name}` for basin {id}"),
                    ),
                    other => other,
                })
            })
            .collect();
    }
    Err(Error::load(path, None, format!("basin `{id}` not found")))
}

/// Basin ids in attributes-table order.
pub fn read_basin_ids(attributes_path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(attributes_path)
        .map_err(|e| Error::load(attributes_path, None, e.to_string()))?;
    let mut ids = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(attributes_path, None, e.to_string()))?;
        ids.push(rec[0].to_string());
    }
    Ok(ids)
}

/// Loads and validates one basin from its three CSV sources.
pub fn load_basin(
    forcing_path: impl AsRef<Path>,
    discharge_path: impl AsRef<Path>,
    attributes_path: impl AsRef<Path>,
    catalog: &FeatureCatalog,
    id: &str,
) -> Result<BasinRecord> {
    let (forcing_path, discharge_path) = (forcing_path.as_ref(), discharge_path.as_ref());
    let forcing = read_dated_table(forcing_path)?;
    let discharge = read_dated_table(discharge_path)?;
    if discharge.columns.len() != 1 {
        return Err(Error::load(
            discharge_path,
            Some(1),
            "expected `date,<discharge>` columns",
        ));
    }
    if forcing.start != discharge.start || forcing.rows.len() != discharge.rows.len() {
        return Err(Error::load(
            discharge_path,
            None,
            format!(
                "date range {} (+{} days) differs from forcing {} (+{} days)",
                discharge.start,
                discharge.rows.len(),
                forcing.start,
                forcing.rows.len()
            ),
        ));
    }
    let q: Vec<f64> = discharge.rows.into_iter().map(|r| r[0]).collect();
    if let Some(k) = q.iter().position(|v| *v < 0.0) {
        // header is line 1, day k is line k + 2
        return Err(Error::load(
            discharge_path,
            Some(k + 2),
            format!("negative discharge {}", q[k]),
        ));
    }
    let static_features = read_attributes(attributes_path.as_ref(), catalog, id)?;
    let forcing_matrix = Matrix::from_rows(&forcing.rows)?;
    BasinRecord::new(
        id,
        static_features,
        forcing.columns,
        forcing_matrix,
        q,
        forcing.start,
    )
}

/// On-disk layout of a dataset directory.
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn catalog(&self) -> PathBuf {
        self.root.join("catalog.csv")
    }
    pub fn attributes(&self) -> PathBuf {
        self.root.join("attributes.csv")
    }
    pub fn forcing(&self, id: &str) -> PathBuf {
        self.root.join("forcing").join(format!("{id}.csv"))
    }
    pub fn discharge(&self, id: &str) -> PathBuf {
        self.root.join("discharge").join(format!("{id}.csv"))
    }
}

/// Loads every basin listed in `attributes.csv`, in table order.
pub fn load_dataset(root: impl AsRef<Path>, catalog: &FeatureCatalog) -> Result<Vec<BasinRecord>> {
    let layout = DatasetLayout::new(root.as_ref());
    let attributes = layout.attributes();
    if !attributes.exists() {
        return Err(Error::load(&attributes, None, "file not found"));
    }
    let ids = read_basin_ids(&attributes)?;
    if ids.is_empty() {
        return Err(Error::load(&attributes, None, "no basins listed"));
    }
    ids.par_iter()
        .map(|id| {
            load_basin(
                layout.forcing(id),
                layout.discharge(id),
                &attributes,
                catalog,
                id,
            )
        })
        .collect()
}

pub fn forcing_csv(basin: &BasinRecord) -> String {
    let mut out = String::from("date");
    for n in basin.dynamic_names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for k in 0..basin.len() {
        write!(out, "{}", basin.date(k)).unwrap();
        for v in basin.forcing().row(k) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn discharge_csv(basin: &BasinRecord) -> String {
    let mut out = String::from("date,discharge\n");
    for (k, q) in basin.discharge().iter().enumerate() {
        writeln!(out, "{},{q}", basin.date(k)).unwrap();
    }
    out
}

pub fn attributes_csv(catalog: &FeatureCatalog, basins: &[BasinRecord]) -> String {
    let mut out = String::from("basin_id");
    for n in catalog.names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for b in basins {
        out.push_str(b.id());
        for v in b.static_features() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Dataset files as `(relative path, contents)`, in a fixed order.
pub fn dataset_files(catalog: &FeatureCatalog, basins: &[BasinRecord]) -> Vec<(PathBuf, String)> {
    let mut files = vec![
        (PathBuf::from("catalog.csv"), catalog.to_csv()),
        (
            PathBuf::from("attributes.csv"),
            attributes_csv(catalog, basins),
        ),
    ];
    for b in basins {
        files.push((
            PathBuf::from("forcing").join(format!("{}.csv", b.id())),
            forcing_csv(b),
        ));
        files.push((
            PathBuf::from("discharge").join(format!("{}.csv", b.id())),
            discharge_csv(b),
        ));
    }
    files
}

/// Writes a dataset directory non-atomically (tests and tools).
pub fn write_dataset(
    root: impl AsRef<Path>,
    catalog: &FeatureCatalog,
    basins: &[BasinRecord],
) -> Result<()> {
    for (rel, contents) in dataset_files(catalog, basins) {
        let path = root.as_ref().join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, contents)?;
    }
    Ok(())
}
