use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// One CSV cell. Floats print in Rust's shortest round-trip form, so equal
/// values always give equal bytes.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Field {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Field::Num(v) => Some(*v),
            Field::Int(v) => Some(*v as f64),
            Field::Text(s) => s.parse().ok(),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Num(v) => write!(f, "{v}"),
            Field::Int(v) => write!(f, "{v}"),
            Field::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl From<Option<usize>> for Field {
    fn from(v: Option<usize>) -> Self {
        match v {
            Some(v) => Field::Int(v as i64),
            None => Field::Text(String::new()),
        }
    }
}

/// A named CSV table held in memory until the run is written out.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows whose `key` column prints as `value`.
    pub fn filter<'a>(&'a self, key: &str, value: &str) -> impl Iterator<Item = &'a Vec<Field>> + 'a {
        let idx = self.column_index(key);
        let value = value.to_string();
        self.rows
            .iter()
            .filter(move |r| idx.is_some_and(|i| r[i].to_string() == value))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|f| f.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Everything one seed produced.
#[derive(Clone, Debug, Default)]
pub struct SeedOutput {
    pub tables: Vec<Table>,
    /// Scalar results in insertion order; also written as `metrics.csv`.
    pub metrics: Vec<(String, f64)>,
    /// Extra text artifacts (file name, contents).
    pub files: Vec<(String, String)>,
}

impl SeedOutput {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }
}

#[derive(Clone, Debug)]
pub struct SeedRecord {
    pub seed: u64,
    pub wall_seconds: f64,
    pub result: std::result::Result<SeedOutput, SeedFailure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedFailure {
    pub diverged: bool,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

/// One line of the PASS/FAIL summary.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    pub fn assert(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        }
    }

    pub fn info(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict: Verdict::Info,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn line(&self) -> String {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

pub(crate) fn write_seed(root: &Path, record: &SeedRecord) -> Result<()> {
    let dir = seed_dir(root, record.seed);
    fs::create_dir_all(&dir)?;
    match &record.result {
        Ok(out) => {
            for t in &out.tables {
                fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
            }
            let mut m = Table::new("metrics", &["metric", "value"]);
            for (k, v) in &out.metrics {
                m.push(vec![k.as_str().into(), (*v).into()]);
            }
            fs::write(dir.join("metrics.csv"), m.to_csv()?)?;
            for (name, text) in &out.files {
                fs::write(dir.join(name), text)?;
            }
        }
        Err(f) => fs::write(dir.join("error.txt"), format!("{}\n", f.message))?,
    }
    Ok(())
}

fn seed_dirs(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed-"))
            .and_then(|s| s.parse::<u64>().ok());
        if let (Some(seed), true) = (seed, path.is_dir()) {
            found.push((seed, path));
        }
    }
    found.sort();
    Ok(found)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates every per-seed CSV under `dir` into `<name>_agg.csv`.
///
/// Columns whose text is identical across seeds on every row are kept as
/// keys; every other column must be numeric and becomes a `_mean` and a
/// `_stderr` column. Tables missing from some seed or with mismatched
/// shapes are skipped. Returns the files written.
pub fn aggregate(dir: &Path) -> Result<Vec<PathBuf>> {
    let seeds = seed_dirs(dir)?;
    if seeds.is_empty() {
        return Err(Error::Config(format!("no seed-* directories under {}", dir.display())));
    }
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    for (_, path) in &seeds {
        for entry in fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    *names.entry(stem.to_string()).or_default() += 1;
                }
            }
        }
    }
    let mut written = Vec::new();
    for (name, count) in names {
        if count != seeds.len() {
            continue;
        }
        let tables: Vec<_> = seeds
            .iter()
            .map(|(_, p)| read_csv(&p.join(format!("{name}.csv"))))
            .collect::<Result<_>>()?;
        let (header, first) = &tables[0];
        if tables.iter().any(|(h, r)| h != header || r.len() != first.len()) {
            continue;
        }
        let ncol = header.len();
        let is_key: Vec<bool> = (0..ncol)
            .map(|c| (0..first.len()).all(|r| tables.iter().all(|(_, rows)| rows[r][c] == first[r][c])))
            .collect();
        let numeric = (0..ncol).all(|c| {
            is_key[c] || tables.iter().all(|(_, rows)| rows.iter().all(|row| row[c].is_empty() || row[c].parse::<f64>().is_ok()))
        });
        if !numeric {
            continue;
        }
        let mut out_header: Vec<String> = Vec::new();
        for c in 0..ncol {
            if is_key[c] {
                out_header.push(header[c].clone());
            } else {
                out_header.push(format!("{}_mean", header[c]));
                out_header.push(format!("{}_stderr", header[c]));
            }
        }
        out_header.push("n_seeds".into());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&out_header)?;
        for r in 0..first.len() {
            let mut rec: Vec<String> = Vec::new();
            for c in 0..ncol {
                if is_key[c] {
                    rec.push(first[r][c].clone());
                } else {
                    let vals: Vec<f64> = tables
                        .iter()
                        .map(|(_, rows)| rows[r][c].parse().unwrap_or(f64::NAN))
                        .collect();
                    let (m, s) = mean_stderr(&vals);
                    rec.push(Field::Num(m).to_string());
                    rec.push(Field::Num(s).to_string());
                }
            }
            rec.push(seeds.len().to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let path = dir.join(format!("{name}_agg.csv"));
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}
