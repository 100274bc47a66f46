//! CSV ingestion and output.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simdiv::format::fmt17;
use simdiv::DMatrix;
use simdiv::DataMatrix;

/// Column names (case-insensitive) always treated as identifiers.
pub const DEFAULT_ID_COLUMNS: [&str; 4] = ["id", "index", "uid", "key"];

#[derive(Debug, Clone, Default)]
pub struct FeatureOptions {
    /// Additional identifier column names.
    pub id_columns: Vec<String>,
    pub subsample: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    Identifier,
    NonNumeric,
}

#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub data: DataMatrix,
    pub columns: Vec<String>,
    pub dropped: Vec<(String, DropReason)>,
    /// Original row indices kept after subsampling, ascending.
    pub rows: Vec<usize>,
}

/// Loads a feature table (header row required).
///
/// Identifier columns and any column holding a value that is not a number are
/// dropped and reported. Numbers that parse but are not finite are an error.
pub fn load_features(path: &Path, opts: &FeatureOptions) -> anyhow::Result<FeatureTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_features(file, opts).with_context(|| format!("reading {}", path.display()))
}

pub fn read_features<R: io::Read>(
    reader: R,
    opts: &FeatureOptions,
) -> anyhow::Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;

    let is_id = |name: &str| {
        DEFAULT_ID_COLUMNS
            .iter()
            .any(|c| c.eq_ignore_ascii_case(name))
            || opts.id_columns.iter().any(|c| c.eq_ignore_ascii_case(name))
    };
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if is_id(name) {
            dropped.push((name.clone(), DropReason::Identifier));
        } else if records
            .iter()
            .any(|r| r.get(j).is_none_or(|v| v.parse::<f64>().is_err()))
        {
            dropped.push((name.clone(), DropReason::NonNumeric));
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() || records.is_empty() {
        bail!("no numeric data left after dropping identifier and non-numeric columns");
    }

    let mut rows: Vec<usize> = (0..records.len()).collect();
    if let Some(s) = opts.subsample {
        if s == 0 {
            bail!("subsample size must be positive");
        }
        if s < records.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rows = rand::seq::index::sample(&mut rng, records.len(), s).into_vec();
            rows.sort_unstable();
        }
    }
    let values = DMatrix::from_fn(rows.len(), keep.len(), |i, j| {
        records[rows[i]][keep[j]]
            .parse::<f64>()
            .expect("checked numeric")
    });
    let data = DataMatrix::new(values).map_err(|e| match e {
        simdiv::Error::NonFinite { row, col, value } => anyhow::anyhow!(
            "non-finite value {value} at data row {} column {:?}",
            rows[row] + 1,
            header[keep[col]]
        ),
        other => other.into(),
    })?;
    Ok(FeatureTable {
        data,
        columns: keep.iter().map(|&j| header[j].clone()).collect(),
        dropped,
        rows,
    })
}

/// Reads a dense square matrix. A first line that is not all numbers is taken as a
/// header and skipped.
pub fn load_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_matrix(file).with_context(|| format!("reading {}", path.display()))
}

pub fn read_matrix<R: io::Read>(reader: R) -> anyhow::Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("non-numeric value in matrix row {}", i + 1),
        }
    }
    let n = rows.len();
    if n == 0 {
        bail!("empty matrix");
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        bail!(
            "matrix is not square: row {} has {} entries, expected {n}",
            i + 1,
            r.len()
        );
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Writes a matrix as headerless CSV with 17 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt17(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
