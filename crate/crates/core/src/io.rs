//! CSV ingestion and export, price-to-return conversion, and `key = value`
//! configuration files.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::DataMatrix;

/// What to discard when a cell is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    DropRows,
    DropColumns,
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" | "drop-rows" => Ok(Self::DropRows),
            "columns" | "drop-columns" => Ok(Self::DropColumns),
            _ => Err(Error::Input(format!("unknown missing-value policy {s:?}"))),
        }
    }
}

/// A numeric table with column names, before any dimension checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Row-major; `None` marks a missing cell.
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Outcome of removing missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTable {
    pub columns: Vec<String>,
    pub values: Mat<f64>,
    pub dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

/// Reads a CSV with a header row. Empty cells and `NA`/`NaN`/`null` are
/// missing; any other non-numeric cell is a parse error. Rows and columns
/// in errors are 1-based, with the header as row 1.
pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                row: i + 2,
                col: rec.len().min(columns.len()) + 1,
                msg: format!("expected {} cells, found {}", columns.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(columns.len());
        for (j, cell) in rec.iter().enumerate() {
            if is_missing(cell) {
                row.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: i + 2,
                col: j + 1,
                msg: format!("non-numeric cell {cell:?}"),
            })?;
            row.push(if v.is_finite() { Some(v) } else { None });
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

impl Table {
    /// Removes every row, or every column, that holds a missing cell.
    pub fn clean(&self, policy: MissingPolicy) -> CleanTable {
        let (n, p) = (self.rows.len(), self.columns.len());
        let (keep_r, keep_c): (Vec<usize>, Vec<usize>) = match policy {
            MissingPolicy::DropRows => (
                (0..n).filter(|&i| self.rows[i].iter().all(Option::is_some)).collect(),
                (0..p).collect(),
            ),
            MissingPolicy::DropColumns => (
                (0..n).collect(),
                (0..p).filter(|&j| self.rows.iter().all(|r| r[j].is_some())).collect(),
            ),
        };
        let dropped = match policy {
            MissingPolicy::DropRows => n - keep_r.len(),
            MissingPolicy::DropColumns => p - keep_c.len(),
        };
        if dropped > 0 {
            let what = if policy == MissingPolicy::DropRows {
                "rows"
            } else {
                "columns"
            };
            log::warn!("dropped {dropped} {what} with missing values");
        }
        CleanTable {
            columns: keep_c.iter().map(|&j| self.columns[j].clone()).collect(),
            values: Mat::from_fn(keep_r.len(), keep_c.len(), |i, j| {
                self.rows[keep_r[i]][keep_c[j]].expect("kept cells are present")
            }),
            dropped,
        }
    }
}

/// Reads an observations-by-variables CSV into a [`DataMatrix`].
pub fn ingest_csv(path: &Path, policy: MissingPolicy) -> Result<(DataMatrix, CleanTable)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let clean = read_table(file)?.clean(policy);
    let data = DataMatrix::new(clean.values.clone())?;
    Ok((data, clean))
}

/// Writes a matrix with a header row; values use the shortest
/// representation that reads back exactly.
pub fn write_matrix_csv<W: Write>(columns: &[String], values: &Mat<f64>, w: W) -> Result<()> {
    if columns.len() != values.ncols() {
        return Err(Error::Dimension(format!(
            "{} column names for {} columns",
            columns.len(),
            values.ncols()
        )));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(columns)?;
    for i in 0..values.nrows() {
        out.write_record((0..values.ncols()).map(|j| format!("{:?}", values[(i, j)])))?;
    }
    out.flush()?;
    Ok(())
}

/// `ln(P_{t+s}/P_t)` over non-overlapping strides `t = 0, s, 2s, …`.
pub fn log_returns(prices: &Mat<f64>, stride: usize) -> Result<Mat<f64>> {
    if stride == 0 {
        return Err(Error::Input("stride must be at least 1".into()));
    }
    let (t, p) = (prices.nrows(), prices.ncols());
    for j in 0..p {
        for i in 0..t {
            let v = prices[(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "price {v} at row {}, column {} is not positive",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let rows = t.saturating_sub(1) / stride;
    Ok(Mat::from_fn(rows, p, |i, j| {
        (prices[((i + 1) * stride, j)] / prices[(i * stride, j)]).ln()
    }))
}

/// Reads a prices CSV (rows are dates), applies the missing-value policy and
/// converts to log returns.
pub fn returns_from_csv(path: &Path, stride: usize, policy: MissingPolicy) -> Result<(Vec<String>, Mat<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let clean = read_table(file)?.clean(policy);
    let r = log_returns(&clean.values, stride)?;
    Ok((clean.columns, r))
}

/// Flat `key = value` configuration. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_` interchangeably.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_").to_ascii_lowercase()
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: i + 1,
                col: 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(Error::Parse {
                    row: i + 1,
                    col: 1,
                    msg: "empty key".into(),
                });
            }
            entries.insert(key, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize_key(key)).map(String::as_str)
    }

    /// Typed lookup; a present but malformed value is an error.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Input(format!("config value {key} = {v:?} is malformed"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Atomically writes text: temporary sibling file, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WITH_GAP: &str = "a,b\n1,2\n3,NaN\n5,6\n";

    #[test]
    fn reads_rectangular_csv() {
        let t = read_table("x,y\n1,2\n3,4\n5,6\n".as_bytes())
            .unwrap()
            .clean(MissingPolicy::DropRows);
        assert_eq!((t.values.nrows(), t.values.ncols()), (3, 2));
        assert_eq!(t.values[(2, 1)], 6.0);
        assert_eq!(t.dropped, 0);
    }

    #[test]
    fn drop_modes() {
        let t = read_table(WITH_GAP.as_bytes()).unwrap();
        let r = t.clean(MissingPolicy::DropRows);
        assert_eq!((r.values.nrows(), r.values.ncols(), r.dropped), (2, 2, 1));
        let c = t.clean(MissingPolicy::DropColumns);
        assert_eq!((c.values.nrows(), c.values.ncols(), c.dropped), (3, 1, 1));
        assert_eq!(c.columns, vec!["a".to_string()]);
    }

    #[test]
    fn parse_error_location() {
        match read_table("a,b\n1,2\n3,abc\n".as_bytes()) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn log_return_examples() {
        let e = std::f64::consts::E;
        let p = Mat::from_fn(3, 1, |i, _| e.powi(i as i32));
        let r = log_returns(&p, 1).unwrap();
        assert_eq!(r.nrows(), 2);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15 && (r[(1, 0)] - 1.0).abs() < 1e-15);
        let flat = log_returns(&Mat::from_fn(4, 2, |_, _| 7.0), 1).unwrap();
        assert!((0..3).all(|i| flat[(i, 0)] == 0.0 && flat[(i, 1)] == 0.0));
        assert_eq!(
            log_returns(&Mat::from_fn(10, 1, |i, _| 1.0 + i as f64), 3)
                .unwrap()
                .nrows(),
            3
        );
        assert!(matches!(
            log_returns(&Mat::from_fn(3, 1, |i, _| i as f64), 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn config_parsing() {
        let c = KeyValueConfig::parse("# sweep\nepsilon = 0.1\ncache-dir=/tmp/x  # here\n\nreps=40\n").unwrap();
        assert_eq!(c.get::<f64>("epsilon").unwrap(), Some(0.1));
        assert_eq!(c.raw("cache_dir"), Some("/tmp/x"));
        assert_eq!(c.get::<usize>("reps").unwrap(), Some(40));
        assert!(c.get::<usize>("epsilon").is_err());
        assert_eq!(c.get::<f64>("alpha").unwrap(), None);
        assert!(KeyValueConfig::parse("novalue\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 12), scale in -30i32..30) {
            let m = Mat::from_fn(4, 3, |i, j| vals[3 * i + j] * 10f64.powi(scale));
            let cols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
            let mut buf = Vec::new();
            write_matrix_csv(&cols, &m, &mut buf).unwrap();
            let back = read_table(buf.as_slice()).unwrap().clean(MissingPolicy::DropRows);
            prop_assert_eq!(back.columns, cols);
            for i in 0..4 {
                for j in 0..3 {
                    prop_assert!((back.values[(i, j)] - m[(i, j)]).abs() <= 1e-15 * m[(i, j)].abs());
                }
            }
        }
    }
}
