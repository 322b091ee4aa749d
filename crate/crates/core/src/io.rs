//! Count-table ingestion and numeric matrix CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::types::{CountMatrix, SequencingDepths};

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn read_records(path: &Path) -> Result<(Vec<csv::StringRecord>, u8)> {
    let text = fs::read_to_string(path)?;
    let delim = detect_delimiter(&text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    Ok((rows, delim))
}

fn parse_count(cell: &str, row: usize, column: &str) -> Result<u64> {
    let err = |message: &str| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("{message}: {cell:?}"),
    };
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(err("negative count")),
        Ok(v) if v.fract() != 0.0 => Err(err("fractional count")),
        Ok(_) => Err(err("count out of range")),
        Err(_) => Err(err("non-numeric cell")),
    }
}

/// Decides whether the table carries a leading sample-label column.
fn has_label_column(header: &csv::StringRecord, first: Option<&csv::StringRecord>) -> bool {
    if header.get(0).is_some_and(str::is_empty) {
        return true;
    }
    match first {
        Some(row) if row.len() == header.len() + 1 => true,
        Some(row) => row.get(0).is_some_and(|c| c.parse::<f64>().is_err()),
        None => false,
    }
}

/// Reads a comma- or tab-delimited count table. The first row holds column
/// labels; a first column of sample labels is optional. Data rows are
/// numbered from 1 in errors.
pub fn read_counts(path: &Path) -> Result<CountMatrix> {
    let (rows, _) = read_records(path)?;
    let Some((header, body)) = rows.split_first() else {
        return Err(Error::InvalidInput(format!("{} is empty", path.display())));
    };
    let labelled = has_label_column(header, body.first());
    let skip_header = usize::from(labelled && header.len() == body.first().map_or(0, |r| r.len()));
    let col_labels: Vec<String> = header.iter().skip(skip_header).map(str::to_string).collect();
    let p = col_labels.len();
    let width = p + usize::from(labelled);
    let mut data = Array2::<u64>::zeros((body.len(), p));
    let mut row_labels = Vec::with_capacity(body.len());
    for (i, rec) in body.iter().enumerate() {
        let row = i + 1;
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut fields = rec.iter();
        if labelled {
            row_labels.push(fields.next().unwrap_or_default().to_string());
        }
        for (j, cell) in fields.enumerate() {
            data[[i, j]] = parse_count(cell, row, &col_labels[j])?;
        }
    }
    let mut counts = CountMatrix::new(data)?.with_col_labels(col_labels)?;
    if labelled {
        counts = counts.with_row_labels(row_labels)?;
    }
    Ok(counts)
}

/// Reads one positive depth per sample: the last field of each line, with a
/// non-numeric first line taken as a header.
pub fn read_depths(path: &Path) -> Result<SequencingDepths> {
    let (rows, _) = read_records(path)?;
    let mut values = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let cell = rec.get(rec.len().saturating_sub(1)).unwrap_or_default();
        match cell.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    row: i,
                    column: "depth".into(),
                    message: format!("non-numeric depth {cell:?}"),
                })
            }
        }
    }
    SequencingDepths::new(Array1::from(values))
}

/// A numeric matrix with optional labels, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub data: Array2<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Vec<String>,
}

/// Writes `data` as CSV: a header of column labels (preceded by an empty cell
/// when row labels are given) and shortest round-trip decimal values.
pub fn write_matrix(
    path: &Path,
    data: &Array2<f64>,
    row_labels: Option<&[String]>,
    col_labels: &[String],
) -> Result<()> {
    if col_labels.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            what: "column labels",
            expected: data.ncols(),
            found: col_labels.len(),
        });
    }
    if let Some(r) = row_labels {
        if r.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                what: "row labels",
                expected: data.nrows(),
                found: r.len(),
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = Vec::with_capacity(col_labels.len() + 1);
    if row_labels.is_some() {
        header.push(String::new());
    }
    header.extend(col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in data.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(r) = row_labels {
            rec.push(r[i].clone());
        }
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_matrix`]; also accepts headerless-label tables.
pub fn read_matrix(path: &Path) -> Result<LabeledMatrix> {
    let (rows, _) = read_records(path)?;
    let Some((header, body)) = rows.split_first() else {
        return Err(Error::InvalidInput(format!("{} is empty", path.display())));
    };
    let labelled = has_label_column(header, body.first());
    let skip_header = usize::from(labelled && header.len() == body.first().map_or(0, |r| r.len()));
    let col_labels: Vec<String> = header.iter().skip(skip_header).map(str::to_string).collect();
    let p = col_labels.len();
    let width = p + usize::from(labelled);
    let mut data = Array2::<f64>::zeros((body.len(), p));
    let mut row_labels = Vec::new();
    for (i, rec) in body.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Parse {
                row: i + 1,
                column: String::new(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut fields = rec.iter();
        if labelled {
            row_labels.push(fields.next().unwrap_or_default().to_string());
        }
        for (j, cell) in fields.enumerate() {
            data[[i, j]] = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                column: col_labels[j].clone(),
                message: format!("non-numeric cell {cell:?}"),
            })?;
        }
    }
    Ok(LabeledMatrix {
        data,
        row_labels: labelled.then_some(row_labels),
        col_labels,
    })
}

/// Writes a single labelled column.
pub fn write_vector(path: &Path, values: &Array1<f64>, row_labels: &[String], name: &str) -> Result<()> {
    let data = values.clone().insert_axis(ndarray::Axis(1));
    write_matrix(path, &data, Some(row_labels), &[name.to_string()])
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// `key=value` record of how an output directory was produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("tool_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = (String, String)>) {
        self.entries.extend(entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let v = v.replace(['\n', '\r'], " ");
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.render())?;
        Ok(path)
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_plain_and_tab_tables() {
        let dir = tempfile::tempdir().unwrap();
        let a = read_counts(&write(dir.path(), "a.csv", "a,b\n2,0\n0,2\n")).unwrap();
        assert_eq!(a.data(), array![[2u64, 0], [0, 2]]);
        assert_eq!(a.col_labels().unwrap(), ["a", "b"]);
        let b = read_counts(&write(dir.path(), "b.tsv", "a\tb\n2\t0\n0\t2\n")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reads_sample_labels() {
        let dir = tempfile::tempdir().unwrap();
        let a = read_counts(&write(dir.path(), "a.csv", ",x,y\ns1,1,2\ns2,3,4\n")).unwrap();
        assert_eq!(a.row_labels().unwrap(), ["s1", "s2"]);
        assert_eq!(a.data(), array![[1u64, 2], [3, 4]]);
        let b = read_counts(&write(dir.path(), "b.csv", "x,y\ns1,1,2\ns2,3,4\n")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cell_errors_name_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("a,b\n3.5,0\n0,2\n", 1, "a", "fractional"),
            ("a,b\n3,0\n0,-2\n", 2, "b", "negative"),
            ("a,b\n3,0\n0,x\n", 2, "b", "non-numeric"),
        ];
        for (text, row, col, what) in cases {
            match read_counts(&write(dir.path(), "e.csv", text)) {
                Err(Error::Parse { row: r, column, message }) => {
                    assert_eq!((r, column.as_str()), (row, col));
                    assert!(message.contains(what), "{message}");
                }
                other => panic!("{other:?}"),
            }
        }
        assert!(matches!(
            read_counts(&write(dir.path(), "r.csv", "a,b\n1,2\n1,2,3\n")),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = array![[1.0 / 3.0, -2e-300], [f64::MAX, 0.1 + 0.2]];
        let labels = vec!["u".to_string(), "v".to_string()];
        let path = dir.path().join("m.csv");
        write_matrix(&path, &m, Some(&labels), &labels).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(back.data, m);
        assert_eq!(back.row_labels.unwrap(), labels);
        write_matrix(&path, &m, None, &labels).unwrap();
        assert_eq!(read_matrix(&path).unwrap().data, m);
    }

    #[test]
    fn depths_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = read_depths(&write(dir.path(), "d.csv", "depth\n1.5\n2\n")).unwrap();
        assert_eq!(a.values(), array![1.5, 2.0]);
        let b = read_depths(&write(dir.path(), "e.csv", "s1,1.5\ns2,2\n")).unwrap();
        assert_eq!(a, b);
        assert!(read_depths(&write(dir.path(), "f.csv", "1\n-2\n")).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new("estimate");
        m.push("rank", 3);
        let parsed = RunManifest::parse(&m.render());
        assert_eq!(parsed, m);
        assert_eq!(parsed.get("rank"), Some("3"));
    }
}
