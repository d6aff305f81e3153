use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug)]
pub enum DataError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, line: u64, message: String },
    Empty(PathBuf),
    Json(serde_json::Error),
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            DataError::Parse { path, line, message } => write!(f, "{}:{line}: {message}", path.display()),
            DataError::Empty(path) => write!(f, "{}: no data values", path.display()),
            DataError::Json(e) => write!(f, "could not serialise report: {e}"),
        }
    }
}

impl std::error::Error for DataError {}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Reads a single numeric column. A first row whose token does not parse
/// as a number is taken to be a header.
pub fn read_column(path: &Path) -> Result<Vec<f64>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut values = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index as u64 + 1;
        let record = record.map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(line, |p| p.line());
        let parse_error = |message: String| DataError::Parse { path: path.to_path_buf(), line, message };
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 1 {
            return Err(parse_error(format!("expected one column, found {}", record.len())));
        }
        let token = &record[0];
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(parse_error(format!("non-finite value {v}"))),
            Err(_) if index == 0 => continue,
            Err(_) => return Err(parse_error(format!("not a number: '{token}'"))),
        }
    }
    if values.is_empty() {
        return Err(DataError::Empty(path.to_path_buf()));
    }
    Ok(values)
}

/// Writes rows of floats under a header, each value in shortest
/// round-trip form.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| DataError::Io { path: path.to_path_buf(), source: e.into() };
    if !header.is_empty() {
        writer.write_record(header).map_err(csv_err)?;
    }
    for row in rows {
        writer.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(value).map_err(DataError::Json)?;
    let mut file = File::create(path).map_err(io_err(path))?;
    writeln!(file, "{text}").map_err(io_err(path))
}

/// `dir/name.ext` becomes `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn header_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(read_column(&write(&dir, "a.csv", "x\n1.5\n-2\n")).unwrap(), vec![1.5, -2.0]);
        assert_eq!(read_column(&write(&dir, "b.csv", "1.5\n-2\n")).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_column(&write(&dir, "c.csv", "1\n2\nabc\n")).unwrap_err().to_string();
        assert!(err.ends_with(":3: not a number: 'abc'"), "{err}");
        let err = read_column(&write(&dir, "d.csv", "1\n2,3\n")).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
        assert!(matches!(read_column(&write(&dir, "e.csv", "")), Err(DataError::Empty(_))));
        assert!(matches!(read_column(&write(&dir, "f.csv", "value\n")), Err(DataError::Empty(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values = vec![0.1 + 0.2, 1e-300, -123456.789e10, std::f64::consts::PI];
        let p = dir.path().join("out.csv");
        write_table(&p, &[], values.iter().map(|&v| vec![v])).unwrap();
        assert_eq!(read_column(&p).unwrap(), values);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("/a/b/report.json"), "frontier.csv"), PathBuf::from("/a/b/report.frontier.csv"));
        assert_eq!(sibling(Path::new("out"), "json"), PathBuf::from("out.json"));
    }
}
