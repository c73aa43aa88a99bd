//! Numeric CSV input and the output files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

/// A numeric table read from CSV, with column names when the file has a
/// header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

pub fn read_table(path: &Path, header: bool) -> CliResult<Table> {
    let shown = path.display();
    let file = File::open(path).map_err(|e| CliError::usage(format!("{shown}: cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);

    let names = if header {
        let h = reader
            .headers()
            .map_err(|e| CliError::usage(format!("{shown}{}", describe_csv_error(&e))))?;
        Some(h.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };

    let mut rows: Vec<f64> = Vec::new();
    let mut ncols: Option<usize> = None;
    let mut nrows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::usage(format!("{shown}{}", describe_csv_error(&e))))?;
        let line = record.position().map_or(0, |p| p.line());
        let width = *ncols.get_or_insert(record.len());
        if record.len() != width {
            return Err(CliError::usage(format!(
                "{shown}:{line}: expected {width} fields, found {}",
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::usage(format!(
                    "{shown}:{line}:{}: cannot parse '{field}' as a number",
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::usage(format!(
                    "{shown}:{line}:{}: value '{field}' is not finite",
                    j + 1
                )));
            }
            rows.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| CliError::usage(format!("{shown}: no data rows")))?;
    if let Some(names) = &names {
        if names.len() != ncols {
            return Err(CliError::usage(format!(
                "{shown}:1: header has {} names but rows have {ncols} fields",
                names.len()
            )));
        }
    }
    Ok(Table {
        names,
        values: DMatrix::from_row_slice(nrows, ncols, &rows),
    })
}

fn describe_csv_error(e: &csv::Error) -> String {
    match e.position() {
        Some(pos) => format!(":{}: {e}", pos.line()),
        None => format!(": {e}"),
    }
}

pub fn read_response(path: &Path, header: bool) -> CliResult<DVector<f64>> {
    let table = read_table(path, header)?;
    if table.values.ncols() != 1 {
        return Err(CliError::usage(format!(
            "{}: response file must have one column, found {}",
            path.display(),
            table.values.ncols()
        )));
    }
    Ok(table.values.column(0).into_owned())
}

/// Formats a float so that parsing it back gives the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "NA".to_string()
    } else if a == 0.0 || (1e-5..1e16).contains(&a) || a.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

pub fn fmt_support(support: &[usize], sep: &str) -> String {
    support.iter().map(usize::to_string).collect::<Vec<_>>().join(sep)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    let mut f = File::create(&path)
        .map_err(|e| CliError::usage(format!("{}: cannot create: {e}", path.display())))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn key_values(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_with_and_without_header() {
        let f = temp_csv("a,b\n1,2\n3,4.5\n");
        let t = read_table(f.path(), true).unwrap();
        assert_eq!(t.names.unwrap(), vec!["a", "b"]);
        assert_eq!(t.values, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]));
        let f = temp_csv("1\n3\n");
        assert_eq!(read_response(f.path(), false).unwrap().as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let f = temp_csv("1,2\n3,x\n");
        let msg = read_table(f.path(), false).unwrap_err().to_string();
        assert!(msg.ends_with(":2:2: cannot parse 'x' as a number"), "{msg}");
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = temp_csv("1,2\n3\n");
        let err = read_table(f.path(), false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn floats_round_trip() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_opt(None), "NA");
        for v in [4.440892098500626e-16, -1.5e300, 2.0, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(4.440892098500626e-16), "4.440892098500626e-16");
    }
}
