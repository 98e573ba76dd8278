//! Whitespace-separated text datasets: one point per line.
//!
//! Blank lines and lines starting with `#` are skipped. Values are written
//! with Rust's shortest round-trip formatting, so `load(save(x)) == x`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Dataset;

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut flat = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let before = flat.len();
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("not a number: {tok:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, msg: format!("non-finite value {tok:?}") });
            }
            flat.push(v);
        }
        let width = flat.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {d} columns, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let dim = dim.ok_or(Error::Empty("dataset file has no rows"))?;
    let points = ndarray::Array2::from_shape_vec((rows, dim), flat).expect("row widths checked");
    Dataset::new(points)
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::with_capacity(data.n_points() * data.dim() * 12);
    for row in data.points().rows() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_dataset(data))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_file() {
        let d = parse_dataset("0 0\n1 1\n").unwrap();
        assert_eq!((d.n_points(), d.dim()), (2, 2));
        let d = parse_dataset("# header\n\n  1.5\t-2e3 \n").unwrap();
        assert_eq!(d.point(0).to_vec(), vec![1.5, -2000.0]);
    }

    #[test]
    fn reports_bad_rows() {
        assert_eq!(
            parse_dataset("0 0\n1 1\n2\n").unwrap_err(),
            Error::Parse { line: 3, msg: "expected 2 columns, found 1".into() }
        );
        assert!(matches!(parse_dataset("1 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_dataset("1 NaN\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_dataset("\n# only comments\n"), Err(Error::Empty(_))));
    }

    #[test]
    fn file_round_trip() {
        let d = Dataset::from_rows(&[vec![0.1, 1e-300, -7.25], vec![1e300, 3.0, 1.0 / 3.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        save_dataset(&d, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), d);
    }
}
