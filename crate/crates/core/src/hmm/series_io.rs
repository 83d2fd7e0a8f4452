//! Plain-text observation files.
//!
//! One value per line, C-locale decimals, optional single header line.
//! Written files use LF endings; readers tolerate CRLF.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{HmmError, ObservationSeries};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: cannot parse {content:?} as a number")]
    Parse { line: usize, content: String },
    #[error(transparent)]
    Series(#[from] HmmError),
}

/// Read a single-column series. A non-numeric first line is treated as a
/// header; any later non-numeric line is an error citing its line number.
pub fn read_series<T: Scalar, P: AsRef<Path>>(
    path: P,
) -> Result<ObservationSeries<T>, SeriesIoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) => values.push(T::of(v)),
            Err(_) if idx == 0 => continue, // header
            Err(_) => {
                return Err(SeriesIoError::Parse {
                    line: idx + 1,
                    content: trimmed.to_string(),
                })
            }
        }
    }
    Ok(ObservationSeries::new(values)?)
}

/// Write a series with an optional header line.
pub fn write_series<T: Scalar, P: AsRef<Path>>(
    path: P,
    series: &ObservationSeries<T>,
    header: Option<&str>,
) -> Result<(), SeriesIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(h) = header {
        writeln!(w, "{h}")?;
    }
    for v in series.values() {
        writeln!(w, "{}", v.as_f64())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_header() {
        let dir = std::env::temp_dir().join("vnd_core_series_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        let series = ObservationSeries::new(vec![0.5, -1.25, 3e-4]).unwrap();
        write_series(&path, &series, Some("y")).unwrap();
        let back: ObservationSeries<f64> = read_series(&path).unwrap();
        assert_eq!(back.values(), series.values());
    }

    #[test]
    fn non_numeric_row_reports_line() {
        let dir = std::env::temp_dir().join("vnd_core_series_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "y\n1.0\noops\n2.0\n").unwrap();
        let err = read_series::<f64, _>(&path).unwrap_err();
        match err {
            SeriesIoError::Parse { line, content } => {
                assert_eq!(line, 3);
                assert_eq!(content, "oops");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
