//! The WDBC comma-separated text format: `id,diagnosis,f1,...,fN` per line.
//!
//! A first line whose first field is not a number is treated as a header;
//! its columns after `id,diagnosis` become the feature names. Without a
//! header, 30-column files get the canonical WDBC names. LF and CRLF line
//! endings are accepted and blank lines are skipped.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use privfed_core::dataset::{default_feature_names, Dataset, Label, Sample};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    MissingFile { path: PathBuf, source: io::Error },
    #[error("no data rows")]
    MissingData,
    #[error("line {0}: malformed row")]
    MalformedRow(usize),
    #[error("line {0}: unknown diagnosis label")]
    UnknownLabel(usize),
    #[error("invalid dataset: {0}")]
    Invalid(#[from] privfed_core::DatasetError),
}

pub fn load_wdbc(path: impl AsRef<Path>) -> Result<Dataset, LoadError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| LoadError::MissingFile { path: path.to_path_buf(), source })?;
    parse_wdbc(&text)
}

pub fn parse_wdbc(text: &str) -> Result<Dataset, LoadError> {
    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if samples.is_empty() && names.is_none() && fields[0].parse::<f64>().is_err() {
            if fields.len() < 3 {
                return Err(LoadError::MalformedRow(line_no));
            }
            names = Some(fields[2..].iter().map(|s| s.to_string()).collect());
            width = Some(fields.len());
            continue;
        }
        if fields.len() < 3 || width.is_some_and(|w| w != fields.len()) {
            return Err(LoadError::MalformedRow(line_no));
        }
        width = Some(fields.len());
        fields[0].parse::<f64>().map_err(|_| LoadError::MalformedRow(line_no))?;
        let label = Label::from_code(fields[1]).ok_or(LoadError::UnknownLabel(line_no))?;
        let features = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or(LoadError::MalformedRow(line_no))?;
        samples.push(Sample::new(features, label));
    }
    let Some(first) = samples.first() else {
        return Err(LoadError::MissingData);
    };
    let names = names.unwrap_or_else(|| default_feature_names(first.features.len()));
    Ok(Dataset::new(samples, names)?)
}

/// Writes `data` with a header row; ids are 1-based row numbers.
pub fn write_wdbc(data: &Dataset, mut out: impl Write) -> io::Result<()> {
    write!(out, "id,diagnosis")?;
    for name in data.feature_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (i, s) in data.samples().iter().enumerate() {
        write!(out, "{},{}", i + 1, s.label.code())?;
        for v in &s.features {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u32, label: &str) -> String {
        let values: Vec<String> = (0..30).map(|j| format!("{}.5", j + id as usize)).collect();
        format!("{id},{label},{}", values.join(","))
    }

    #[test]
    fn single_record() {
        let data = parse_wdbc(&row(7, "M")).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.get(0).label, Label::Malignant);
        assert_eq!(data.feature_names()[7], "concave points_mean");
        assert_eq!(data.get(0).features[0], 7.5);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse_wdbc(""), Err(LoadError::MissingData)));
        assert!(matches!(parse_wdbc("\n\n"), Err(LoadError::MissingData)));
    }

    #[test]
    fn crlf_and_header() {
        let text = "id,diagnosis,a,b\r\n1,B,1,2\r\n2,M,3,4\r\n".to_string();
        let data = parse_wdbc(&text).unwrap();
        assert_eq!(data.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(data.class_counts(), [1, 1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!("{}\n{}\n", row(1, "B"), row(2, "X"));
        assert!(matches!(parse_wdbc(&text), Err(LoadError::UnknownLabel(2))));
        let text = format!("{}\n3,B,1,2\n", row(1, "B"));
        assert!(matches!(parse_wdbc(&text), Err(LoadError::MalformedRow(2))));
        assert!(matches!(parse_wdbc("1,B,1,x\n"), Err(LoadError::MalformedRow(1))));
        assert!(matches!(parse_wdbc("1,B,1,NaN\n"), Err(LoadError::MalformedRow(1))));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_wdbc("/nonexistent/wdbc.data"), Err(LoadError::MissingFile { .. })));
    }

    #[test]
    fn write_then_read() {
        let text = format!("{}\n{}\n", row(1, "B"), row(2, "M"));
        let data = parse_wdbc(&text).unwrap();
        let mut out = Vec::new();
        write_wdbc(&data, &mut out).unwrap();
        assert_eq!(parse_wdbc(std::str::from_utf8(&out).unwrap()).unwrap(), data);
    }
}
