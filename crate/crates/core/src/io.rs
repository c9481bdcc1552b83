//! CSV tables and the waveform text format.
//!
//! Every CSV written here has a single header row followed by one row per
//! sample. Numbers are printed with Rust's shortest round-trip formatting,
//! so identical inputs give byte-identical files.
//!
//! A waveform file holds one period of a sampled signal:
//!
//! ```text
//! period_s=0.00517
//! rate_hz=49516.44
//! 12.5
//! 13.0
//! ...
//! ```
//!
//! Header lines come first, in any order, as `key=value`. Each later
//! non-empty line is one sample. Lines starting with `#` are skipped.

use std::path::Path;

use crate::error::{Error, Result};

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, header: &str, column: Vec<f64>) {
        self.headers.push(header.to_string());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let n = self.rows();
        if let Some(bad) = self.columns.iter().position(|c| c.len() != n) {
            return Err(Error::Format(format!(
                "column `{}` has {} rows, expected {n}",
                self.headers[bad],
                self.columns[bad].len()
            )));
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(&self.headers).map_err(|e| csv_error(path, e))?;
        let mut row = Vec::with_capacity(self.columns.len());
        for i in 0..n {
            row.clear();
            row.extend(self.columns.iter().map(|c| format_number(c[i])));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers: Vec<String> = r
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                let v = field.parse::<f64>().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {}: `{field}` is not a number",
                        path.display(),
                        line + 2
                    ))
                })?;
                col.push(v);
            }
        }
        Ok(Self { headers, columns })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

pub(crate) fn format_number(v: f64) -> String {
    format!("{v:e}")
}

/// One sampled period of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub period: f64,
    pub rate: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn parse(text: &str) -> Result<Self> {
        let mut period = None;
        let mut rate = None;
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                if !samples.is_empty() {
                    return Err(Error::Format(format!(
                        "line {}: header `{key}` after samples",
                        i + 1
                    )));
                }
                let v = value.trim().parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: bad value for `{}`", i + 1, key.trim()))
                })?;
                match key.trim() {
                    "period_s" => period = Some(v),
                    "rate_hz" => rate = Some(v),
                    other => {
                        return Err(Error::Format(format!(
                            "line {}: unknown header `{other}`",
                            i + 1
                        )))
                    }
                }
                continue;
            }
            let v = line
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: `{line}` is not a sample", i + 1)))?;
            samples.push(v);
        }
        let period = period.ok_or_else(|| Error::Format("missing `period_s=` header".into()))?;
        let rate = rate.ok_or_else(|| Error::Format("missing `rate_hz=` header".into()))?;
        if !(period > 0.0 && period.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Format("period_s and rate_hz must be positive".into()));
        }
        if samples.len() < 2 {
            return Err(Error::Format("waveform needs at least two samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Format("waveform contains a non-finite sample".into()));
        }
        Ok(Self {
            period,
            rate,
            samples,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "period_s={}\nrate_hz={}\n",
            format_number(self.period),
            format_number(self.rate)
        );
        for v in &self.samples {
            s.push_str(&format_number(*v));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new();
        t.push("a", vec![0.1, 1e-300, -3.5]);
        t.push("b", vec![f64::MAX, 0.0, 2.0 / 3.0]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
        assert_eq!(t.column("b").unwrap()[2], 2.0 / 3.0);
    }

    #[test]
    fn ragged_table_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new();
        t.push("a", vec![1.0]);
        t.push("b", vec![]);
        assert!(t.write(dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn waveform_round_trip() {
        let w = Waveform {
            period: 5.17e-3,
            rate: 44100.0,
            samples: vec![0.0, 1.5, -2.25],
        };
        assert_eq!(Waveform::parse(&w.to_text()).unwrap(), w);
    }

    #[test]
    fn waveform_errors() {
        assert!(Waveform::parse("rate_hz=10\n1\n2\n").is_err());
        assert!(Waveform::parse("period_s=1\nrate_hz=10\n1\nx\n").is_err());
        assert!(Waveform::parse("period_s=1\nrate_hz=10\n1\nfoo=2\n").is_err());
        assert!(Waveform::parse("period_s=-1\nrate_hz=10\n1\n2\n").is_err());
        let w = Waveform::parse("# one period\nrate_hz = 8\nperiod_s= 0.5\n\n1\n2\n3\n4\n").unwrap();
        assert_eq!(w.samples.len(), 4);
    }
}
