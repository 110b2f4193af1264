//! Records, tables and their JSON/CSV/gnuplot renderings.

use std::io::Write;
use std::path::Path;

use deltabose::{Error, Result};
use serde::{Deserialize, Serialize};

/// One propagator value from one estimator at one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub n: usize,
    pub t: f64,
    pub kappa: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub value_imag: f64,
    /// Quadrature error estimate, Monte Carlo standard error, or the
    /// finite-difference step-halving estimate.
    pub error_estimate: f64,
    pub imag_residue: f64,
    /// Integrand evaluations, or Monte Carlo paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<u64>,
    /// Time steps of the oracles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

pub const RECORD_HEADER: [&str; 14] = [
    "method",
    "n",
    "t",
    "kappa",
    "x",
    "y",
    "value",
    "value_imag",
    "error_estimate",
    "imag_residue",
    "evaluations",
    "steps",
    "seed",
    "timing_ms",
];

/// Seventeen significant digits, enough to reproduce any double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&a| fmt_f64(a)).collect::<Vec<_>>().join(";")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|a| a.to_string()).unwrap_or_default()
}

impl Record {
    pub fn row(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.n.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.kappa),
            fmt_list(&self.x),
            fmt_list(&self.y),
            fmt_f64(self.value),
            fmt_f64(self.value_imag),
            fmt_f64(self.error_estimate),
            fmt_f64(self.imag_residue),
            fmt_opt(self.evaluations),
            fmt_opt(self.steps),
            fmt_opt(self.seed),
            self.timing_ms.map(fmt_f64).unwrap_or_default(),
        ]
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("bad {what} field in CSV record"));
        let get = |i: usize| row.get(i).ok_or_else(|| bad(RECORD_HEADER[i]));
        let float = |i: usize| -> Result<f64> { get(i)?.parse().map_err(|_| bad(RECORD_HEADER[i])) };
        let list = |i: usize| -> Result<Vec<f64>> {
            let s = get(i)?;
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|v| v.parse().map_err(|_| bad(RECORD_HEADER[i]))).collect()
        };
        let int = |i: usize| -> Result<Option<u64>> {
            let s = get(i)?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(RECORD_HEADER[i]))
            }
        };
        let timing = get(13)?;
        Ok(Record {
            method: get(0)?.to_string(),
            n: get(1)?.parse().map_err(|_| bad("n"))?,
            t: float(2)?,
            kappa: float(3)?,
            x: list(4)?,
            y: list(5)?,
            value: float(6)?,
            value_imag: float(7)?,
            error_estimate: float(8)?,
            imag_residue: float(9)?,
            evaluations: int(10)?,
            steps: int(11)?,
            seed: int(12)?,
            timing_ms: if timing.is_empty() {
                None
            } else {
                Some(timing.parse().map_err(|_| bad("timing_ms"))?)
            },
        })
    }
}

/// Parse CSV emitted for records (the leading record columns; extra
/// trailing columns are ignored).
pub fn parse_records_csv(text: &str) -> Result<Vec<Record>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::invalid(format!("CSV header: {e}")))?;
    if header.iter().take(RECORD_HEADER.len()).ne(RECORD_HEADER) {
        return Err(Error::invalid("CSV header does not match the record schema"));
    }
    rdr.records()
        .map(|r| Record::from_row(&r.map_err(|e| Error::invalid(format!("CSV: {e}")))?))
        .collect()
}

/// A header and string rows, rendered as CSV or as gnuplot columns.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn records(records: &[Record]) -> Self {
        let mut t = Self::new(RECORD_HEADER);
        t.rows = records.iter().map(Record::row).collect();
        t
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::resource(format!("CSV: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::resource(format!("CSV: {e}")))
    }

    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for row in &self.rows {
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::resource(format!("CSV: {e}"))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::resource(format!("JSON: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
