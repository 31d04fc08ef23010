//! Labeled multivariate time series and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};

/// Provenance of the values held by a [`SeriesFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    GeometricReturns,
    LogReturns,
}

/// Kind of return transform applied by [`to_returns`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    Geometric,
    Log,
}

/// `N x p` table of observations with column labels and ordered times.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    labels: Vec<String>,
    time_label: Option<String>,
    times: Vec<String>,
    values: DMatrix<f64>,
    transform: Transform,
}

/// Header names recognized as a time column when none is given explicitly.
const TIME_HEADERS: &[&str] = &["t", "time", "date", "timestamp", "index", "datetime"];

impl SeriesFrame {
    /// Builds a frame, checking shapes, finiteness and strictly increasing
    /// times. `times = None` assigns integer indices `1..=N`.
    pub fn new(
        labels: Vec<String>,
        times: Option<Vec<String>>,
        values: DMatrix<f64>,
        transform: Transform,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if labels.len() != p {
            return Err(TvvarError::Dimension(format!("{} labels for {p} columns", labels.len())));
        }
        if p == 0 {
            return Err(TvvarError::Dimension("series has no columns".into()));
        }
        for r in 0..n {
            for c in 0..p {
                if !values[(r, c)].is_finite() {
                    return Err(TvvarError::Data {
                        row: r + 1,
                        column: labels[c].clone(),
                        msg: "non-finite value".into(),
                    });
                }
            }
        }
        let (time_label, times) = match times {
            Some(t) => {
                if t.len() != n {
                    return Err(TvvarError::Dimension(format!("{} timestamps for {n} rows", t.len())));
                }
                check_increasing(&t)?;
                (Some("t".to_string()), t)
            }
            None => (None, (1..=n).map(|i| i.to_string()).collect()),
        };
        Ok(SeriesFrame { labels, time_label, times, values, transform })
    }

    /// Frame with default labels `y1..yp` and integer times.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(labels, None, values, Transform::None)
    }

    /// Frame from a list of observation vectors.
    pub fn from_observations(obs: &[DVector<f64>]) -> Result<Self> {
        let p = obs.first().map_or(0, |o| o.len());
        if obs.iter().any(|o| o.len() != p) {
            return Err(TvvarError::Dimension("ragged observations".into()));
        }
        let values = DMatrix::from_fn(obs.len(), p, |r, c| obs[r][c]);
        Self::from_matrix(values)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Series dimension `p`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Observation `y_t` for the 1-based time index `t`.
    pub fn observation(&self, t: usize) -> DVector<f64> {
        assert!(t >= 1 && t <= self.len(), "time index {t} outside 1..={}", self.len());
        self.values.row(t - 1).transpose()
    }

    /// Copy of the frame with columns reordered by `perm` (new column `j`
    /// is old column `perm[j]`).
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(TvvarError::Dimension("permutation length".into()));
        }
        let values = DMatrix::from_fn(self.len(), self.dim(), |r, c| self.values[(r, perm[c])]);
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(SeriesFrame { labels, values, ..self.clone() })
    }

    /// First `n` observations.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        SeriesFrame {
            times: self.times[..n].to_vec(),
            values: self.values.rows(0, n).into_owned(),
            ..self.clone()
        }
    }
}

fn check_increasing(times: &[String]) -> Result<()> {
    let numeric: Option<Vec<f64>> = times.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    for i in 1..times.len() {
        let ok = match &numeric {
            Some(v) => v[i] > v[i - 1],
            None => times[i] > times[i - 1],
        };
        if !ok {
            return Err(TvvarError::Data {
                row: i + 1,
                column: "time".into(),
                msg: format!("time '{}' does not follow '{}'", times[i], times[i - 1]),
            });
        }
    }
    Ok(())
}

/// How to find the time column when loading a CSV file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum TimeColumn {
    /// Use the first column if its header is a common time name.
    #[default]
    Auto,
    Named(String),
    Absent,
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub time_column: TimeColumn,
    /// Restrict to these value columns, in this order.
    pub columns: Option<Vec<String>>,
}

/// Loads a frame from a CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<SeriesFrame> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| TvvarError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv(file, options)
}

/// Reads a frame from any CSV source.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<SeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() {
        return Err(TvvarError::Csv("empty header".into()));
    }
    let time_idx = match &options.time_column {
        TimeColumn::Auto => TIME_HEADERS
            .contains(&headers[0].to_ascii_lowercase().as_str())
            .then_some(0),
        TimeColumn::Named(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| TvvarError::Csv(format!("time column '{name}' not found")))?,
        ),
        TimeColumn::Absent => None,
    };
    let value_idx: Vec<usize> = match &options.columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| TvvarError::Csv(format!("column '{c}' not found")))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| Some(i) != time_idx).collect(),
    };
    if value_idx.is_empty() {
        return Err(TvvarError::Csv("no value columns".into()));
    }

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // row numbers count the header as row 1
        let row = r + 2;
        let rec = rec.map_err(|e| TvvarError::Csv(format!("row {row}: {e}")))?;
        if rec.len() != headers.len() {
            return Err(TvvarError::Data {
                row,
                column: "*".into(),
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        if let Some(ti) = time_idx {
            let t = rec.get(ti).unwrap_or("");
            if t.is_empty() {
                return Err(TvvarError::Data { row, column: headers[ti].clone(), msg: "missing time".into() });
            }
            times.push(t.to_string());
        }
        for &ci in &value_idx {
            let cell = rec.get(ci).unwrap_or("");
            if cell.is_empty() {
                return Err(TvvarError::Data { row, column: headers[ci].clone(), msg: "missing value".into() });
            }
            let v: f64 = cell.parse().map_err(|_| TvvarError::Data {
                row,
                column: headers[ci].clone(),
                msg: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(TvvarError::Data { row, column: headers[ci].clone(), msg: format!("non-finite value '{cell}'") });
            }
            data.push(v);
        }
    }
    let n = data.len() / value_idx.len();
    let values = DMatrix::from_row_slice(n, value_idx.len(), &data);
    let labels = value_idx.iter().map(|&i| headers[i].clone()).collect();
    let mut frame = SeriesFrame::new(labels, time_idx.map(|_| times), values, Transform::None)?;
    frame.time_label = time_idx.map(|i| headers[i].clone());
    Ok(frame)
}

/// Canonical machine-facing number format: 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the frame as CSV with 17 significant digits per value.
pub fn write_csv<W: Write>(frame: &SeriesFrame, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if let Some(t) = &frame.time_label {
        header.push(t);
    }
    header.extend(frame.labels.iter().map(String::as_str));
    wtr.write_record(&header)?;
    for r in 0..frame.len() {
        let mut rec: Vec<String> = Vec::with_capacity(frame.dim() + 1);
        if frame.time_label.is_some() {
            rec.push(frame.times[r].clone());
        }
        rec.extend(frame.values.row(r).iter().map(|&v| fmt_num(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the frame to a file.
pub fn save_csv(frame: &SeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| TvvarError::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_csv(frame, std::io::BufWriter::new(file))
}

/// Converts prices to geometric (`x_t/x_{t−1} − 1`) or log returns.
pub fn to_returns(frame: &SeriesFrame, kind: ReturnKind) -> Result<SeriesFrame> {
    if frame.transform != Transform::None {
        return Err(TvvarError::InvalidConfig("series is already a return series".into()));
    }
    if frame.len() < 2 {
        return Err(TvvarError::InsufficientData { needed: 2, got: frame.len() });
    }
    let (n, p) = frame.values.shape();
    let mut out = DMatrix::zeros(n - 1, p);
    for c in 0..p {
        for r in 1..n {
            let prev = frame.values[(r - 1, c)];
            let cur = frame.values[(r, c)];
            out[(r - 1, c)] = match kind {
                ReturnKind::Geometric => {
                    if prev == 0.0 {
                        return Err(TvvarError::Data { row: r + 1, column: frame.labels[c].clone(), msg: "zero price".into() });
                    }
                    cur / prev - 1.0
                }
                ReturnKind::Log => {
                    if prev <= 0.0 || cur <= 0.0 {
                        let row = if prev <= 0.0 { r } else { r + 1 };
                        return Err(TvvarError::Data { row, column: frame.labels[c].clone(), msg: "non-positive price".into() });
                    }
                    cur.ln() - prev.ln()
                }
            };
        }
    }
    Ok(SeriesFrame {
        labels: frame.labels.clone(),
        time_label: frame.time_label.clone(),
        times: frame.times[1..].to_vec(),
        values: out,
        transform: match kind {
            ReturnKind::Geometric => Transform::GeometricReturns,
            ReturnKind::Log => Transform::LogReturns,
        },
    })
}
