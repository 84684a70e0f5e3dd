//! Time-series representation, CSV ingestion/emission, and period inference.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::DateTime;
use thiserror::Error;

/// Max number of consecutive missing samples the repair path will fill.
pub const MAX_REPAIR_GAP: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: cannot parse timestamp {text:?}")]
    BadTimestamp { row: usize, text: String },
    #[error("row {row}: cannot parse value {text:?}")]
    BadValue { row: usize, text: String },
    #[error("row {row}: non-finite value")]
    NonFinite { row: usize },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(i64),
    #[error("irregular cadence at timestamp {at}: gap of {gap}s with cadence {cadence}s")]
    IrregularCadence { at: i64, gap: i64, cadence: i64 },
    #[error("gap of {missing} samples at timestamp {at} exceeds repair limit {limit}")]
    GapTooLarge {
        at: i64,
        missing: usize,
        limit: usize,
    },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("need at least 2 rows, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Error)]
#[error("no period hint and cadence {cadence}s has no default period; supply --period")]
pub struct PeriodError {
    pub cadence: i64,
}

/// Column names for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp: String,
    pub value: String,
    /// Fill gaps of up to [`MAX_REPAIR_GAP`] missing samples by linear
    /// interpolation instead of rejecting the file.
    pub repair: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp: "timestamp".into(),
            value: "value".into(),
            repair: false,
        }
    }
}

/// A regularly sampled series. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    cadence: i64,
    period: Option<usize>,
}

impl TimeSeries {
    /// Build a series from pre-validated parts. Timestamps must be strictly
    /// increasing with a fixed step and values finite.
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self, IngestError> {
        if timestamps.len() < 2 {
            return Err(IngestError::TooShort(timestamps.len()));
        }
        assert_eq!(timestamps.len(), values.len());
        let cadence = timestamps[1] - timestamps[0];
        for w in timestamps.windows(2) {
            let gap = w[1] - w[0];
            if gap == 0 {
                return Err(IngestError::DuplicateTimestamp(w[0]));
            }
            if gap != cadence {
                return Err(IngestError::IrregularCadence {
                    at: w[0],
                    gap,
                    cadence,
                });
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(IngestError::NonFinite { row: i });
            }
        }
        Ok(TimeSeries {
            timestamps,
            values,
            cadence,
            period: None,
        })
    }

    /// Synthetic series starting at epoch 0 with the given cadence.
    pub fn from_values(values: Vec<f64>, cadence: i64) -> Self {
        let timestamps = (0..values.len() as i64).map(|i| i * cadence).collect();
        TimeSeries::new(timestamps, values).expect("synthetic series is well-formed")
    }

    pub fn with_period(mut self, period: usize) -> Self {
        self.period = Some(period);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cadence(&self) -> i64 {
        self.cadence
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    /// Same timestamps/cadence, different values.
    pub fn map_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.len());
        TimeSeries {
            timestamps: self.timestamps.clone(),
            values,
            cadence: self.cadence,
            period: self.period,
        }
    }

    /// Trailing sub-series covering the last `days` days (trailing 24h units
    /// from the last sample). Returns the whole series if it is shorter.
    pub fn tail_days(&self, days: u32) -> Self {
        let samples_per_day = (86_400 / self.cadence).max(1) as usize;
        let keep = (samples_per_day * days as usize).min(self.len());
        let start = self.len() - keep;
        TimeSeries {
            timestamps: self.timestamps[start..].to_vec(),
            values: self.values[start..].to_vec(),
            cadence: self.cadence,
            period: self.period,
        }
    }
}

/// Series plus per-index ground-truth anomaly labels.
#[derive(Debug, Clone)]
pub struct LabeledSeries {
    pub series: TimeSeries,
    pub labels: Vec<bool>,
}

impl LabeledSeries {
    pub fn new(series: TimeSeries, labels: Vec<bool>) -> Self {
        assert_eq!(series.len(), labels.len());
        LabeledSeries { series, labels }
    }

    pub fn truth_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| l.then_some(i))
            .collect()
    }
}

fn parse_timestamp(text: &str, row: usize) -> Result<i64, IngestError> {
    let text = text.trim();
    if let Ok(t) = text.parse::<i64>() {
        return Ok(t);
    }
    // ISO-8601, with or without explicit offset.
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.timestamp());
    }
    if let Ok(naive) = text.parse::<chrono::NaiveDateTime>() {
        return Ok(naive.and_utc().timestamp());
    }
    Err(IngestError::BadTimestamp {
        row,
        text: text.to_string(),
    })
}

/// Load a two-column CSV into a validated series.
///
/// Rows may arrive in any order; they are sorted by timestamp. The cadence is
/// taken as the smallest inter-sample gap and every other gap must be an exact
/// multiple of it. Multiples > 1 are errors unless `schema.repair` is set, in
/// which case gaps of up to [`MAX_REPAIR_GAP`] missing samples are filled by
/// linear interpolation.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeries, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_io)?;
    let headers = reader.headers().map_err(csv_io)?.clone();
    let ts_col = headers
        .iter()
        .position(|h| h.trim() == schema.timestamp)
        .ok_or_else(|| IngestError::MissingColumn(schema.timestamp.clone()))?;
    let val_col = headers
        .iter()
        .position(|h| h.trim() == schema.value)
        .ok_or_else(|| IngestError::MissingColumn(schema.value.clone()))?;

    let mut rows: Vec<(i64, f64)> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_io)?;
        let ts_text = record.get(ts_col).unwrap_or("");
        let val_text = record.get(val_col).unwrap_or("");
        let ts = parse_timestamp(ts_text, row)?;
        let value: f64 = val_text.trim().parse().map_err(|_| IngestError::BadValue {
            row,
            text: val_text.to_string(),
        })?;
        if !value.is_finite() {
            return Err(IngestError::NonFinite { row });
        }
        rows.push((ts, value));
    }
    if rows.len() < 2 {
        return Err(IngestError::TooShort(rows.len()));
    }
    rows.sort_by_key(|&(t, _)| t);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(IngestError::DuplicateTimestamp(w[0].0));
        }
    }
    let cadence = rows
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .min()
        .expect("len >= 2");

    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    timestamps.push(rows[0].0);
    values.push(rows[0].1);
    for w in rows.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        let gap = t1 - t0;
        if gap % cadence != 0 {
            return Err(IngestError::IrregularCadence {
                at: t0,
                gap,
                cadence,
            });
        }
        let steps = (gap / cadence) as usize;
        if steps > 1 {
            if !schema.repair {
                return Err(IngestError::IrregularCadence {
                    at: t0,
                    gap,
                    cadence,
                });
            }
            if steps - 1 > MAX_REPAIR_GAP {
                return Err(IngestError::GapTooLarge {
                    at: t0,
                    missing: steps - 1,
                    limit: MAX_REPAIR_GAP,
                });
            }
            for k in 1..steps {
                let frac = k as f64 / steps as f64;
                timestamps.push(t0 + cadence * k as i64);
                values.push(v0 + frac * (v1 - v0));
            }
        }
        timestamps.push(t1);
        values.push(v1);
    }
    TimeSeries::new(timestamps, values)
}

fn csv_io(err: csv::Error) -> IngestError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IngestError::Io(e),
        other => IngestError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{other:?}"),
        )),
    }
}

/// Per-index anomaly annotations for [`write_csv`].
pub struct AnnotatedFlags<'a> {
    pub anomaly: &'a [bool],
    pub score: &'a [f64],
}

/// Emit `timestamp,value[,anomaly,score]`. Values round-trip exactly through
/// [`load_csv`] (shortest round-trip float formatting).
pub fn write_csv(
    series: &TimeSeries,
    flags: Option<AnnotatedFlags<'_>>,
    path: &Path,
) -> std::io::Result<()> {
    if let Some(f) = &flags {
        assert_eq!(f.anomaly.len(), series.len());
        assert_eq!(f.score.len(), series.len());
    }
    let mut out = String::new();
    match &flags {
        Some(_) => out.push_str("timestamp,value,anomaly,score\n"),
        None => out.push_str("timestamp,value\n"),
    }
    for i in 0..series.len() {
        let t = series.timestamps()[i];
        let v = series.values()[i];
        match &flags {
            Some(f) => {
                let _ = writeln!(out, "{t},{v},{},{}", u8::from(f.anomaly[i]), f.score[i]);
            }
            None => {
                let _ = writeln!(out, "{t},{v}");
            }
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(out.as_bytes())
}

/// Load a `timestamp,label` CSV (label in {0,1}) aligned with `series`.
pub fn load_labels(path: &Path, series: &TimeSeries) -> Result<Vec<bool>, IngestError> {
    let file = std::fs::File::open(path)?;
    let mut labels = vec![false; series.len()];
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if row == 0 {
            continue; // header
        }
        let mut parts = line.split(',');
        let ts = parse_timestamp(parts.next().unwrap_or(""), row)?;
        let label = parts.next().unwrap_or("0").trim();
        let flagged = label == "1";
        if let Ok(pos) = series.timestamps().binary_search(&ts) {
            labels[pos] = flagged;
        }
    }
    Ok(labels)
}

/// Samples per seasonal cycle: the hint when given, otherwise a cadence rule
/// (minute data gets a daily cycle of 1440, hourly data a daily cycle of 24).
pub fn infer_period(series: &TimeSeries, hint: Option<usize>) -> Result<usize, PeriodError> {
    if let Some(p) = hint {
        return Ok(p);
    }
    if let Some(p) = series.period() {
        return Ok(p);
    }
    match series.cadence() {
        60 => Ok(1440),
        3600 => Ok(24),
        cadence => Err(PeriodError { cadence }),
    }
}
