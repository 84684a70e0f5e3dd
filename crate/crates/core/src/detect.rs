//! Anomaly tests: three-sigma, Grubbs, generalized ESD (classical and
//! hybrid), the seasonal pipelines S-ESD / S-H-ESD, and threshold refinement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{self, DecompError, StlConfig};
use crate::series::{PeriodError, TimeSeries};
use crate::stats::{self, StatError, MAD_CONSISTENCY_SCALE};
use crate::tdist::{self, MathError};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Period(#[from] PeriodError),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ThreeSigma,
    Grubbs,
    Esd,
    SEsd,
    SHEsd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ThreeSigma => "three-sigma",
            Algorithm::Grubbs => "grubbs",
            Algorithm::Esd => "esd",
            Algorithm::SEsd => "s-esd",
            Algorithm::SHEsd => "s-h-esd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    Both,
}

impl Direction {
    fn admits(self, deviation: f64) -> bool {
        match self {
            Direction::Positive => deviation > 0.0,
            Direction::Negative => deviation < 0.0,
            Direction::Both => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Maximum fraction of points that may be reported anomalous, in
    /// (0, 0.49]. The upper bound tracks the MAD breakdown point.
    pub max_anoms: f64,
    pub direction: Direction,
    pub period: Option<usize>,
    /// Optional magnitude floor: anomalies at or below this raw value are
    /// dropped from the report.
    pub threshold: Option<f64>,
    pub mad_scale: f64,
}

impl DetectorConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        DetectorConfig {
            algorithm,
            alpha: 0.05,
            max_anoms: 0.10,
            direction: Direction::Both,
            period: None,
            threshold: None,
            mad_scale: MAD_CONSISTENCY_SCALE,
        }
    }

    fn validate(&self, n: usize) -> Result<(), DetectError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DetectError::Config(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.max_anoms > 0.0 && self.max_anoms <= 0.49) {
            return Err(DetectError::Config(format!(
                "max_anoms {} outside (0, 0.49]",
                self.max_anoms
            )));
        }
        if self.max_anoms * (n as f64) < 1.0 {
            return Err(DetectError::Config(format!(
                "max_anoms {} admits no anomalies on {n} points",
                self.max_anoms
            )));
        }
        Ok(())
    }

    pub fn run(&self, series: &TimeSeries) -> Result<AnomalyReport, DetectError> {
        match self.algorithm {
            Algorithm::ThreeSigma => three_sigma(series, self),
            Algorithm::Grubbs => grubbs(series, self.alpha, self),
            Algorithm::Esd => {
                self.validate(series.len())?;
                let k_max = (self.max_anoms * series.len() as f64).ceil() as usize;
                let hits = esd(
                    series.values(),
                    self.alpha,
                    k_max,
                    false,
                    self.mad_scale,
                    self.direction,
                )?;
                let hits = hits
                    .into_iter()
                    .map(|(index, score, deviation)| EsdHit {
                        index,
                        score,
                        deviation,
                    })
                    .collect();
                Ok(self.finish(series, hits))
            }
            Algorithm::SEsd => s_esd(series, self),
            Algorithm::SHEsd => s_h_esd(series, self),
        }
    }

    fn finish(&self, series: &TimeSeries, mut hits: Vec<EsdHit>) -> AnomalyReport {
        hits.sort_by_key(|h| h.index);
        let report = AnomalyReport {
            indices: hits.iter().map(|h| h.index).collect(),
            timestamps: hits.iter().map(|h| series.timestamps()[h.index]).collect(),
            values: hits.iter().map(|h| series.values()[h.index]).collect(),
            scores: hits.iter().map(|h| h.score).collect(),
            directions: hits
                .iter()
                .map(|h| {
                    if h.deviation >= 0.0 {
                        Direction::Positive
                    } else {
                        Direction::Negative
                    }
                })
                .collect(),
            percent_anomalous: 100.0 * hits.len() as f64 / series.len() as f64,
            series_len: series.len(),
            config: self.clone(),
        };
        match self.threshold {
            Some(t) => apply_threshold(&report, t, ThresholdMode::AboveValue),
            None => report,
        }
    }
}

/// Detected anomalies, sorted by index.
#[derive(Debug, Clone, Serialize)]
pub struct AnomalyReport {
    pub indices: Vec<usize>,
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    /// Test-statistic value at the step that removed the point.
    pub scores: Vec<f64>,
    pub directions: Vec<Direction>,
    pub percent_anomalous: f64,
    pub series_len: usize,
    pub config: DetectorConfig,
}

impl AnomalyReport {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct EsdHit {
    index: usize,
    score: f64,
    deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Keep anomalies whose raw value exceeds the threshold.
    AboveValue,
    /// Keep anomalies whose |deviation score| exceeds the threshold.
    AboveDeviation,
}

/// Retain only anomalies above a magnitude floor.
pub fn apply_threshold(
    report: &AnomalyReport,
    threshold: f64,
    mode: ThresholdMode,
) -> AnomalyReport {
    let keep: Vec<usize> = (0..report.len())
        .filter(|&k| match mode {
            ThresholdMode::AboveValue => report.values[k] > threshold,
            ThresholdMode::AboveDeviation => report.scores[k].abs() > threshold,
        })
        .collect();
    AnomalyReport {
        indices: keep.iter().map(|&k| report.indices[k]).collect(),
        timestamps: keep.iter().map(|&k| report.timestamps[k]).collect(),
        values: keep.iter().map(|&k| report.values[k]).collect(),
        scores: keep.iter().map(|&k| report.scores[k]).collect(),
        directions: keep.iter().map(|&k| report.directions[k]).collect(),
        percent_anomalous: 100.0 * keep.len() as f64 / report.series_len as f64,
        series_len: report.series_len,
        config: report.config.clone(),
    }
}

/// Flag every point more than three sample standard deviations from the mean.
pub fn three_sigma(
    series: &TimeSeries,
    config: &DetectorConfig,
) -> Result<AnomalyReport, DetectError> {
    let (mean, std) = stats::mean_std(series.values())?;
    let mut hits = Vec::new();
    if std > 0.0 {
        for (i, &v) in series.values().iter().enumerate() {
            let dev = v - mean;
            if dev.abs() > 3.0 * std && config.direction.admits(dev) {
                hits.push(EsdHit {
                    index: i,
                    score: dev.abs() / std,
                    deviation: dev,
                });
            }
        }
    }
    Ok(config.finish(series, hits))
}

/// Grubbs critical value for a two-sided test at significance `alpha`.
pub fn grubbs_critical_value(n: usize, alpha: f64) -> Result<f64, MathError> {
    let nf = n as f64;
    let t = tdist::t_quantile(1.0 - alpha / (2.0 * nf), nf - 2.0)?;
    Ok((nf - 1.0) / nf.sqrt() * (t * t / (nf - 2.0 + t * t)).sqrt())
}

/// Single-outlier Grubbs test; the report holds zero or one index.
pub fn grubbs(
    series: &TimeSeries,
    alpha: f64,
    config: &DetectorConfig,
) -> Result<AnomalyReport, DetectError> {
    let n = series.len();
    if n < 3 {
        return Err(StatError::TooFew { need: 3, got: n }.into());
    }
    let (mean, std) = stats::mean_std(series.values())?;
    let mut hits = Vec::new();
    if std > 0.0 {
        let (idx, dev) = series
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, v - mean))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty");
        let g = dev.abs() / std;
        if g > grubbs_critical_value(n, alpha)? && config.direction.admits(dev) {
            hits.push(EsdHit {
                index: idx,
                score: g,
                deviation: dev,
            });
        }
    }
    Ok(config.finish(series, hits))
}

/// ESD critical value λ_j for the j-th removal (1-based) out of n points.
pub fn esd_critical_value(n: usize, j: usize, alpha: f64) -> Result<f64, MathError> {
    let nf = n as f64;
    let jf = j as f64;
    let p = 1.0 - alpha / (2.0 * (nf - jf + 1.0));
    let t = tdist::t_quantile(p, nf - jf - 1.0)?;
    Ok((nf - jf) * t / (((nf - jf - 1.0 + t * t) * (nf - jf + 1.0)).sqrt()))
}

// Remaining sample kept sorted by (value, original index); removal is O(n)
// but keeps median/extremes O(1) and the MAD a linear two-pointer scan.
struct EsdState {
    sorted: Vec<(f64, usize)>,
    sum: f64,
    sum_sq: f64,
}

impl EsdState {
    fn new(values: &[f64]) -> Self {
        let mut sorted: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let sum = values.iter().sum();
        let sum_sq = values.iter().map(|v| v * v).sum();
        EsdState {
            sorted,
            sum,
            sum_sq,
        }
    }

    fn len(&self) -> usize {
        self.sorted.len()
    }

    fn mean_std(&self) -> (f64, f64) {
        let n = self.len() as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (mean, var.sqrt())
    }

    fn median(&self) -> f64 {
        let n = self.len();
        if n % 2 == 1 {
            self.sorted[n / 2].0
        } else {
            0.5 * (self.sorted[n / 2 - 1].0 + self.sorted[n / 2].0)
        }
    }

    /// Median of |x − center|: the absolute deviations form two sorted runs
    /// (left of center descending, right ascending), merged with two pointers.
    fn mad_about(&self, center: f64) -> f64 {
        let n = self.len();
        let split = self.sorted.partition_point(|&(v, _)| v < center);
        let mut left = split; // walks downward, next candidate left-1
        let mut right = split; // walks upward
        let target_hi = n / 2; // 0-based rank of the upper middle
        let mut prev = 0.0;
        let mut cur = 0.0;
        for rank in 0..=target_hi {
            prev = cur;
            let lval = if left > 0 {
                Some(center - self.sorted[left - 1].0)
            } else {
                None
            };
            let rval = if right < n {
                Some(self.sorted[right].0 - center)
            } else {
                None
            };
            cur = match (lval, rval) {
                (Some(l), Some(r)) => {
                    if l <= r {
                        left -= 1;
                        l
                    } else {
                        right += 1;
                        r
                    }
                }
                (Some(l), None) => {
                    left -= 1;
                    l
                }
                (None, Some(r)) => {
                    right += 1;
                    r
                }
                (None, None) => unreachable!("rank {rank} below n"),
            };
        }
        if n % 2 == 1 {
            cur
        } else {
            0.5 * (prev + cur)
        }
    }

    /// Most extreme remaining point relative to `center`; ties broken toward
    /// the lowest original index.
    fn extreme(&self, center: f64) -> (usize, usize, f64) {
        let n = self.len();
        let lo_dev = center - self.sorted[0].0;
        let hi_dev = self.sorted[n - 1].0 - center;
        // Equal-value runs at either end: the run member with the lowest
        // original index comes first in the sort order for the low end, but
        // must be searched for at the high end.
        if lo_dev > hi_dev || (lo_dev == hi_dev && self.tie_low_wins()) {
            (0, self.sorted[0].1, -lo_dev)
        } else {
            let top = self.sorted[n - 1].0;
            let start = self.sorted.partition_point(|&(v, _)| v < top);
            (start, self.sorted[start].1, hi_dev)
        }
    }

    fn tie_low_wins(&self) -> bool {
        let n = self.len();
        let top = self.sorted[n - 1].0;
        let start = self.sorted.partition_point(|&(v, _)| v < top);
        self.sorted[0].1 < self.sorted[start].1
    }

    fn remove(&mut self, pos: usize) -> (f64, usize) {
        let (v, idx) = self.sorted.remove(pos);
        self.sum -= v;
        self.sum_sq -= v * v;
        (v, idx)
    }
}

/// Generalized ESD (Rosner). Removes up to `k_max` extreme points; the number
/// of anomalies is the largest j whose test statistic C_j exceeds the critical
/// value λ_j. `hybrid` swaps (mean, sample std) for (median, mad_scale·MAD).
pub fn esd(
    values: &[f64],
    alpha: f64,
    k_max: usize,
    hybrid: bool,
    mad_scale: f64,
    direction: Direction,
) -> Result<Vec<(usize, f64, f64)>, DetectError> {
    let n = values.len();
    if n < 3 {
        return Err(StatError::TooFew { need: 3, got: n }.into());
    }
    if k_max + 2 >= n {
        return Err(DetectError::Config(format!(
            "k_max {k_max} too large for series of length {n}"
        )));
    }
    let mut state = EsdState::new(values);
    let mut removed: Vec<(usize, f64, f64)> = Vec::with_capacity(k_max); // (index, C_j, deviation)
    let mut last_significant = 0usize;
    for j in 1..=k_max {
        let (location, dispersion) = if hybrid {
            let med = state.median();
            (med, mad_scale * state.mad_about(med))
        } else {
            state.mean_std()
        };
        if dispersion <= 0.0 {
            break;
        }
        let (pos, _idx, deviation) = state.extreme(location);
        let stat = deviation.abs() / dispersion;
        let (_, idx) = state.remove(pos);
        removed.push((idx, stat, deviation));
        if stat > esd_critical_value(n, j, alpha)? {
            last_significant = j;
        }
    }
    removed.truncate(last_significant);
    removed.retain(|&(_, _, dev)| direction.admits(dev));
    Ok(removed)
}

fn seasonal_residual(
    series: &TimeSeries,
    config: &DetectorConfig,
) -> Result<Vec<f64>, DetectError> {
    let period = crate::series::infer_period(series, config.period)?;
    let stl = decompose::stl_decompose(series, &StlConfig::new(period))?;
    let med = decompose::median_residual(series, &stl)?;
    let mut residual = med.residual;
    // Clamp float-rounding dust to zero so an exactly reconstructed series
    // yields an empty report instead of studentizing numerical noise. The
    // series range keeps the floor shift-invariant and scale-proportional.
    let (min, max) = series
        .values()
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let floor = 1e-10 * (max - min);
    for r in residual.iter_mut() {
        if r.abs() < floor {
            *r = 0.0;
        }
    }
    Ok(residual)
}

/// Seasonal ESD: robust decomposition, median-trend residual, classical ESD
/// on the residual.
pub fn s_esd(series: &TimeSeries, config: &DetectorConfig) -> Result<AnomalyReport, DetectError> {
    seasonal_esd(series, config, false)
}

/// Seasonal Hybrid ESD: the same pipeline with the median/MAD test statistic,
/// which keeps the test calibrated under heavy contamination.
pub fn s_h_esd(series: &TimeSeries, config: &DetectorConfig) -> Result<AnomalyReport, DetectError> {
    seasonal_esd(series, config, true)
}

fn seasonal_esd(
    series: &TimeSeries,
    config: &DetectorConfig,
    hybrid: bool,
) -> Result<AnomalyReport, DetectError> {
    config.validate(series.len())?;
    let residual = seasonal_residual(series, config)?;
    let k_max = (config.max_anoms * series.len() as f64).ceil() as usize;
    let k_max = k_max.min(series.len().saturating_sub(3));
    let hits = esd(
        &residual,
        config.alpha,
        k_max,
        hybrid,
        config.mad_scale,
        config.direction,
    )?;
    let hits = hits
        .into_iter()
        .map(|(index, score, deviation)| EsdHit {
            index,
            score,
            deviation,
        })
        .collect();
    Ok(config.finish(series, hits))
}
