//! LOESS smoothing, seasonal-trend decomposition, and the median-trend
//! residual variant.

use thiserror::Error;

use crate::series::TimeSeries;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum DecompError {
    #[error("series length {len} shorter than 2×period ({period})")]
    TooShort { len: usize, period: usize },
    #[error("period {0} must be ≥ 2")]
    BadPeriod(usize),
    #[error("loess span {span} gives {q} neighbors, need ≥ {need}")]
    SpanTooSmall { span: f64, q: usize, need: usize },
    #[error("trend window {0} must be odd")]
    EvenTrendWindow(usize),
    #[error("component length {got} does not match series length {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Which residual formula a [`Decomposition`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// R = X − T − S
    ClassicResidual,
    /// R = X − S − median(X)
    MedianResidual,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub seasonal: Vec<f64>,
    pub trend: Vec<f64>,
    pub residual: Vec<f64>,
    pub series_median: f64,
    pub variant: Variant,
    /// Bisquare robustness weights from the last outer pass; all ones when no
    /// outer pass ran.
    pub robustness_weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StlConfig {
    pub period: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Span of the LOESS fit over each sub-cycle series, as a fraction of the
    /// sub-cycle length.
    pub seasonal_loess_span: f64,
    /// Width of the centered moving-average trend filter (odd). `None` picks
    /// the seasonal-annihilating default: width = period for odd periods,
    /// width = period+1 with half-weight endpoints for even periods.
    pub trend_window: Option<usize>,
    pub convergence_epsilon: f64,
}

impl StlConfig {
    pub fn new(period: usize) -> Self {
        StlConfig {
            period,
            inner_iterations: 2,
            outer_iterations: 1,
            seasonal_loess_span: 0.75,
            trend_window: None,
            convergence_epsilon: 1e-6,
        }
    }
}

/// Bisquare weight: (1 − u²)² on [0, 1), zero beyond.
pub fn bisquare(u: f64) -> f64 {
    if u < 1.0 {
        let v = 1.0 - u * u;
        v * v
    } else {
        0.0
    }
}

/// Locally weighted least-squares fit at each `x[i]`, using the ⌈span·n⌉
/// nearest neighbors with tricube distance weights, optionally multiplied by
/// per-point robustness weights. Degree 0 or 1.
pub fn loess_smooth(
    x: &[f64],
    y: &[f64],
    span: f64,
    degree: u8,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>, DecompError> {
    assert_eq!(x.len(), y.len());
    assert!(degree <= 1);
    let n = x.len();
    let q = (span * n as f64).ceil() as usize;
    let need = degree as usize + 1;
    if q < need {
        return Err(DecompError::SpanTooSmall { span, q, need });
    }
    let q = q.min(n);
    let mut fitted = Vec::with_capacity(n);
    let mut lo = 0usize;
    for i in 0..n {
        // Slide the window of q points so it holds the nearest neighbors;
        // x is strictly increasing so the window only ever moves right.
        while lo + q < n && x[i] - x[lo] > x[lo + q] - x[i] {
            lo += 1;
        }
        let hi = lo + q;
        let dmax = (x[i] - x[lo]).abs().max((x[hi - 1] - x[i]).abs());
        let mut sw = 0.0;
        let mut swx = 0.0;
        let mut swy = 0.0;
        let mut swxx = 0.0;
        let mut swxy = 0.0;
        for j in lo..hi {
            let d = if dmax > 0.0 {
                (x[j] - x[i]).abs() / dmax
            } else {
                0.0
            };
            let tri = if d < 1.0 {
                let t = 1.0 - d * d * d;
                t * t * t
            } else {
                0.0
            };
            let w = tri * weights.map_or(1.0, |r| r[j]);
            sw += w;
            swx += w * x[j];
            swy += w * y[j];
            if degree == 1 {
                swxx += w * x[j] * x[j];
                swxy += w * x[j] * y[j];
            }
        }
        if sw <= 0.0 {
            // Degenerate neighborhood: fall back to the unweighted local mean.
            let mean = y[lo..hi].iter().sum::<f64>() / q as f64;
            fitted.push(mean);
            continue;
        }
        if degree == 0 {
            fitted.push(swy / sw);
        } else {
            let denom = sw * swxx - swx * swx;
            if denom.abs() < 1e-12 * sw * sw * dmax.max(1.0).powi(2) {
                fitted.push(swy / sw);
            } else {
                let slope = (sw * swxy - swx * swy) / denom;
                let intercept = (swy - slope * swx) / sw;
                fitted.push(intercept + slope * x[i]);
            }
        }
    }
    Ok(fitted)
}

/// Centered moving average annihilating a periodic component: simple width
/// `period` for odd periods, width `period+1` with half-weight endpoints for
/// even periods (the 2×period convention). Returns the trend with edges
/// filled from the nearest interior value plus the valid interior range.
fn seasonal_moving_average(values: &[f64], period: usize) -> (Vec<f64>, std::ops::Range<usize>) {
    let n = values.len();
    if period % 2 == 1 {
        weighted_centered_ma(values, &vec![1.0 / period as f64; period])
    } else {
        let mut w = vec![1.0 / period as f64; period + 1];
        w[0] = 0.5 / period as f64;
        w[period] = 0.5 / period as f64;
        let _ = n;
        weighted_centered_ma(values, &w)
    }
}

fn weighted_centered_ma(values: &[f64], weights: &[f64]) -> (Vec<f64>, std::ops::Range<usize>) {
    let n = values.len();
    let width = weights.len();
    let half = width / 2;
    let valid = half..n - half;
    let mut trend = vec![0.0; n];
    for i in valid.clone() {
        let mut acc = 0.0;
        for (k, &w) in weights.iter().enumerate() {
            acc += w * values[i - half + k];
        }
        trend[i] = acc;
    }
    // Nearest-interior fill at the edges.
    for i in 0..valid.start {
        trend[i] = trend[valid.start];
    }
    for i in valid.end..n {
        trend[i] = trend[valid.end - 1];
    }
    (trend, valid)
}

fn simple_centered_ma(values: &[f64], window: usize) -> (Vec<f64>, std::ops::Range<usize>) {
    weighted_centered_ma(values, &vec![1.0 / window as f64; window])
}

fn check_len(series: &TimeSeries, period: usize) -> Result<(), DecompError> {
    if period < 2 {
        return Err(DecompError::BadPeriod(period));
    }
    if series.len() < 2 * period {
        return Err(DecompError::TooShort {
            len: series.len(),
            period,
        });
    }
    Ok(())
}

/// Classical additive decomposition: moving-average trend, sub-cycle-mean
/// seasonal (centered to sum to zero over a cycle), residual X − T − S.
pub fn classical_decompose(
    series: &TimeSeries,
    period: usize,
) -> Result<Decomposition, DecompError> {
    check_len(series, period)?;
    let x = series.values();
    let n = x.len();
    let (trend, valid) = seasonal_moving_average(x, period);

    // Sub-cycle means of the detrended data, using only indices with a valid
    // (non-edge-filled) trend.
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for i in valid.clone() {
        sums[i % period] += x[i] - trend[i];
        counts[i % period] += 1;
    }
    let mut pattern: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let level = pattern.iter().sum::<f64>() / period as f64;
    for p in pattern.iter_mut() {
        *p -= level;
    }
    let seasonal: Vec<f64> = (0..n).map(|i| pattern[i % period]).collect();
    let residual: Vec<f64> = (0..n).map(|i| x[i] - trend[i] - seasonal[i]).collect();
    Ok(Decomposition {
        seasonal,
        trend,
        residual,
        series_median: stats::median(x).expect("non-empty"),
        variant: Variant::ClassicResidual,
        robustness_weights: vec![1.0; n],
    })
}

/// Robust seasonal-trend decomposition: an inner loop alternating a
/// moving-average trend with LOESS smoothing of each sub-cycle series, plus an
/// optional outer loop that downweights anomalous points through the bisquare
/// function before the next inner pass.
pub fn stl_decompose(
    series: &TimeSeries,
    config: &StlConfig,
) -> Result<Decomposition, DecompError> {
    check_len(series, config.period)?;
    if let Some(w) = config.trend_window {
        if w % 2 == 0 {
            return Err(DecompError::EvenTrendWindow(w));
        }
    }
    let x = series.values();
    let n = x.len();
    let period = config.period;

    let mut seasonal = vec![0.0; n];
    let mut trend = vec![0.0; n];
    let mut weights = vec![1.0; n];

    for outer in 0..=config.outer_iterations {
        for _ in 0..config.inner_iterations {
            // Trend from the deseasonalized data.
            let deseasonalized: Vec<f64> = (0..n).map(|i| x[i] - seasonal[i]).collect();
            let (new_trend, _) = match config.trend_window {
                Some(w) => simple_centered_ma(&deseasonalized, w),
                None => seasonal_moving_average(&deseasonalized, period),
            };

            // Seasonal from LOESS over each sub-cycle series of the detrended
            // data, weighted by the robustness weights.
            let detrended: Vec<f64> = (0..n).map(|i| x[i] - new_trend[i]).collect();
            let mut new_seasonal = vec![0.0; n];
            for phase in 0..period {
                let idx: Vec<usize> = (phase..n).step_by(period).collect();
                let xs: Vec<f64> = (0..idx.len()).map(|c| c as f64).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
                let ws: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
                let fit = loess_smooth(&xs, &ys, config.seasonal_loess_span, 1, Some(&ws))?;
                for (&i, f) in idx.iter().zip(fit) {
                    new_seasonal[i] = f;
                }
            }
            // Center each cycle so the seasonal component carries no level.
            for chunk in new_seasonal.chunks_mut(period) {
                let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
                for v in chunk.iter_mut() {
                    *v -= mean;
                }
            }

            let delta = seasonal
                .iter()
                .zip(&new_seasonal)
                .chain(trend.iter().zip(&new_trend))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            seasonal = new_seasonal;
            trend = new_trend;
            if delta < config.convergence_epsilon {
                break;
            }
        }

        if outer < config.outer_iterations {
            let residual: Vec<f64> = (0..n).map(|i| x[i] - trend[i] - seasonal[i]).collect();
            let abs_res: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
            let med = stats::median(&abs_res).expect("non-empty");
            if med == 0.0 {
                // Degenerate perfect fit: nothing to downweight.
                weights.iter_mut().for_each(|w| *w = 1.0);
            } else {
                for (w, r) in weights.iter_mut().zip(&abs_res) {
                    *w = bisquare(r / (6.0 * med));
                }
            }
        }
    }

    let residual: Vec<f64> = (0..n).map(|i| x[i] - trend[i] - seasonal[i]).collect();
    Ok(Decomposition {
        seasonal,
        trend,
        residual,
        series_median: stats::median(x).expect("non-empty"),
        variant: Variant::ClassicResidual,
        robustness_weights: weights,
    })
}

/// Swap the residual for the median-trend variant: R = X − S − median(X).
/// The series median stands in for the trend, which removes spurious
/// residual breakouts caused by trend pulses.
pub fn median_residual(
    series: &TimeSeries,
    decomposition: &Decomposition,
) -> Result<Decomposition, DecompError> {
    if decomposition.seasonal.len() != series.len() {
        return Err(DecompError::LengthMismatch {
            got: decomposition.seasonal.len(),
            want: series.len(),
        });
    }
    let med = stats::median(series.values()).expect("non-empty");
    let residual: Vec<f64> = series
        .values()
        .iter()
        .zip(&decomposition.seasonal)
        .map(|(x, s)| x - s - med)
        .collect();
    Ok(Decomposition {
        residual,
        series_median: med,
        variant: Variant::MedianResidual,
        ..decomposition.clone()
    })
}
