//! Classical and robust summary statistics plus moving-average smoothers.

use thiserror::Error;

/// Scale factor making the MAD a consistent estimator of the standard
/// deviation under normality. Applied only inside the hybrid ESD statistic;
/// [`mad`] itself stays raw.
pub const MAD_CONSISTENCY_SCALE: f64 = 1.4826;

const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("window {window} exceeds length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("parameter {name} = {value} outside {range}")]
    BadParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct SummaryStats {
    pub mean: f64,
    pub sample_std: f64,
    pub median: f64,
    pub mad: f64,
    pub mad_consistency_scale: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Result<Self, StatError> {
        let (mean, sample_std) = mean_std(values)?;
        Ok(SummaryStats {
            mean,
            sample_std,
            median: median(values)?,
            mad: mad(values)?,
            mad_consistency_scale: MAD_CONSISTENCY_SCALE,
        })
    }
}

/// Sample mean and n−1 standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64), StatError> {
    if values.len() < 2 {
        return Err(StatError::TooFew {
            need: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Middle order statistic; mean of the two middle ones for even length.
pub fn median(values: &[f64]) -> Result<f64, StatError> {
    if values.is_empty() {
        return Err(StatError::TooFew { need: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(median_of_sorted(&sorted))
}

pub(crate) fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Raw median absolute deviation from the median, unscaled.
pub fn mad(values: &[f64]) -> Result<f64, StatError> {
    let med = median(values)?;
    let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    median(&deviations)
}

/// Trailing simple moving average; output index i covers the window ending at
/// input index i+window−1.
pub fn sma(values: &[f64], window: usize) -> Result<Vec<f64>, StatError> {
    if window == 0 || window > values.len() {
        return Err(StatError::WindowTooLarge {
            window,
            len: values.len(),
        });
    }
    let inv = 1.0 / window as f64;
    let mut out = Vec::with_capacity(values.len() - window + 1);
    let mut sum: f64 = values[..window].iter().sum();
    out.push(sum * inv);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum * inv);
    }
    Ok(out)
}

/// EWMA: y_1 = x_1, y_t = α·x_t + (1−α)·y_{t−1}.
pub fn ewma(values: &[f64], alpha: f64) -> Result<Vec<f64>, StatError> {
    if values.is_empty() {
        return Err(StatError::TooFew { need: 1, got: 0 });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(StatError::BadParameter {
            name: "alpha",
            value: alpha,
            range: "(0, 1]",
        });
    }
    let mut out = Vec::with_capacity(values.len());
    let mut y = values[0];
    out.push(y);
    for &x in &values[1..] {
        y = alpha * x + (1.0 - alpha) * y;
        out.push(y);
    }
    Ok(out)
}

/// Probabilistic EWMA: the weight on the current sample is damped by the
/// Gaussian density of its standardized residual, α_t = α·(1 − β·P_t).
///
/// Seeds μ_1 = x_1 and σ_1 = 0 (floored); the local σ is itself tracked as an
/// EWMA of squared residuals.
pub fn pewma(values: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>, StatError> {
    if values.is_empty() {
        return Err(StatError::TooFew { need: 1, got: 0 });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(StatError::BadParameter {
            name: "alpha",
            value: alpha,
            range: "(0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(StatError::BadParameter {
            name: "beta",
            value: beta,
            range: "[0, 1]",
        });
    }
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut out = Vec::with_capacity(values.len());
    let mut mu = values[0];
    let mut var = 0.0_f64;
    out.push(mu);
    for &x in &values[1..] {
        let sigma = var.sqrt().max(SIGMA_FLOOR);
        let z = (x - mu) / sigma;
        let p = inv_sqrt_2pi * (-0.5 * z * z).exp();
        let a = alpha * (1.0 - beta * p);
        let resid = x - mu;
        mu = a * x + (1.0 - a) * mu;
        var = a * resid * resid + (1.0 - a) * var;
        out.push(mu);
    }
    Ok(out)
}
