//! Seasonal (Hybrid) ESD anomaly detection for regularly sampled metrics.
//!
//! The crate decomposes a seasonal time series into seasonal, trend, and
//! residual components, then runs a generalized extreme studentized deviate
//! test on the residual. The hybrid variant swaps the mean and standard
//! deviation in the test statistic for the median and scaled MAD, which keeps
//! the test usable when a large fraction of the data is anomalous.
//!
//! Besides the seasonal detectors, the crate ships the classical baselines
//! (three-sigma, Grubbs, plain ESD), moving-average smoothers, and a
//! supervised evaluation harness based on anomaly injection.

pub mod decompose;
pub mod detect;
pub mod eval;
pub mod series;
pub mod stats;
pub mod tdist;

pub use detect::{Algorithm, AnomalyReport, DetectError, DetectorConfig, Direction};
pub use series::{IngestError, LabeledSeries, TimeSeries};
