//! Forecast error measures and the cross-model comparison report.
//!
//! Percentage errors divide by the actual load.

use thiserror::Error;

use crate::engine::ForecastTrace;

/// Default ACPER tolerance in percent.
pub const DEFAULT_ACPER_TAU: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {actual} actuals vs {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("actual at position {index} is {value}; must be finite and > 0")]
    NonPositiveActual { index: usize, value: f64 },
    #[error("non-finite prediction at position {0}")]
    NonFinitePrediction(usize),
    #[error("tau must be > 0, got {0}")]
    BadTau(f64),
    #[error("traces are not aligned: {0}")]
    Misaligned(String),
}

fn check(actual: &[f64], predicted: &[f64], positive: bool) -> Result<(), MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (i, &a) in actual.iter().enumerate() {
        if !a.is_finite() || (positive && a <= 0.0) {
            return Err(MetricsError::NonPositiveActual { index: i, value: a });
        }
    }
    if let Some(i) = predicted.iter().position(|p| !p.is_finite()) {
        return Err(MetricsError::NonFinitePrediction(i));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, true)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| ((a - p) / a).abs())
        .sum();
    Ok(100.0 * sum / actual.len() as f64)
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, false)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(sum / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, false)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Root mean square percentage error, in percent.
pub fn rmspe(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, true)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| ((a - p) / a).powi(2))
        .sum();
    Ok(100.0 * (sum / actual.len() as f64).sqrt())
}

/// Percentage of steps whose relative error is within `tau` percent.
pub fn acper(actual: &[f64], predicted: &[f64], tau: f64) -> Result<f64, MetricsError> {
    if !(tau > 0.0) {
        return Err(MetricsError::BadTau(tau));
    }
    check(actual, predicted, true)?;
    let hits = actual
        .iter()
        .zip(predicted)
        .filter(|(a, p)| ((*a - *p) / *a).abs() <= tau / 100.0)
        .count();
    Ok(100.0 * hits as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub protocol: String,
    pub mape_pct: f64,
    pub mae_mw: f64,
    pub rmse_mw: f64,
    pub rmspe_pct: f64,
    pub acper_pct: f64,
    pub n: usize,
}

impl MetricRow {
    pub fn compute(
        model: &str,
        protocol: &str,
        actual: &[f64],
        predicted: &[f64],
        tau: f64,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            model: model.to_string(),
            protocol: protocol.to_string(),
            mape_pct: mape(actual, predicted)?,
            mae_mw: mae(actual, predicted)?,
            rmse_mw: rmse(actual, predicted)?,
            rmspe_pct: rmspe(actual, predicted)?,
            acper_pct: acper(actual, predicted, tau)?,
            n: actual.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub n: usize,
}

pub const REPORT_HEADER: &str = "model,protocol,mape_pct,mae_mw,rmse_mw,rmspe_pct,acper_pct,n";

impl MetricReport {
    /// Rows sorted ascending by MAPE (stable for ties).
    pub fn from_rows(mut rows: Vec<MetricRow>) -> Result<Self, MetricsError> {
        let n = rows.first().map(|r| r.n).ok_or(MetricsError::Empty)?;
        rows.sort_by(|a, b| a.mape_pct.total_cmp(&b.mape_pct));
        Ok(Self { rows, n })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.model, r.protocol, r.mape_pct, r.mae_mw, r.rmse_mw, r.rmspe_pct, r.acper_pct, r.n
            ));
        }
        out
    }
}

/// One row per trace over all evaluated steps, sorted by MAPE.
pub fn compare_report(traces: &[ForecastTrace]) -> Result<MetricReport, MetricsError> {
    compare_report_with_tau(traces, DEFAULT_ACPER_TAU)
}

pub fn compare_report_with_tau(traces: &[ForecastTrace], tau: f64) -> Result<MetricReport, MetricsError> {
    let first = traces.first().ok_or(MetricsError::Empty)?;
    let reference: Vec<usize> = first.steps.iter().map(|s| s.index).collect();
    let mut rows = Vec::with_capacity(traces.len());
    for t in traces {
        let idx: Vec<usize> = t.steps.iter().map(|s| s.index).collect();
        if idx != reference {
            return Err(MetricsError::Misaligned(format!(
                "{} ({}) evaluates {} steps, {} ({}) evaluates {}",
                t.model,
                t.protocol,
                idx.len(),
                first.model,
                first.protocol,
                reference.len()
            )));
        }
        let (actual, predicted) = t.actual_predicted();
        rows.push(MetricRow::compute(&t.model, &t.protocol, &actual, &predicted, tau)?);
    }
    MetricReport::from_rows(rows)
}
