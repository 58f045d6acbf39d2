//! The sliding-window forecasting loop.
//!
//! Each batch refits the regressor on the `W` most recent samples before the
//! cursor, forecasts `h` steps recursively, scores the batch against the
//! actual load and then moves the cursor past it. Under the adaptive
//! protocol the next `h` follows the batch MAPE: above the upper threshold
//! it shrinks by one, below the lower threshold it grows by one, and it is
//! always kept within `[h_min, h_max]`.
//!
//! Baselines reuse the same loop with the refit or horizon rule switched
//! off, so every protocol evaluates the same indices.

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::data::{window_of, DataError, LoadSeries};
use crate::metrics::{mape, MetricsError};
use crate::regressors::{fit_model, ModelError, ModelSpec, OneStep, Predictor};
use crate::spectral::{size_window, SizingConfig, SpectralError, WindowSizing};

/// Minimum history, in samples, before the first forecast.
pub const MIN_WARMUP_HISTORY: usize = 288;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("insufficient data: need {needed} samples, have {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("non-finite prediction at index {index}")]
    NonFinitePrediction { index: usize },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("data: {0}")]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainWindow {
    /// Size from the dominant period of the warmup history.
    Auto(SizingConfig),
    Fixed(usize),
}

/// Thresholds and bounds for the adaptive horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonRule {
    pub h_min: usize,
    pub h_max: usize,
    /// Batch MAPE (%) above which the horizon shrinks.
    pub mape_upper: f64,
    /// Batch MAPE (%) below which the horizon grows.
    pub mape_lower: f64,
}

impl Default for HorizonRule {
    fn default() -> Self {
        Self {
            h_min: 1,
            h_max: 24,
            mape_upper: 20.0,
            mape_lower: 5.0,
        }
    }
}

impl HorizonRule {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.h_min < 1 || self.h_min > self.h_max {
            return Err(EngineError::InvalidConfig(format!(
                "need 1 <= h_min <= h_max, got {} and {}",
                self.h_min, self.h_max
            )));
        }
        if !(self.mape_lower > 0.0 && self.mape_lower < self.mape_upper) {
            return Err(EngineError::InvalidConfig(format!(
                "need 0 < mape_lower < mape_upper, got {} and {}",
                self.mape_lower, self.mape_upper
            )));
        }
        Ok(())
    }
}

/// The three-way horizon update given a batch MAPE.
pub fn next_horizon(batch_mape: f64, h: usize, rule: &HorizonRule) -> usize {
    let h = if batch_mape > rule.mape_upper {
        h.saturating_sub(1)
    } else if batch_mape < rule.mape_lower {
        h + 1
    } else {
        h
    };
    h.clamp(rule.h_min, rule.h_max)
}

pub fn update_prediction_window(
    actuals: &[f64],
    preds: &[f64],
    h: usize,
    rule: &HorizonRule,
) -> Result<usize, EngineError> {
    let m = mape(actuals, preds)?;
    Ok(next_horizon(m, h, rule))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Refit every batch, horizon adapted from the batch MAPE.
    Adaptive,
    /// Fit once on everything before the warmup index, never refit.
    TrainOnce,
    /// Refit every batch on a fixed-size window, horizon fixed at `h0`.
    SlidingFixed,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Adaptive => "adaptive",
            Protocol::TrainOnce => "train-once",
            Protocol::SlidingFixed => "sliding-fixed",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(Protocol::Adaptive),
            "train-once" => Ok(Protocol::TrainOnce),
            "sliding-fixed" => Ok(Protocol::SlidingFixed),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub model: ModelSpec,
    pub lags: usize,
    pub train_window: TrainWindow,
    pub h0: usize,
    pub horizon: HorizonRule,
    /// First forecast index; derived from the window settings when unset.
    pub warmup: Option<usize>,
    /// Re-run window sizing every this many batches.
    pub resize_every: Option<usize>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::svr(12),
            lags: 12,
            train_window: TrainWindow::Auto(SizingConfig::default()),
            h0: 6,
            horizon: HorizonRule::default(),
            warmup: None,
            resize_every: None,
            seed: 42,
        }
    }
}

impl EngineConfig {
    pub fn with_model(mut self, model: ModelSpec) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.horizon.validate()?;
        if self.lags == 0 {
            return Err(EngineError::InvalidConfig("lags must be >= 1".into()));
        }
        if self.h0 < self.horizon.h_min || self.h0 > self.horizon.h_max {
            return Err(EngineError::InvalidConfig(format!(
                "h0 {} outside [{}, {}]",
                self.h0, self.horizon.h_min, self.horizon.h_max
            )));
        }
        if let TrainWindow::Fixed(w) = self.train_window {
            if w < self.lags + 2 {
                return Err(EngineError::InvalidConfig(format!(
                    "training window {w} must be at least lags + 2 = {}",
                    self.lags + 2
                )));
            }
        }
        if self.resize_every == Some(0) {
            return Err(EngineError::InvalidConfig("resize_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Index of the first forecast.
    ///
    /// Fixed windows default to `max(W, 288) + lags`; automatic sizing
    /// defaults to two fallback windows plus `lags`, so the periodogram sees
    /// at least two cycles of history.
    pub fn resolved_warmup(&self) -> usize {
        if let Some(w) = self.warmup {
            return w;
        }
        match &self.train_window {
            TrainWindow::Fixed(w) => (*w).max(MIN_WARMUP_HISTORY) + self.lags,
            TrainWindow::Auto(s) => 2 * s.fallback_samples.max(MIN_WARMUP_HISTORY / 2) + self.lags,
        }
    }
}

/// Iterates one-step predictions, feeding each back as the newest lag.
/// `seed_lags` is ordered most recent first.
pub fn recursive_forecast<M: OneStep + ?Sized>(
    model: &M,
    seed_lags: &[f64],
    h: usize,
) -> Result<Vec<f64>, EngineError> {
    if h == 0 {
        return Err(EngineError::InvalidConfig("horizon must be >= 1".into()));
    }
    if seed_lags.len() != model.lags() {
        return Err(ModelError::DimensionMismatch {
            expected: model.lags(),
            found: seed_lags.len(),
        }
        .into());
    }
    let mut buffer = seed_lags.to_vec();
    let mut out = Vec::with_capacity(h);
    for step in 0..h {
        let y = model.predict(&buffer)?;
        if !y.is_finite() {
            return Err(EngineError::NonFinitePrediction { index: step });
        }
        out.push(y);
        buffer.pop();
        buffer.insert(0, y);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub timestamp: DateTime<Utc>,
    pub actual: f64,
    pub predicted: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub batch: usize,
    /// Horizon in effect; the final batch may forecast fewer steps.
    pub h: usize,
    pub start: usize,
    pub len: usize,
    pub window_samples: usize,
    pub mape_pct: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTrace {
    pub zone: String,
    pub model: String,
    pub protocol: String,
    pub steps: Vec<StepRecord>,
    pub batches: Vec<BatchRecord>,
    pub sizing: Option<WindowSizing>,
    pub config: EngineConfig,
}

pub const STEPS_HEADER: &str = "index,timestamp,actual_mw,predicted_mw,batch";
pub const BATCHES_HEADER: &str = "batch,h,window_samples,mape_pct,converged";

impl ForecastTrace {
    pub fn actual_predicted(&self) -> (Vec<f64>, Vec<f64>) {
        self.steps.iter().map(|s| (s.actual, s.predicted)).unzip()
    }

    pub fn overall_mape(&self) -> Result<f64, MetricsError> {
        let (a, p) = self.actual_predicted();
        mape(&a, &p)
    }

    /// MAPE over steps with `index >= from`.
    pub fn mape_from(&self, from: usize) -> Result<f64, MetricsError> {
        let (a, p): (Vec<f64>, Vec<f64>) = self
            .steps
            .iter()
            .filter(|s| s.index >= from)
            .map(|s| (s.actual, s.predicted))
            .unzip();
        mape(&a, &p)
    }

    /// Batch lengths in order, for replaying the same boundaries.
    pub fn schedule(&self) -> Vec<usize> {
        self.batches.iter().map(|b| b.len).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.batches.iter().all(|b| b.converged)
    }

    pub fn steps_csv(&self) -> String {
        let mut out = String::from(STEPS_HEADER);
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.index,
                s.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                s.actual,
                s.predicted,
                s.batch
            ));
        }
        out
    }

    pub fn batches_csv(&self) -> String {
        let mut out = String::from(BATCHES_HEADER);
        out.push('\n');
        for b in &self.batches {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.batch, b.h, b.window_samples, b.mape_pct, b.converged
            ));
        }
        out
    }
}

/// Mutable loop state between batches.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub h: usize,
    /// Training window in samples; zero until resolved on the first batch.
    pub window: usize,
    pub cursor: usize,
    pub batch: usize,
}

struct Pending {
    len: usize,
    converged: bool,
}

/// Batch-at-a-time driver. [`SwrEngine::forecast_batch`] only reads values
/// before the cursor; [`SwrEngine::observe`] then scores the batch.
pub struct SwrEngine {
    cfg: EngineConfig,
    protocol: Protocol,
    schedule: Option<Vec<usize>>,
    step: f64,
    total: usize,
    state: EngineState,
    sizing: Option<WindowSizing>,
    fixed_model: Option<Predictor>,
    pending: Option<Pending>,
}

fn batch_seed(seed: u64, batch: usize) -> u64 {
    // splitmix64 finalizer over (seed, batch)
    let mut z = seed ^ (batch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SwrEngine {
    pub fn new(cfg: EngineConfig, total_len: usize, step_seconds: i64) -> Result<Self, EngineError> {
        Self::with_protocol(cfg, Protocol::Adaptive, None, total_len, step_seconds)
    }

    /// `schedule` fixes the batch lengths (used to replay another run's
    /// boundaries); it must cover every index from the warmup on.
    pub fn with_protocol(
        cfg: EngineConfig,
        protocol: Protocol,
        schedule: Option<Vec<usize>>,
        total_len: usize,
        step_seconds: i64,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let warmup = cfg.resolved_warmup();
        if warmup < cfg.lags + 2 {
            return Err(EngineError::InvalidConfig(format!(
                "warmup {warmup} leaves no training rows for {} lags",
                cfg.lags
            )));
        }
        if let TrainWindow::Fixed(w) = cfg.train_window {
            if warmup < w + cfg.lags {
                return Err(EngineError::InvalidConfig(format!(
                    "warmup {warmup} must be at least window + lags = {}",
                    w + cfg.lags
                )));
            }
        }
        let needed = warmup + cfg.h0;
        if total_len < needed {
            return Err(EngineError::InsufficientData {
                needed,
                found: total_len,
            });
        }
        if let Some(s) = &schedule {
            let covered: usize = s.iter().sum();
            if s.contains(&0) || covered != total_len - warmup {
                return Err(EngineError::InvalidConfig(format!(
                    "schedule covers {covered} steps, expected {}",
                    total_len - warmup
                )));
            }
        }
        let h0 = cfg.h0;
        Ok(Self {
            cfg,
            protocol,
            schedule,
            step: step_seconds as f64,
            total: total_len,
            state: EngineState {
                h: h0,
                window: 0,
                cursor: warmup,
                batch: 0,
            },
            sizing: None,
            fixed_model: None,
            pending: None,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn sizing(&self) -> Option<&WindowSizing> {
        self.sizing.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.state.cursor >= self.total
    }

    fn resolve_window(&mut self, history: &[f64]) -> Result<(), EngineError> {
        let lags = self.cfg.lags;
        let due = self.state.window == 0
            || matches!(self.cfg.resize_every, Some(r) if self.state.batch.is_multiple_of(r));
        if !due {
            return Ok(());
        }
        match &self.cfg.train_window {
            TrainWindow::Fixed(w) => self.state.window = *w,
            TrainWindow::Auto(sizing_cfg) => {
                let available = history.len().saturating_sub(lags);
                let mut cfg = sizing_cfg.clone();
                cfg.min_window = cfg.min_window.max(lags + 2).min(available);
                cfg.max_window = Some(cfg.max_window.unwrap_or(usize::MAX).min(available));
                let sizing = size_window(history, self.step, &cfg)?;
                self.state.window = sizing.window_samples;
                self.sizing = Some(sizing);
            }
        }
        if self.state.window < lags + 2 {
            return Err(EngineError::InsufficientData {
                needed: lags + 2,
                found: self.state.window,
            });
        }
        Ok(())
    }

    fn batch_len(&self) -> usize {
        let remaining = self.total - self.state.cursor;
        let wanted = match (&self.schedule, self.protocol) {
            (Some(s), _) => s[self.state.batch],
            (None, Protocol::Adaptive) => self.state.h,
            (None, _) => self.cfg.h0,
        };
        wanted.min(remaining)
    }

    /// Predictions for the next batch. Reads `values[..cursor]` only.
    pub fn forecast_batch(&mut self, values: &[f64]) -> Result<Vec<f64>, EngineError> {
        let cursor = self.state.cursor;
        if self.is_done() {
            return Err(EngineError::InvalidConfig("no samples left to forecast".into()));
        }
        if values.len() < cursor {
            return Err(EngineError::InsufficientData {
                needed: cursor,
                found: values.len(),
            });
        }
        let history = &values[..cursor];
        let lags = self.cfg.lags;

        let predictor = match self.protocol {
            Protocol::TrainOnce => {
                if self.fixed_model.is_none() {
                    self.state.window = cursor;
                    self.fixed_model = Some(fit_model(&self.cfg.model, history, lags, batch_seed(self.cfg.seed, 0))?);
                }
                self.fixed_model.clone().expect("fitted above")
            }
            Protocol::Adaptive | Protocol::SlidingFixed => {
                self.resolve_window(history)?;
                let window = window_of(history, cursor, self.state.window)?;
                fit_model(&self.cfg.model, window, lags, batch_seed(self.cfg.seed, self.state.batch))?
            }
        };

        let seed_lags: Vec<f64> = history[cursor - lags..].iter().rev().copied().collect();
        let len = self.batch_len();
        let preds = recursive_forecast(&predictor, &seed_lags, len).map_err(|e| match e {
            EngineError::NonFinitePrediction { index } => EngineError::NonFinitePrediction {
                index: cursor + index,
            },
            other => other,
        })?;
        self.pending = Some(Pending {
            len,
            converged: predictor.converged(),
        });
        Ok(preds)
    }

    /// Scores the pending batch and advances the cursor past it.
    pub fn observe(&mut self, actuals: &[f64], preds: &[f64]) -> Result<BatchRecord, EngineError> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| EngineError::InvalidConfig("observe called without a forecast".into()))?;
        if actuals.len() != pending.len || preds.len() != pending.len {
            return Err(MetricsError::LengthMismatch {
                actual: actuals.len(),
                predicted: preds.len(),
            }
            .into());
        }
        let batch_mape = mape(actuals, preds)?;
        let h_used = match (&self.schedule, self.protocol) {
            (Some(s), _) => s[self.state.batch],
            (None, Protocol::Adaptive) => self.state.h,
            (None, _) => self.cfg.h0,
        };
        let record = BatchRecord {
            batch: self.state.batch,
            h: h_used,
            start: self.state.cursor,
            len: pending.len,
            window_samples: self.state.window,
            mape_pct: batch_mape,
            converged: pending.converged,
        };
        if self.protocol == Protocol::Adaptive && self.schedule.is_none() {
            self.state.h = next_horizon(batch_mape, self.state.h, &self.cfg.horizon);
        }
        self.state.cursor += pending.len;
        self.state.batch += 1;
        Ok(record)
    }
}

fn run(
    series: &LoadSeries,
    cfg: &EngineConfig,
    protocol: Protocol,
    schedule: Option<Vec<usize>>,
) -> Result<ForecastTrace, EngineError> {
    let values = series.values();
    let mut engine = SwrEngine::with_protocol(cfg.clone(), protocol, schedule, values.len(), series.step())?;
    let mut steps = Vec::new();
    let mut batches = Vec::new();
    while !engine.is_done() {
        let start = engine.state().cursor;
        let preds = engine.forecast_batch(values)?;
        let actuals = &values[start..start + preds.len()];
        let record = engine.observe(actuals, &preds)?;
        for (i, (a, p)) in actuals.iter().zip(&preds).enumerate() {
            steps.push(StepRecord {
                index: start + i,
                timestamp: series.timestamp(start + i),
                actual: *a,
                predicted: *p,
                batch: record.batch,
            });
        }
        batches.push(record);
    }
    Ok(ForecastTrace {
        zone: series.zone_id().to_string(),
        model: match protocol {
            Protocol::Adaptive => "swr".to_string(),
            _ => cfg.model.name().to_string(),
        },
        protocol: protocol.as_str().to_string(),
        steps,
        batches,
        sizing: engine.sizing().cloned(),
        config: cfg.clone(),
    })
}

/// The adaptive sliding-window run.
pub fn run_swr(series: &LoadSeries, cfg: &EngineConfig) -> Result<ForecastTrace, EngineError> {
    run(series, cfg, Protocol::Adaptive, None)
}

/// A comparison run with `model` under `protocol`.
///
/// With `schedule` (typically [`ForecastTrace::schedule`] of the adaptive
/// run) the batch boundaries are replayed; otherwise batches are `h0` long.
/// Either way the evaluated indices match [`run_swr`] for the same config.
pub fn run_baseline(
    series: &LoadSeries,
    cfg: &EngineConfig,
    model: &ModelSpec,
    protocol: Protocol,
    schedule: Option<&[usize]>,
) -> Result<ForecastTrace, EngineError> {
    let cfg = cfg.clone().with_model(model.clone());
    let schedule = match protocol {
        Protocol::SlidingFixed => None,
        _ => schedule.map(<[usize]>::to_vec),
    };
    run(series, &cfg, protocol, schedule)
}
