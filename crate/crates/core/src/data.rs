//! Load series representation, CSV ingestion and synthetic generation.
//!
//! The canonical file layout is a three-column CSV, `timestamp,zone,load_mw`,
//! with ISO-8601 UTC timestamps. Rows may be interleaved across zones and
//! arrive in any order; each zone is sorted and checked for uniform spacing.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

/// Smallest value the synthetic generator will emit.
pub const SYNTH_FLOOR_MW: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing or malformed header: expected `timestamp,zone,load_mw`")]
    BadHeader,
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: zone {zone}: load {value} is not finite and strictly positive")]
    InvalidLoad { line: u64, zone: String, value: f64 },
    #[error("line {line}: zone {zone}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp {
        line: u64,
        zone: String,
        timestamp: String,
    },
    #[error("line {line}: zone {zone}: non-uniform spacing, expected {expected}s got {found}s")]
    NonUniformSpacing {
        line: u64,
        zone: String,
        expected: i64,
        found: i64,
    },
    #[error("zone {zone}: needs at least 2 samples, found {found}")]
    TooShort { zone: String, found: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("window [{start}, {end}) out of range for series of length {len}")]
    WindowOutOfRange { start: i64, end: usize, len: usize },
    #[error("csv: {0}")]
    Csv(String),
}

/// Uniformly sampled load readings for one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    zone_id: String,
    start_time: DateTime<Utc>,
    step: i64,
    values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(
        zone_id: impl Into<String>,
        start_time: DateTime<Utc>,
        step: i64,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let zone_id = zone_id.into();
        if step <= 0 {
            return Err(DataError::InvalidSeries(format!(
                "step must be positive, got {step}"
            )));
        }
        if values.len() < 2 {
            return Err(DataError::TooShort {
                zone: zone_id,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(DataError::InvalidSeries(format!(
                "value at index {bad} is {} (loads must be finite and > 0)",
                values[bad]
            )));
        }
        Ok(Self {
            zone_id,
            start_time,
            step,
            values,
        })
    }

    pub fn zone_id(&self) -> &str {
        &self.zone_id
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    /// Sampling interval in seconds.
    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start_time + TimeDelta::seconds(self.step * index as i64)
    }

    /// Sample times in seconds relative to `start_time`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| (i as i64 * self.step) as f64)
            .collect()
    }

    /// Leading `len` samples as a new series.
    pub fn prefix(&self, len: usize) -> Result<Self, DataError> {
        if len > self.values.len() {
            return Err(DataError::WindowOutOfRange {
                start: 0,
                end: len,
                len: self.values.len(),
            });
        }
        Self::new(
            self.zone_id.clone(),
            self.start_time,
            self.step,
            self.values[..len].to_vec(),
        )
    }
}

/// Returns `values[end_exclusive - length .. end_exclusive]`.
pub fn slice_window(
    series: &LoadSeries,
    end_exclusive: usize,
    length: usize,
) -> Result<&[f64], DataError> {
    window_of(series.values(), end_exclusive, length)
}

pub(crate) fn window_of(values: &[f64], end: usize, length: usize) -> Result<&[f64], DataError> {
    if length == 0 || length > end || end > values.len() {
        return Err(DataError::WindowOutOfRange {
            start: end as i64 - length as i64,
            end,
            len: values.len(),
        });
    }
    Ok(&values[end - length..end])
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: String,
    zone: String,
    load_mw: String,
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

/// Parses a `timestamp,zone,load_mw` document into one series per zone.
pub fn parse_load_csv(text: &str) -> Result<BTreeMap<String, LoadSeries>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let expected = ["timestamp", "zone", "load_mw"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(DataError::BadHeader);
    }

    // (timestamp, value, line) per zone
    let mut rows: BTreeMap<String, Vec<(DateTime<Utc>, f64, u64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::MalformedRow {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: CsvRow = record
            .deserialize(Some(&header))
            .map_err(|e| DataError::MalformedRow {
                line,
                reason: e.to_string(),
            })?;
        let ts = parse_timestamp(&row.timestamp).ok_or_else(|| DataError::MalformedRow {
            line,
            reason: format!("bad timestamp {:?}", row.timestamp),
        })?;
        if row.zone.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty zone".into(),
            });
        }
        let value: f64 = row.load_mw.parse().map_err(|_| DataError::MalformedRow {
            line,
            reason: format!("bad load {:?}", row.load_mw),
        })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(DataError::InvalidLoad {
                line,
                zone: row.zone,
                value,
            });
        }
        rows.entry(row.zone).or_default().push((ts, value, line));
    }

    let mut out = BTreeMap::new();
    for (zone, mut zone_rows) in rows {
        zone_rows.sort_by_key(|r| r.0);
        if zone_rows.len() < 2 {
            return Err(DataError::TooShort {
                zone,
                found: zone_rows.len(),
            });
        }
        let step = (zone_rows[1].0 - zone_rows[0].0).num_seconds();
        for pair in zone_rows.windows(2) {
            let gap = (pair[1].0 - pair[0].0).num_seconds();
            if gap == 0 {
                return Err(DataError::DuplicateTimestamp {
                    line: pair[1].2,
                    zone,
                    timestamp: pair[1].0.to_rfc3339_opts(SecondsFormat::Secs, true),
                });
            }
            if gap != step {
                return Err(DataError::NonUniformSpacing {
                    line: pair[1].2,
                    zone,
                    expected: step,
                    found: gap,
                });
            }
        }
        let start = zone_rows[0].0;
        let values = zone_rows.into_iter().map(|r| r.1).collect();
        let series = LoadSeries::new(zone.clone(), start, step, values)?;
        out.insert(zone, series);
    }
    Ok(out)
}

/// Formats a load with six significant digits, `%g` style.
pub fn format_load(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i32;
    if !(-4..6).contains(&exponent) {
        let s = format!("{value:.5e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{}", trim_fraction(mantissa), exp);
    }
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{value:.decimals$}");
    // rounding can carry into a new digit (999999.5 -> 1000000)
    trim_fraction(&s).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Serializes series into the canonical CSV, zones in the given order.
pub fn write_load_csv<'a, I>(series: I) -> String
where
    I: IntoIterator<Item = &'a LoadSeries>,
{
    let mut out = String::from("timestamp,zone,load_mw\n");
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            out.push_str(&s.timestamp(i).to_rfc3339_opts(SecondsFormat::Secs, true));
            out.push(',');
            out.push_str(s.zone_id());
            out.push(',');
            out.push_str(&format_load(*v));
            out.push('\n');
        }
    }
    out
}

/// One seasonal term of the synthetic signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalComponent {
    pub period_seconds: f64,
    pub amplitude_mw: f64,
    pub phase_radians: f64,
}

/// Structural change applied from `onset_index` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub onset_index: usize,
    pub level_shift_mw: f64,
    pub amplitude_scale: f64,
}

/// Parameters for [`generate_synthetic`].
///
/// Noise is drawn from `ChaCha8Rng::seed_from_u64(seed)` through the
/// ziggurat normal sampler of `rand_distr`, one draw per sample in index
/// order, so a given config always yields the same series.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub zone_id: String,
    pub start_time: DateTime<Utc>,
    pub length: usize,
    pub step: i64,
    pub base_level: f64,
    pub components: Vec<SeasonalComponent>,
    pub noise_sigma: f64,
    pub drift: Option<Drift>,
    pub seed: u64,
}

impl SynthConfig {
    /// A single daily cycle at 5-minute cadence.
    pub fn daily(length: usize, base_level: f64, amplitude: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            zone_id: "SYNTH".into(),
            start_time: default_start_time(),
            length,
            step: 300,
            base_level,
            components: vec![SeasonalComponent {
                period_seconds: 86_400.0,
                amplitude_mw: amplitude,
                phase_radians: 0.0,
            }],
            noise_sigma,
            drift: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: String| Err(DataError::InvalidConfig(m));
        if self.length < 2 {
            return fail(format!("length must be >= 2, got {}", self.length));
        }
        if self.step <= 0 {
            return fail(format!("step must be positive, got {}", self.step));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        for c in &self.components {
            if !(c.amplitude_mw >= 0.0) || !(c.period_seconds > 0.0) {
                return fail(format!(
                    "component needs amplitude >= 0 and period > 0, got {c:?}"
                ));
            }
        }
        let total_amp: f64 = self.components.iter().map(|c| c.amplitude_mw).sum();
        if self.base_level - total_amp - 6.0 * self.noise_sigma <= 0.0 {
            return fail(format!(
                "base_level {} too small for total amplitude {} and noise {}",
                self.base_level, total_amp, self.noise_sigma
            ));
        }
        if let Some(d) = &self.drift {
            if !(d.amplitude_scale >= 0.0) {
                return fail("drift amplitude_scale must be >= 0".into());
            }
        }
        Ok(())
    }

    /// The series without noise, drift included.
    pub fn noiseless_values(&self) -> Vec<f64> {
        (0..self.length).map(|i| self.deterministic_value(i)).collect()
    }

    fn deterministic_value(&self, i: usize) -> f64 {
        let t = (i as i64 * self.step) as f64;
        let (shift, scale) = match &self.drift {
            Some(d) if i >= d.onset_index => (d.level_shift_mw, d.amplitude_scale),
            _ => (0.0, 1.0),
        };
        let seasonal: f64 = self
            .components
            .iter()
            .map(|c| c.amplitude_mw * (2.0 * PI * t / c.period_seconds + c.phase_radians).sin())
            .sum();
        self.base_level + shift + scale * seasonal
    }
}

pub fn default_start_time() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2017-10-16T00:00:00Z")
        .expect("valid literal")
        .with_timezone(&Utc)
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<LoadSeries, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.noise_sigma.max(0.0))
        .map_err(|e| DataError::InvalidConfig(e.to_string()))?;
    let values = (0..config.length)
        .map(|i| {
            let noise = if config.noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            (config.deterministic_value(i) + noise).max(SYNTH_FLOOR_MW)
        })
        .collect();
    LoadSeries::new(config.zone_id.clone(), config.start_time, config.step, values)
}
