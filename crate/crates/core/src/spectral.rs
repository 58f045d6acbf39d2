//! Lomb-Scargle periodogram and training-window sizing from the dominant
//! period of a load series.
//!
//! Two evaluators share one normalization: [`lomb_scargle_direct`] sums the
//! trigonometric terms explicitly, [`lomb_scargle_fast`] extirpolates the
//! samples onto a regular mesh and gets every trigonometric sum from two
//! FFTs (Press & Rybicki). When samples sit on mesh nodes, as they do for a
//! uniform series with an integer oversampling factor, the fast path is
//! exact up to FFT rounding.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::data::LoadSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("series has zero variance: no periodicity")]
    NoPeriodicity,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("frequency grid is empty: lowest frequency {lowest} Hz exceeds {f_max} Hz")]
    EmptyGrid { lowest: f64, f_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
    oversampling: f64,
    f_max: f64,
    spacing: f64,
}

impl FrequencyGrid {
    /// Grid `spacing, 2*spacing, ...` up to `f_max` inclusive.
    pub fn new(spacing: f64, f_max: f64, oversampling: f64) -> Result<Self, SpectralError> {
        if !(spacing > 0.0 && spacing.is_finite() && f_max > 0.0 && f_max.is_finite()) {
            return Err(SpectralError::InvalidInput(format!(
                "spacing {spacing} and f_max {f_max} must be positive"
            )));
        }
        // tolerate rounding in f_max / spacing
        let count = (f_max / spacing * (1.0 + 1e-12)).floor() as usize;
        if count == 0 {
            return Err(SpectralError::EmptyGrid {
                lowest: spacing,
                f_max,
            });
        }
        let frequencies = (1..=count)
            .map(|j| (j as f64 * spacing).min(f_max))
            .collect();
        Ok(Self {
            frequencies,
            oversampling,
            f_max,
            spacing,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Effective number of independent frequencies used for significance.
    pub fn independent_frequencies(&self) -> usize {
        ((self.frequencies.len() as f64 / self.oversampling).round() as usize).max(1)
    }
}

pub fn build_freq_grid(series: &LoadSeries, oversampling: f64) -> Result<FrequencyGrid, SpectralError> {
    uniform_grid(series.len(), series.step() as f64, oversampling)
}

/// Grid for `n` uniform samples `step` seconds apart: spacing
/// `1/(oversampling * span)` up to the pseudo-Nyquist `1/(2*step)`.
pub fn uniform_grid(n: usize, step: f64, oversampling: f64) -> Result<FrequencyGrid, SpectralError> {
    if n < 2 {
        return Err(SpectralError::TooFewSamples { needed: 2, found: n });
    }
    if !(oversampling >= 1.0 && oversampling.is_finite()) {
        return Err(SpectralError::InvalidInput(format!(
            "oversampling must be >= 1, got {oversampling}"
        )));
    }
    let span = (n - 1) as f64 * step;
    FrequencyGrid::new(1.0 / (oversampling * span), 1.0 / (2.0 * step), oversampling)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub grid: FrequencyGrid,
    pub power: Vec<f64>,
    pub n_samples: usize,
    pub n_independent: usize,
}

impl Periodogram {
    /// Index and power of the global maximum (first one on ties).
    pub fn peak(&self) -> (usize, f64) {
        self.power
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }
}

/// Mean-removed values, sample variance and centred times.
struct Prepared {
    times: Vec<f64>,
    resid: Vec<f64>,
    variance: f64,
}

fn prepare(times: &[f64], values: &[f64]) -> Result<Prepared, SpectralError> {
    let n = times.len();
    if n != values.len() {
        return Err(SpectralError::InvalidInput(format!(
            "{} times but {} values",
            n,
            values.len()
        )));
    }
    if n < 3 {
        return Err(SpectralError::TooFewSamples { needed: 3, found: n });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpectralError::InvalidInput("times must be strictly increasing".into()));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(SpectralError::InvalidInput("non-finite input".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let resid: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let variance = resid.iter().map(|r| r * r).sum::<f64>() / (n - 1) as f64;
    let scale = mean.abs().max(1.0);
    if variance <= (1e-13 * scale).powi(2) {
        return Err(SpectralError::NoPeriodicity);
    }
    let t_mean = times.iter().sum::<f64>() / n as f64;
    Ok(Prepared {
        times: times.iter().map(|t| t - t_mean).collect(),
        resid,
        variance,
    })
}

/// Quadrature terms with `sum cos^2` (or `sum sin^2`) below this fraction of
/// the sample count are identically zero in exact arithmetic (e.g. the sine
/// term at the Nyquist frequency) and are dropped.
const DEGENERATE: f64 = 1e-9;

/// Normalized Lomb power at one angular frequency, explicit sums.
fn power_at(p: &Prepared, omega: f64) -> f64 {
    let (mut s2, mut c2) = (0.0, 0.0);
    for &t in &p.times {
        let (s, c) = (2.0 * omega * t).sin_cos();
        s2 += s;
        c2 += c;
    }
    let tau = s2.atan2(c2) / (2.0 * omega);
    let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in p.times.iter().zip(&p.resid) {
        let (s, c) = (omega * (t - tau)).sin_cos();
        yc += y * c;
        ys += y * s;
        cc += c * c;
        ss += s * s;
    }
    let n = p.times.len() as f64;
    let mut power = 0.0;
    if cc > DEGENERATE * n {
        power += yc * yc / cc;
    }
    if ss > DEGENERATE * n {
        power += ys * ys / ss;
    }
    power / (2.0 * p.variance)
}

/// Lomb-Scargle power at a single frequency (Hz).
pub fn lomb_power(times: &[f64], values: &[f64], frequency: f64) -> Result<f64, SpectralError> {
    let p = prepare(times, values)?;
    Ok(power_at(&p, 2.0 * PI * frequency))
}

pub fn lomb_scargle_direct(
    times: &[f64],
    values: &[f64],
    grid: &FrequencyGrid,
) -> Result<Periodogram, SpectralError> {
    let p = prepare(times, values)?;
    let power = grid
        .frequencies()
        .iter()
        .map(|f| power_at(&p, 2.0 * PI * f))
        .collect();
    Ok(Periodogram {
        grid: grid.clone(),
        power,
        n_samples: times.len(),
        n_independent: grid.independent_frequencies(),
    })
}

const EXTIRPOLATION_ORDER: usize = 4;

/// Spreads `value` at fractional mesh position `x` onto the nearest
/// `EXTIRPOLATION_ORDER` nodes with Lagrange weights (periodic mesh).
fn extirpolate(value: f64, x: f64, mesh: &mut [Complex<f64>]) {
    let len = mesh.len();
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        mesh[(nearest as usize) % len].re += value;
        return;
    }
    let order = EXTIRPOLATION_ORDER;
    let lo = ((x - 0.5 * order as f64).floor() + 1.0).max(0.0) as usize;
    let nodes: Vec<usize> = (lo..lo + order).collect();
    for &j in &nodes {
        let mut weight = 1.0;
        for &m in &nodes {
            if m != j {
                weight *= (x - m as f64) / (j as f64 - m as f64);
            }
        }
        mesh[j % len].re += value * weight;
    }
}

/// Press-Rybicki evaluation on the same grid as [`lomb_scargle_direct`].
///
/// The grid must be a multiple-of-spacing grid (as built by
/// [`FrequencyGrid::new`]).
pub fn lomb_scargle_fast(
    times: &[f64],
    values: &[f64],
    grid: &FrequencyGrid,
) -> Result<Periodogram, SpectralError> {
    let p = prepare(times, values)?;
    let n = times.len();
    let t0 = times[0];
    let span = times[n - 1] - t0;
    let df = grid.spacing();

    // The mesh period is 1/df; frequency index j maps to FFT bin j. Samples
    // land exactly on nodes when the mesh step divides every t - t0.
    let min_gap = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let period = 1.0 / df;
    // Start from a mesh whose step divides the smallest gap, then refine by
    // doubling so node alignment survives.
    let mut mesh_len = ((period / min_gap).round() as usize).max(1);
    while mesh_len < 4 * EXTIRPOLATION_ORDER * grid.len() {
        mesh_len *= 2;
    }
    let mesh_step = period / mesh_len as f64;
    if span > period * (1.0 + 1e-9) {
        return Err(SpectralError::InvalidInput(
            "grid spacing too coarse for sample span".into(),
        ));
    }

    let mut data_mesh = vec![Complex::new(0.0, 0.0); mesh_len];
    let mut unit_mesh = vec![Complex::new(0.0, 0.0); mesh_len];
    for (&t, &y) in times.iter().zip(&p.resid) {
        let x = (t - t0) / mesh_step;
        extirpolate(y, x, &mut data_mesh);
        // 2*omega*t on the mesh is twice the position, modulo the period
        let x2 = (2.0 * x) % mesh_len as f64;
        extirpolate(1.0, x2, &mut unit_mesh);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(mesh_len);
    fft.process(&mut data_mesh);
    fft.process(&mut unit_mesh);

    // Forward FFT uses exp(-i...), so the sine sums are negated imaginary
    // parts. Sums are taken relative to t0; tau absorbs the origin.
    let nf = n as f64;
    let power = (1..=grid.len())
        .map(|j| {
            let wk1 = data_mesh[j % mesh_len].conj();
            let wk2 = unit_mesh[j % mesh_len].conj();
            let (yc, ys) = (wk1.re, wk1.im);
            let (c2, s2) = (wk2.re, wk2.im);
            let hypo = (c2 * c2 + s2 * s2).sqrt();
            let (cos2, sin2) = if hypo > 0.0 {
                (c2 / hypo, s2 / hypo)
            } else {
                (1.0, 0.0)
            };
            // half-angle for omega * tau
            let cwt = (0.5 * (1.0 + cos2)).max(0.0).sqrt();
            let swt = sin2.signum() * (0.5 * (1.0 - cos2)).max(0.0).sqrt();
            let den = 0.5 * nf + 0.5 * hypo;
            let c_term = (cwt * yc + swt * ys).powi(2);
            let s_term = (cwt * ys - swt * yc).powi(2);
            let mut pw = 0.0;
            if den > DEGENERATE * nf {
                pw += c_term / den;
            }
            if nf - den > DEGENERATE * nf {
                pw += s_term / (nf - den);
            }
            pw / (2.0 * p.variance)
        })
        .collect();
    Ok(Periodogram {
        grid: grid.clone(),
        power,
        n_samples: n,
        n_independent: grid.independent_frequencies(),
    })
}

/// Probability that the highest of `m` independent peaks from pure noise
/// reaches `z`: `1 - (1 - e^-z)^m`.
pub fn false_alarm_probability(z: f64, m: usize) -> f64 {
    if z.is_infinite() && z > 0.0 {
        return 0.0;
    }
    let z = z.max(0.0);
    let p = -((m as f64) * (-(-z).exp()).ln_1p()).exp_m1();
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodogramMethod {
    Direct,
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingConfig {
    pub oversampling: f64,
    /// Significance threshold on the false alarm probability.
    pub alpha: f64,
    /// Window = multiplier * dominant period.
    pub multiplier: f64,
    pub fallback_samples: usize,
    pub min_window: usize,
    pub max_window: Option<usize>,
    /// Only the trailing `history_cap` samples enter the periodogram.
    pub history_cap: Option<usize>,
    pub method: PeriodogramMethod,
}

impl Default for SizingConfig {
    fn default() -> Self {
        Self {
            oversampling: 4.0,
            alpha: 0.01,
            multiplier: 1.0,
            fallback_samples: 288,
            min_window: 64,
            max_window: None,
            history_cap: None,
            method: PeriodogramMethod::Fast,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSizing {
    pub dominant_period_seconds: Option<f64>,
    pub window_samples: usize,
    pub significant: bool,
    pub false_alarm_prob: f64,
    /// Sample spacing of the sized series, in seconds.
    pub step_seconds: f64,
}

impl WindowSizing {
    /// `dominant_period_s,window_samples,significant,false_alarm_prob`.
    /// The period is printed to the nearest whole sample step; the peak is
    /// not resolved more finely than that.
    pub fn to_csv_row(&self) -> String {
        let period = self
            .dominant_period_seconds
            .map(|p| format!("{}", (p / self.step_seconds).round() * self.step_seconds))
            .unwrap_or_default();
        format!(
            "{},{},{},{}",
            period, self.window_samples, self.significant, self.false_alarm_prob
        )
    }
}

pub fn training_window_size(series: &LoadSeries, cfg: &SizingConfig) -> Result<WindowSizing, SpectralError> {
    size_window(series.values(), series.step() as f64, cfg)
}

/// Window sizing over raw uniformly spaced values.
pub fn size_window(values: &[f64], step: f64, cfg: &SizingConfig) -> Result<WindowSizing, SpectralError> {
    if values.len() < 3 {
        return Err(SpectralError::TooFewSamples {
            needed: 3,
            found: values.len(),
        });
    }
    let max = cfg.max_window.unwrap_or(usize::MAX);
    if cfg.min_window > max {
        return Err(SpectralError::InvalidInput(format!(
            "min window {} exceeds max window {}",
            cfg.min_window, max
        )));
    }
    let clamp = |w: usize| w.clamp(cfg.min_window, max);
    let fallback = WindowSizing {
        dominant_period_seconds: None,
        window_samples: clamp(cfg.fallback_samples),
        significant: false,
        false_alarm_prob: 1.0,
        step_seconds: step,
    };

    let history = match cfg.history_cap {
        Some(cap) if cap >= 3 && cap < values.len() => &values[values.len() - cap..],
        _ => values,
    };
    let times: Vec<f64> = (0..history.len()).map(|i| i as f64 * step).collect();
    let grid = uniform_grid(history.len(), step, cfg.oversampling)?;
    let periodogram = match cfg.method {
        PeriodogramMethod::Direct => lomb_scargle_direct(&times, history, &grid),
        PeriodogramMethod::Fast => lomb_scargle_fast(&times, history, &grid),
    };
    let periodogram = match periodogram {
        Ok(p) => p,
        Err(SpectralError::NoPeriodicity) => return Ok(fallback),
        Err(e) => return Err(e),
    };

    let (peak_idx, _) = periodogram.peak();
    let prepared = prepare(&times, history)?;
    let (f_peak, z_peak) = refine_peak(&prepared, grid.frequencies(), peak_idx);
    let fap = false_alarm_probability(z_peak, periodogram.n_independent);
    if !(fap < cfg.alpha) {
        return Ok(WindowSizing {
            false_alarm_prob: fap,
            ..fallback
        });
    }
    let period = 1.0 / f_peak;
    let raw = (cfg.multiplier * period / step).round().max(0.0) as usize;
    Ok(WindowSizing {
        dominant_period_seconds: Some(period),
        window_samples: clamp(raw),
        significant: true,
        false_alarm_prob: fap,
        step_seconds: step,
    })
}

/// Golden-section search for the power maximum between the neighbours of
/// grid index `idx`. The grid peak is returned if nothing better is found.
fn refine_peak(p: &Prepared, freqs: &[f64], idx: usize) -> (f64, f64) {
    let f_peak = freqs[idx];
    let z_peak = power_at(p, 2.0 * PI * f_peak);
    let spacing = if freqs.len() > 1 {
        freqs[1] - freqs[0]
    } else {
        f_peak
    };
    let mut lo = if idx > 0 { freqs[idx - 1] } else { 0.5 * f_peak };
    let mut hi = freqs.get(idx + 1).copied().unwrap_or(f_peak + 0.5 * spacing);
    let power = |f: f64| power_at(p, 2.0 * PI * f);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut pa, mut pb) = (power(a), power(b));
    for _ in 0..100 {
        if (hi - lo) <= 1e-12 * f_peak {
            break;
        }
        if pa > pb {
            hi = b;
            b = a;
            pb = pa;
            a = hi - ratio * (hi - lo);
            pa = power(a);
        } else {
            lo = a;
            a = b;
            pa = pb;
            b = lo + ratio * (hi - lo);
            pb = power(b);
        }
    }
    let (f_best, z_best) = if pa > pb { (a, pa) } else { (b, pb) };
    if z_best > z_peak {
        (f_best, z_best)
    } else {
        (f_peak, z_peak)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_start_time, generate_synthetic, SynthConfig};
    use proptest::prelude::*;

    fn sine(n: usize, step: f64, period: f64, amp: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let y = t.iter().map(|t| 500.0 + amp * (2.0 * PI * t / period).sin()).collect();
        (t, y)
    }

    /// Textbook Lomb formula written out independently of the module.
    fn lomb_oracle(t: &[f64], y: &[f64], f: f64) -> f64 {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let w = 2.0 * PI * f;
        let num: f64 = t.iter().map(|t| (2.0 * w * t).sin()).sum();
        let den: f64 = t.iter().map(|t| (2.0 * w * t).cos()).sum();
        let tau = num.atan2(den) / (2.0 * w);
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = 0.0;
        let mut d = 0.0;
        for (ti, yi) in t.iter().zip(y) {
            let arg = w * (ti - tau);
            a += (yi - mean) * arg.cos();
            b += arg.cos().powi(2);
            c += (yi - mean) * arg.sin();
            d += arg.sin().powi(2);
        }
        (a * a / b + c * c / d) / (2.0 * var)
    }

    #[test]
    fn grid_endpoints() {
        let grid = uniform_grid(1000, 300.0, 4.0).unwrap();
        let lowest = 1.0 / (4.0 * 299_700.0);
        assert!((grid.frequencies()[0] - lowest).abs() < 1e-18);
        assert!(*grid.frequencies().last().unwrap() <= 1.0 / 600.0);
        let spacing = grid.spacing();
        for w in grid.frequencies().windows(2) {
            assert!((w[1] - w[0] - spacing).abs() < 1e-15);
        }
        assert!(grid.f_max() <= 1.0 / 600.0);
    }

    #[test]
    fn grid_boundaries_for_two_samples() {
        assert!(matches!(uniform_grid(2, 300.0, 1.0), Err(SpectralError::EmptyGrid { .. })));
        let g = uniform_grid(2, 300.0, 2.0).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g.frequencies()[0] - 1.0 / 600.0).abs() < 1e-18);
        assert!(uniform_grid(1, 300.0, 4.0).is_err());
        assert!(uniform_grid(10, 300.0, 0.5).is_err());
    }

    #[test]
    fn pure_sine_peaks_at_nearest_grid_frequency() {
        let (t, y) = sine(2000, 300.0, 86_400.0, 50.0);
        let grid = uniform_grid(2000, 300.0, 4.0).unwrap();
        let pg = lomb_scargle_direct(&t, &y, &grid).unwrap();
        let nearest = grid
            .frequencies()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0 / 86_400.0).abs().total_cmp(&(b.1 - 1.0 / 86_400.0).abs()))
            .unwrap()
            .0;
        assert_eq!(pg.peak().0, nearest);
        let var = {
            let m = y.iter().sum::<f64>() / y.len() as f64;
            y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64
        };
        let bound = 0.9 * (2000.0 / 2.0) * (50.0f64.powi(2) / 2.0) / var;
        assert!(pg.peak().1 > bound, "{} vs {}", pg.peak().1, bound);
    }

    #[test]
    fn constant_series_has_no_periodicity() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 300.0).collect();
        let y = vec![42.0; 50];
        let grid = uniform_grid(50, 300.0, 4.0).unwrap();
        assert_eq!(lomb_scargle_direct(&t, &y, &grid), Err(SpectralError::NoPeriodicity));
        assert_eq!(lomb_scargle_fast(&t, &y, &grid), Err(SpectralError::NoPeriodicity));
    }

    #[test]
    fn direct_matches_oracle_formula() {
        let (t, y) = sine(300, 300.0, 86_400.0, 50.0);
        for f in [1.0 / 86_400.0, 1.0 / 43_200.0, 1.3e-4, 1.0 / 600.0 - 1e-7] {
            let ours = lomb_power(&t, &y, f).unwrap();
            let oracle = lomb_oracle(&t, &y, f);
            assert!((ours - oracle).abs() < 1e-8 * oracle.max(1.0), "{f}: {ours} vs {oracle}");
        }
    }

    #[test]
    fn two_sines_peak_ordering() {
        let n = 4000;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 300.0).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| 500.0 + 50.0 * (2.0 * PI * t / 86_400.0).sin() + 20.0 * (2.0 * PI * t / 604_800.0).sin())
            .collect();
        // brute force at exactly the two frequencies
        let daily = lomb_oracle(&t, &y, 1.0 / 86_400.0);
        let weekly = lomb_oracle(&t, &y, 1.0 / 604_800.0);
        assert!(daily > weekly);

        let grid = uniform_grid(n, 300.0, 4.0).unwrap();
        let pg = lomb_scargle_direct(&t, &y, &grid).unwrap();
        let near = |target: f64| {
            grid.frequencies()
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .unwrap()
                .0
        };
        let (i_day, i_week) = (near(1.0 / 86_400.0), near(1.0 / 604_800.0));
        let is_local_max = |i: usize| pg.power[i] > pg.power[i - 1] && pg.power[i] >= pg.power[i + 1];
        for i in [i_day, i_week] {
            assert!((i - 1..=i + 1).any(is_local_max), "no local max near {i}");
        }
        assert_eq!(pg.peak().0, i_day);
    }

    #[test]
    fn fast_agrees_with_direct() {
        let cfg = SynthConfig::daily(1500, 500.0, 50.0, 8.0, 11);
        let s = generate_synthetic(&cfg).unwrap();
        let t = s.times();
        for ofac in [1.0, 2.0, 4.0] {
            let grid = build_freq_grid(&s, ofac).unwrap();
            let direct = lomb_scargle_direct(&t, s.values(), &grid).unwrap();
            let fast = lomb_scargle_fast(&t, s.values(), &grid).unwrap();
            let max_abs = direct
                .power
                .iter()
                .zip(&fast.power)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_abs < 1e-6, "ofac {ofac}: {max_abs}");
            assert_eq!(direct.peak().0, fast.peak().0);
        }
    }

    #[test]
    fn fast_approximates_uneven_sampling() {
        // jittered times: extirpolation is approximate but must find the peak
        let n = 800;
        let t: Vec<f64> = (0..n)
            .map(|i| i as f64 * 300.0 + 90.0 * ((i * 7919 % 13) as f64 / 13.0))
            .collect();
        let y: Vec<f64> = t.iter().map(|t| 500.0 + 50.0 * (2.0 * PI * t / 86_400.0).sin()).collect();
        let span = t[n - 1] - t[0];
        let grid = FrequencyGrid::new(1.0 / (4.0 * span), 1.0 / 600.0, 4.0).unwrap();
        let direct = lomb_scargle_direct(&t, &y, &grid).unwrap();
        let fast = lomb_scargle_fast(&t, &y, &grid).unwrap();
        assert_eq!(direct.peak().0, fast.peak().0);
        let rel = (direct.peak().1 - fast.peak().1).abs() / direct.peak().1;
        assert!(rel < 1e-2, "{rel}");
    }

    #[test]
    fn false_alarm_examples() {
        assert_eq!(false_alarm_probability(0.0, 5), 1.0);
        assert_eq!(false_alarm_probability(f64::INFINITY, 5), 0.0);
        assert!(false_alarm_probability(800.0, 1000) < 1e-300);
        // 1 - (1 - e^-10)^1000 evaluated with a binomial series:
        // 1000 e^-10 - C(1000,2) e^-20 + C(1000,3) e^-30 - ...
        let q = (-10.0f64).exp();
        let mut series = 0.0;
        let mut binom = 1.0;
        for j in 1..=6 {
            binom *= (1000 - j + 1) as f64 / j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            series += sign * binom * q.powi(j);
        }
        let p = false_alarm_probability(10.0, 1000);
        assert!((p - series).abs() < 1e-12, "{p} vs {series}");
        assert!((p - 0.0444).abs() < 5e-4);
    }

    #[test]
    fn daily_cycle_sizes_to_one_day() {
        let s = generate_synthetic(&SynthConfig::daily(2000, 500.0, 50.0, 0.0, 1)).unwrap();
        for method in [PeriodogramMethod::Direct, PeriodogramMethod::Fast] {
            let cfg = SizingConfig { method, ..SizingConfig::default() };
            let w = training_window_size(&s, &cfg).unwrap();
            assert!(w.significant);
            assert_eq!(w.window_samples, 288);
            assert!(w.false_alarm_prob < 0.01);
            let period = w.dominant_period_seconds.unwrap();
            assert!((period - 86_400.0).abs() < 150.0, "{period}");
            assert!(w.to_csv_row().starts_with("86400,288,true,"), "{}", w.to_csv_row());

            let doubled = training_window_size(&s, &SizingConfig { multiplier: 2.0, ..cfg.clone() }).unwrap();
            assert_eq!(doubled.window_samples, 576);
        }
    }

    #[test]
    fn constant_series_falls_back() {
        let s = LoadSeries::new("C", default_start_time(), 300, vec![10.0; 500]).unwrap();
        let cfg = SizingConfig { fallback_samples: 100, ..SizingConfig::default() };
        let w = training_window_size(&s, &cfg).unwrap();
        assert!(!w.significant);
        assert_eq!(w.window_samples, 100);
        assert_eq!(w.dominant_period_seconds, None);
        assert_eq!(w.to_csv_row(), ",100,false,1");
    }

    #[test]
    fn white_noise_is_not_significant() {
        let cfg = SynthConfig {
            components: vec![],
            ..SynthConfig::daily(1000, 500.0, 0.0, 10.0, 5)
        };
        let s = generate_synthetic(&cfg).unwrap();
        let w = training_window_size(&s, &SizingConfig::default()).unwrap();
        assert!(!w.significant, "{w:?}");
        assert_eq!(w.window_samples, 288);
    }

    #[test]
    fn too_short_series_errors() {
        let s = LoadSeries::new("C", default_start_time(), 300, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            training_window_size(&s, &SizingConfig::default()),
            Err(SpectralError::TooFewSamples { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn affine_and_shift_invariance(a in 0.1f64..20.0, neg in any::<bool>(), b in -1000.0f64..1000.0, shift in 0.0f64..1e6, seed in 0u64..1000) {
            let s = generate_synthetic(&SynthConfig::daily(200, 500.0, 50.0, 5.0, seed)).unwrap();
            let t = s.times();
            let grid = build_freq_grid(&s, 2.0).unwrap();
            let base = lomb_scargle_direct(&t, s.values(), &grid).unwrap();
            let a = if neg { -a } else { a };
            let y2: Vec<f64> = s.values().iter().map(|v| a * v + b).collect();
            let affine = lomb_scargle_direct(&t, &y2, &grid).unwrap();
            let t2: Vec<f64> = t.iter().map(|t| t + shift).collect();
            let shifted = lomb_scargle_direct(&t2, s.values(), &grid).unwrap();
            for i in 0..grid.len() {
                prop_assert!((base.power[i] - affine.power[i]).abs() < 1e-9);
                prop_assert!((base.power[i] - shifted.power[i]).abs() < 1e-9);
                prop_assert!(base.power[i] >= 0.0 && base.power[i].is_finite());
            }
        }

        #[test]
        fn window_within_bounds(seed in 0u64..500, amp in 0.0f64..80.0, mult in 0.1f64..5.0, min in 10usize..100, extra in 0usize..400) {
            let s = generate_synthetic(&SynthConfig::daily(600, 500.0, amp, 5.0, seed)).unwrap();
            let cfg = SizingConfig {
                multiplier: mult,
                min_window: min,
                max_window: Some(min + extra),
                ..SizingConfig::default()
            };
            let w = training_window_size(&s, &cfg).unwrap();
            prop_assert!(w.window_samples >= min && w.window_samples <= min + extra);
            prop_assert!((0.0..=1.0).contains(&w.false_alarm_prob));
        }
    }
}
