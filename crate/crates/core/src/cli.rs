//! The `swr` command line: `synth`, `window-size`, `forecast`, `compare`.
//!
//! Every flag may also come from a `--config` file of `key=value` lines
//! using the long flag names; flags given on the command line win. Each
//! run writes `run_config.txt` in that format next to its outputs, so a run
//! can be repeated with `--config <out>/run_config.txt`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{
    default_start_time, generate_synthetic, parse_load_csv, write_load_csv, DataError, Drift, LoadSeries,
    SeasonalComponent, SynthConfig,
};
use crate::engine::{run_baseline, run_swr, EngineConfig, EngineError, ForecastTrace, HorizonRule, Protocol, TrainWindow};
use crate::metrics::{compare_report, MetricReport, MetricsError};
use crate::regressors::{ForestParams, ModelError, ModelSpec, SvrParams};
use crate::spectral::{training_window_size, SizingConfig, SpectralError};

pub const FORMAT_VERSION: u32 = 1;
const SIZING_HEADER: &str = "dominant_period_s,window_samples,significant,false_alarm_prob";
const ALL_MODELS: [&str; 6] = ["swr", "linear", "svr-static", "tree", "forest", "persistence"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(#[from] DataError),
    #[error("zone {zone}: {source}")]
    Engine { zone: String, source: EngineError },
    #[error("zone {zone}: {source}")]
    Spectral { zone: String, source: SpectralError },
    #[error("report: {0}")]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Data(DataError::TooShort { .. }) => 3,
            CliError::Data(_) => 2,
            CliError::Engine { source, .. } => match source {
                EngineError::InsufficientData { .. }
                | EngineError::Model(ModelError::WindowTooShort { .. } | ModelError::TooFewRows { .. })
                | EngineError::Spectral(SpectralError::TooFewSamples { .. }) => 3,
                EngineError::InvalidConfig(_) | EngineError::Data(_) => 2,
                _ => 4,
            },
            CliError::Spectral { source, .. } => match source {
                SpectralError::TooFewSamples { .. } => 3,
                SpectralError::InvalidInput(_) => 2,
                _ => 4,
            },
            CliError::Metrics(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "swr", version, about = "Sliding-window regression load forecaster")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic load CSV
    Synth(SynthArgs),
    /// Print the spectral training-window sizing for one zone
    WindowSize(WindowSizeArgs),
    /// Run the adaptive forecaster per zone and write trace files
    Forecast(RunArgs),
    /// Run the forecaster and the baselines and write a metric report
    Compare(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key=value file with defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; defaults to <out-dir>/load.csv
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Zone ids; zone i uses noise seed `seed + i`
    #[arg(long = "zone")]
    pub zones: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 3906)]
    pub length: usize,
    /// Sample spacing in seconds
    #[arg(long, default_value_t = 300)]
    pub step: i64,
    /// Seasonal period in seconds
    #[arg(long, default_value_t = 86_400.0)]
    pub period: f64,
    #[arg(long, default_value_t = 50.0)]
    pub amp: f64,
    /// Phase in radians
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
    #[arg(long, default_value_t = 500.0)]
    pub base: f64,
    /// Gaussian noise standard deviation in MW
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// First timestamp (RFC 3339)
    #[arg(long)]
    pub start: Option<String>,
    /// Index at which the drift starts
    #[arg(long)]
    pub drift_onset: Option<usize>,
    /// Level shift in MW applied from the onset
    #[arg(long, default_value_t = 0.0)]
    pub drift_shift: f64,
    /// Seasonal amplitude multiplier applied from the onset
    #[arg(long, default_value_t = 1.0)]
    pub drift_scale: f64,
}

#[derive(Debug, Args, Clone)]
pub struct SizingArgs {
    /// Window = multiplier * dominant period
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    /// Significance level for the dominant peak
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4.0)]
    pub oversampling: f64,
    /// Window used when no significant period is found
    #[arg(long, default_value_t = 288)]
    pub fallback: usize,
}

impl SizingArgs {
    fn to_config(&self) -> Result<SizingConfig, CliError> {
        if !(self.multiplier > 0.0) || !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.oversampling >= 1.0) {
            return Err(CliError::Usage(
                "need multiplier > 0, 0 < alpha < 1 and oversampling >= 1".into(),
            ));
        }
        Ok(SizingConfig {
            multiplier: self.multiplier,
            alpha: self.alpha,
            oversampling: self.oversampling,
            fallback_samples: self.fallback,
            ..SizingConfig::default()
        })
    }

    fn write_config(&self, out: &mut String) {
        let _ = writeln!(out, "multiplier={}", self.multiplier);
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "oversampling={}", self.oversampling);
        let _ = writeln!(out, "fallback={}", self.fallback);
    }
}

#[derive(Debug, Args)]
pub struct WindowSizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Zone to size; required when the input holds several
    #[arg(long = "zone")]
    pub zones: Vec<String>,
    #[command(flatten)]
    pub sizing: SizingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWindowArg {
    Auto,
    Fixed(usize),
}

fn parse_train_window(s: &str) -> Result<TrainWindowArg, String> {
    if s == "auto" {
        return Ok(TrainWindowArg::Auto);
    }
    s.parse::<usize>()
        .map(TrainWindowArg::Fixed)
        .map_err(|_| format!("expected `auto` or a sample count, got {s:?}"))
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    match s.parse::<Protocol>()? {
        Protocol::Adaptive => Err("baseline protocol must be train-once or sliding-fixed".into()),
        p => Ok(p),
    }
}

impl std::fmt::Display for TrainWindowArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainWindowArg::Auto => f.write_str("auto"),
            TrainWindowArg::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Zones to run; all zones when omitted
    #[arg(long = "zone")]
    pub zones: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub lags: usize,
    /// `auto` or a fixed sample count
    #[arg(long, default_value = "auto", value_parser = parse_train_window)]
    pub train_window: TrainWindowArg,
    #[arg(long, default_value_t = 6)]
    pub h0: usize,
    #[arg(long, default_value_t = 1)]
    pub h_min: usize,
    #[arg(long, default_value_t = 24)]
    pub h_max: usize,
    /// Batch MAPE (%) above which the horizon shrinks
    #[arg(long, default_value_t = 20.0)]
    pub mape_upper: f64,
    /// Batch MAPE (%) below which the horizon grows
    #[arg(long, default_value_t = 5.0)]
    pub mape_lower: f64,
    /// First forecast index
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Re-run window sizing every N batches
    #[arg(long)]
    pub resize_every: Option<usize>,
    /// Comma-separated: swr, linear, svr-static, tree, forest, persistence
    #[arg(long, default_value = "swr,linear,svr-static,tree,forest")]
    pub models: String,
    /// Baseline protocol: train-once or sliding-fixed
    #[arg(long, default_value = "train-once", value_parser = parse_protocol)]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 1.0)]
    pub svr_c: f64,
    #[arg(long, default_value_t = 0.01)]
    pub svr_epsilon: f64,
    /// RBF width; defaults to 1/lags
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    #[command(flatten)]
    pub sizing: SizingArgs,
}

impl RunArgs {
    fn svr_params(&self) -> SvrParams {
        SvrParams {
            c: self.svr_c,
            epsilon: self.svr_epsilon,
            gamma: self.svr_gamma.unwrap_or(1.0 / self.lags.max(1) as f64),
            ..SvrParams::for_lags(self.lags)
        }
    }

    fn engine_config(&self) -> Result<EngineConfig, CliError> {
        let train_window = match self.train_window {
            TrainWindowArg::Auto => TrainWindow::Auto(self.sizing.to_config()?),
            TrainWindowArg::Fixed(n) => TrainWindow::Fixed(n),
        };
        let cfg = EngineConfig {
            model: ModelSpec::Svr(self.svr_params()),
            lags: self.lags,
            train_window,
            h0: self.h0,
            horizon: HorizonRule {
                h_min: self.h_min,
                h_max: self.h_max,
                mape_upper: self.mape_upper,
                mape_lower: self.mape_lower,
            },
            warmup: self.warmup,
            resize_every: self.resize_every,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn models(&self) -> Result<Vec<String>, CliError> {
        let mut out: Vec<String> = Vec::new();
        for m in self.models.split(',').map(str::trim).filter(|m| !m.is_empty()) {
            if !ALL_MODELS.contains(&m) {
                return Err(CliError::Usage(format!(
                    "unknown model {m:?}; expected one of {}",
                    ALL_MODELS.join(", ")
                )));
            }
            if out.iter().any(|o| o == m) {
                return Err(CliError::Usage(format!("model {m:?} listed twice")));
            }
            out.push(m.to_string());
        }
        if out.is_empty() {
            return Err(CliError::Usage("--models is empty".into()));
        }
        Ok(out)
    }

    fn baseline_spec(&self, label: &str) -> ModelSpec {
        match label {
            "linear" => ModelSpec::Linear,
            "svr-static" => ModelSpec::Svr(self.svr_params()),
            "tree" => ModelSpec::tree(),
            "forest" => ModelSpec::Forest(ForestParams {
                n_trees: self.n_trees,
                ..ForestParams::for_lags(self.lags)
            }),
            _ => ModelSpec::Persistence,
        }
    }

    fn write_config(&self, command: &str, with_models: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version={FORMAT_VERSION}");
        let _ = writeln!(out, "command={command}");
        let _ = writeln!(out, "input={}", self.input.display());
        for z in &self.zones {
            let _ = writeln!(out, "zone={z}");
        }
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "lags={}", self.lags);
        let _ = writeln!(out, "train-window={}", self.train_window);
        let _ = writeln!(out, "h0={}", self.h0);
        let _ = writeln!(out, "h-min={}", self.h_min);
        let _ = writeln!(out, "h-max={}", self.h_max);
        let _ = writeln!(out, "mape-upper={}", self.mape_upper);
        let _ = writeln!(out, "mape-lower={}", self.mape_lower);
        if let Some(w) = self.warmup {
            let _ = writeln!(out, "warmup={w}");
        }
        if let Some(r) = self.resize_every {
            let _ = writeln!(out, "resize-every={r}");
        }
        if with_models {
            let _ = writeln!(out, "models={}", self.models);
            let _ = writeln!(out, "protocol={}", self.protocol.as_str());
        }
        let _ = writeln!(out, "svr-c={}", self.svr_c);
        let _ = writeln!(out, "svr-epsilon={}", self.svr_epsilon);
        let _ = writeln!(out, "svr-gamma={}", self.svr_params().gamma);
        let _ = writeln!(out, "n-trees={}", self.n_trees);
        self.sizing.write_config(&mut out);
        out
    }
}

/// Reads `key=value` lines into `--key value` arguments. Blank lines and
/// `#` comments are skipped; `format_version` and `command` are ignored so
/// a saved `run_config.txt` can be fed back in.
pub fn config_file_args(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim();
        if key == "format_version" || key == "command" {
            continue;
        }
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key {key:?}", n + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(k, _)| k))
}

/// Splices config-file values in front of the command-line flags. Single
/// valued flags are overridden by later occurrences; for repeatable flags
/// the file entries are dropped when the command line names any.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            config_path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let sub_at = strs
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 1)
        .ok_or_else(|| CliError::Usage("--config needs a subcommand".into()))?;
    let path = PathBuf::from(path);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let cli_flags: Vec<&str> = strs[sub_at + 1..].iter().filter_map(|a| flag_name(a)).collect();
    let mut merged: Vec<OsString> = args[..=sub_at].to_vec();
    for (key, value) in config_file_args(&text)? {
        if key == "zone" && cli_flags.contains(&"zone") {
            continue;
        }
        merged.push(format!("--{key}").into());
        merged.push(value.into());
    }
    merged.extend_from_slice(&args[sub_at + 1..]);
    Ok(merged)
}

fn read_input(path: &Path) -> Result<BTreeMap<String, LoadSeries>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_load_csv(&text)?)
}

fn select_zones(all: BTreeMap<String, LoadSeries>, wanted: &[String]) -> Result<Vec<LoadSeries>, CliError> {
    if wanted.is_empty() {
        return Ok(all.into_values().collect());
    }
    let mut all = all;
    let mut out = Vec::new();
    for z in wanted {
        if out.iter().any(|s: &LoadSeries| s.zone_id() == z) {
            continue;
        }
        let series = all
            .remove(z)
            .ok_or_else(|| CliError::Usage(format!("zone {z:?} not found in input")))?;
        out.push(series);
    }
    out.sort_by(|a, b| a.zone_id().cmp(b.zone_id()));
    Ok(out)
}

/// Zone ids become directory names; anything outside `[A-Za-z0-9._-]` is
/// replaced.
fn zone_dir(out_dir: &Path, zone: &str) -> PathBuf {
    let safe: String = zone
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    let safe = if safe.is_empty() || safe.chars().all(|c| c == '.') {
        format!("zone_{safe}")
    } else {
        safe
    };
    out_dir.join(safe)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn write_trace(dir: &Path, label: &str, trace: &ForecastTrace) -> Result<(), CliError> {
    write_file(&dir.join(format!("{label}.steps.csv")), &trace.steps_csv())?;
    write_file(&dir.join(format!("{label}.batches.csv")), &trace.batches_csv())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let start: DateTime<Utc> = match &args.start {
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map_err(|e| CliError::Usage(format!("--start {s:?}: {e}")))?
            .with_timezone(&Utc),
        None => default_start_time(),
    };
    let zones = if args.zones.is_empty() {
        vec!["SYNTH".to_string()]
    } else {
        args.zones.clone()
    };
    let drift = args.drift_onset.map(|onset_index| Drift {
        onset_index,
        level_shift_mw: args.drift_shift,
        amplitude_scale: args.drift_scale,
    });
    let mut series = Vec::with_capacity(zones.len());
    for (i, zone) in zones.iter().enumerate() {
        let cfg = SynthConfig {
            zone_id: zone.clone(),
            start_time: start,
            length: args.length,
            step: args.step,
            base_level: args.base,
            components: vec![SeasonalComponent {
                period_seconds: args.period,
                amplitude_mw: args.amp,
                phase_radians: args.phase,
            }],
            noise_sigma: args.noise,
            drift,
            seed: args.seed.wrapping_add(i as u64),
        };
        series.push(generate_synthetic(&cfg)?);
    }
    let output = args.output.clone().unwrap_or_else(|| args.out_dir.join("load.csv"));
    write_file(&output, &write_load_csv(series.iter()))?;

    let mut cfg = String::new();
    let _ = writeln!(cfg, "format_version={FORMAT_VERSION}");
    let _ = writeln!(cfg, "command=synth");
    for z in &zones {
        let _ = writeln!(cfg, "zone={z}");
    }
    let _ = writeln!(cfg, "seed={}", args.seed);
    let _ = writeln!(cfg, "length={}", args.length);
    let _ = writeln!(cfg, "step={}", args.step);
    let _ = writeln!(cfg, "period={}", args.period);
    let _ = writeln!(cfg, "amp={}", args.amp);
    let _ = writeln!(cfg, "phase={}", args.phase);
    let _ = writeln!(cfg, "base={}", args.base);
    let _ = writeln!(cfg, "noise={}", args.noise);
    let _ = writeln!(cfg, "start={}", start.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    if let Some(onset) = args.drift_onset {
        let _ = writeln!(cfg, "drift-onset={onset}");
        let _ = writeln!(cfg, "drift-shift={}", args.drift_shift);
        let _ = writeln!(cfg, "drift-scale={}", args.drift_scale);
    }
    let mut cfg_path = output.clone().into_os_string();
    cfg_path.push(".run_config.txt");
    write_file(Path::new(&cfg_path), &cfg)?;
    println!("{}", args.length * zones.len());
    Ok(())
}

fn cmd_window_size(args: &WindowSizeArgs) -> Result<(), CliError> {
    let all = read_input(&args.input)?;
    if args.zones.len() > 1 {
        return Err(CliError::Usage("window-size takes at most one --zone".into()));
    }
    if args.zones.is_empty() && all.len() > 1 {
        return Err(CliError::Usage(format!(
            "input holds {} zones; pick one with --zone",
            all.len()
        )));
    }
    let series = select_zones(all, &args.zones)?.remove(0);
    let cfg = args.sizing.to_config()?;
    let sizing = training_window_size(&series, &cfg).map_err(|source| CliError::Spectral {
        zone: series.zone_id().to_string(),
        source,
    })?;
    println!("{}", sizing.to_csv_row());
    Ok(())
}

fn cmd_forecast(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.engine_config()?;
    let zones = select_zones(read_input(&args.input)?, &args.zones)?;
    let traces: Vec<Result<ForecastTrace, CliError>> = zones
        .par_iter()
        .map(|s| {
            run_swr(s, &cfg).map_err(|source| CliError::Engine {
                zone: s.zone_id().to_string(),
                source,
            })
        })
        .collect();
    let traces: Vec<ForecastTrace> = traces.into_iter().collect::<Result<_, _>>()?;
    write_file(&args.out_dir.join("run_config.txt"), &args.write_config("forecast", false))?;
    for t in &traces {
        let dir = zone_dir(&args.out_dir, &t.zone);
        write_trace(&dir, "swr", t)?;
        if let Some(s) = &t.sizing {
            write_file(&dir.join("window_sizing.csv"), &format!("{SIZING_HEADER}\n{}\n", s.to_csv_row()))?;
        }
        println!(
            "zone={} mape_pct={:.4} steps={} batches={} window_samples={}",
            t.zone,
            t.overall_mape()?,
            t.steps.len(),
            t.batches.len(),
            t.batches.first().map_or(0, |b| b.window_samples)
        );
    }
    Ok(())
}

fn run_zone(args: &RunArgs, cfg: &EngineConfig, models: &[String], series: &LoadSeries) -> Result<Vec<(String, ForecastTrace)>, CliError> {
    let wrap = |source| CliError::Engine {
        zone: series.zone_id().to_string(),
        source,
    };
    let swr = run_swr(series, cfg).map_err(wrap)?;
    let schedule = swr.schedule();
    let mut out = Vec::with_capacity(models.len());
    for label in models {
        let mut trace = if label == "swr" {
            swr.clone()
        } else {
            let spec = args.baseline_spec(label);
            run_baseline(series, cfg, &spec, args.protocol, Some(&schedule)).map_err(wrap)?
        };
        trace.model = label.clone();
        out.push((label.clone(), trace));
    }
    Ok(out)
}

/// Concatenates each model's steps across zones for the pooled report.
fn pooled(per_zone: &[Vec<(String, ForecastTrace)>]) -> Vec<ForecastTrace> {
    let mut out: Vec<ForecastTrace> = Vec::new();
    for zone in per_zone {
        for (i, (_, t)) in zone.iter().enumerate() {
            if out.len() <= i {
                let mut empty = t.clone();
                empty.zone = "all".into();
                empty.steps.clear();
                empty.batches.clear();
                empty.sizing = None;
                out.push(empty);
            }
            out[i].steps.extend(t.steps.iter().cloned());
            out[i].batches.extend(t.batches.iter().cloned());
        }
    }
    out
}

fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.engine_config()?;
    let models = args.models()?;
    let zones = select_zones(read_input(&args.input)?, &args.zones)?;
    let results: Vec<Result<Vec<(String, ForecastTrace)>, CliError>> =
        zones.par_iter().map(|s| run_zone(args, &cfg, &models, s)).collect();
    let per_zone: Vec<Vec<(String, ForecastTrace)>> = results.into_iter().collect::<Result<_, _>>()?;

    write_file(&args.out_dir.join("run_config.txt"), &args.write_config("compare", true))?;
    for zone in &per_zone {
        let traces: Vec<ForecastTrace> = zone.iter().map(|(_, t)| t.clone()).collect();
        let dir = zone_dir(&args.out_dir, &traces[0].zone);
        for (label, t) in zone {
            write_trace(&dir, label, t)?;
        }
        if let Some(s) = zone.iter().find_map(|(_, t)| t.sizing.as_ref()) {
            write_file(&dir.join("window_sizing.csv"), &format!("{SIZING_HEADER}\n{}\n", s.to_csv_row()))?;
        }
        write_file(&dir.join("report.csv"), &compare_report(&traces)?.to_csv())?;
    }
    let report: MetricReport = compare_report(&pooled(&per_zone))?;
    let csv = report.to_csv();
    write_file(&args.out_dir.join("report.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::WindowSize(a) => cmd_window_size(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
