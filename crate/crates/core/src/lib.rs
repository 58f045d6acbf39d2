//! Short-term load forecasting by sliding-window regression.
//!
//! The engine refits a regressor on a recent window of load samples, sized
//! from the dominant period of the history, and forecasts a batch of steps
//! whose length adapts to the recent forecast error.

pub mod cli;
pub mod data;
pub mod engine;
pub mod metrics;
pub mod regressors;
pub mod spectral;

pub use data::{generate_synthetic, parse_load_csv, LoadSeries, SynthConfig};
pub use engine::{run_baseline, run_swr, EngineConfig, ForecastTrace, Protocol, TrainWindow};
pub use metrics::{compare_report, MetricReport};
pub use regressors::ModelSpec;
pub use spectral::{training_window_size, SizingConfig, WindowSizing};
