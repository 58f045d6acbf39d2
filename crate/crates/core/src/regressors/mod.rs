//! Lag features, scaling, and the regressors the engine can drive.
//!
//! Every model maps a lag vector `[x(t-1), ..., x(t-k)]` (most recent first)
//! to a one-step-ahead value. Models are fit in z-scored units; a
//! [`Predictor`] carries the scaler so callers work in MW throughout.

mod forest;
mod linear;
mod scaler;
mod svr;
mod tree;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use linear::{fit_linear, LinearModel, RIDGE_JITTER};
pub use scaler::{fit_scaler, Scaler};
pub use svr::{fit_svr_smo, rbf_kernel, SvrModel, SvrParams};
pub use tree::{fit_tree, TreeModel, TreeParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("window of length {len} is too short for {lags} lags")]
    WindowTooShort { len: usize, lags: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} training rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite input or output")]
    NonFinite,
}

/// Rows of lag vectors with their one-step-ahead targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lags: usize,
    /// Index of each target within the source window.
    pub row_times: Vec<usize>,
}

impl LagMatrix {
    /// Builds a matrix from explicit rows; used for hand-made fixtures.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, ModelError> {
        let lags = rows.first().map(Vec::len).unwrap_or(0);
        if rows.len() != targets.len() {
            return Err(ModelError::DimensionMismatch {
                expected: rows.len(),
                found: targets.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != lags) {
            return Err(ModelError::DimensionMismatch {
                expected: lags,
                found: r.len(),
            });
        }
        if rows.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let row_times = (0..rows.len()).collect();
        Ok(Self {
            rows,
            targets,
            lags,
            row_times,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn make_lag_matrix(window: &[f64], lags: usize) -> Result<LagMatrix, ModelError> {
    if lags == 0 {
        return Err(ModelError::InvalidParameter("lag count must be >= 1".into()));
    }
    if window.len() <= lags {
        return Err(ModelError::WindowTooShort {
            len: window.len(),
            lags,
        });
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let n = window.len() - lags;
    let rows = (0..n)
        .map(|i| (0..lags).map(|j| window[i + lags - 1 - j]).collect())
        .collect();
    let targets = window[lags..].to_vec();
    Ok(LagMatrix {
        rows,
        targets,
        lags,
        row_times: (lags..window.len()).collect(),
    })
}

/// Regressor choice plus its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Svr(SvrParams),
    Linear,
    Tree(TreeParams),
    Forest(ForestParams),
    /// Repeats the most recent lag; a reference and test stub.
    Persistence,
}

impl ModelSpec {
    /// Default hyperparameters for `lags` inputs.
    pub fn svr(lags: usize) -> Self {
        ModelSpec::Svr(SvrParams::for_lags(lags))
    }

    pub fn forest(lags: usize) -> Self {
        ModelSpec::Forest(ForestParams::for_lags(lags))
    }

    pub fn tree() -> Self {
        ModelSpec::Tree(TreeParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svr(_) => "svr",
            ModelSpec::Linear => "linear",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Persistence => "persistence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Svr(SvrModel),
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Persistence,
}

/// One-step-ahead forecaster over lag vectors in MW.
pub trait OneStep {
    fn lags(&self) -> usize;
    fn predict(&self, lags: &[f64]) -> Result<f64, ModelError>;
}

/// A fitted model together with the scaler it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    scaler: Scaler,
    model: FittedModel,
    lags: usize,
}

impl Predictor {
    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    /// False only for an SVR fit that hit its iteration limit.
    pub fn converged(&self) -> bool {
        match &self.model {
            FittedModel::Svr(m) => m.converged(),
            _ => true,
        }
    }
}

impl OneStep for Predictor {
    fn lags(&self) -> usize {
        self.lags
    }

    fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.lags {
            return Err(ModelError::DimensionMismatch {
                expected: self.lags,
                found: x.len(),
            });
        }
        if let FittedModel::Persistence = self.model {
            return Ok(x[0]);
        }
        let z = self.scaler.transform_row(x);
        let out = match &self.model {
            FittedModel::Svr(m) => m.predict(&z),
            FittedModel::Linear(m) => m.predict(&z),
            FittedModel::Tree(m) => m.predict(&z),
            FittedModel::Forest(m) => m.predict(&z),
            FittedModel::Persistence => unreachable!(),
        };
        let y = self.scaler.inverse_target(out);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(ModelError::NonFinite)
        }
    }
}

/// Fits `spec` on the lag matrix of `window`. `seed` feeds the forest.
pub fn fit_model(spec: &ModelSpec, window: &[f64], lags: usize, seed: u64) -> Result<Predictor, ModelError> {
    let raw = make_lag_matrix(window, lags)?;
    fit_on_matrix(spec, &raw, seed)
}

pub fn fit_on_matrix(spec: &ModelSpec, raw: &LagMatrix, seed: u64) -> Result<Predictor, ModelError> {
    let scaler = fit_scaler(raw);
    let scaled = scaler.transform(raw);
    let model = match spec {
        ModelSpec::Svr(p) => FittedModel::Svr(fit_svr_smo(&scaled, p)?),
        ModelSpec::Linear => FittedModel::Linear(fit_linear(&scaled)?),
        ModelSpec::Tree(p) => FittedModel::Tree(fit_tree(&scaled, p)?),
        ModelSpec::Forest(p) => FittedModel::Forest(fit_forest(&scaled, &ForestParams { seed, ..p.clone() })?),
        ModelSpec::Persistence => FittedModel::Persistence,
    };
    Ok(Predictor {
        scaler,
        model,
        lags: raw.lags,
    })
}
