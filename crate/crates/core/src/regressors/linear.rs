use nalgebra::{DMatrix, DVector};

use super::{LagMatrix, ModelError};

/// Diagonal jitter added to the normal equations.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

/// Ordinary least squares on centred columns; the intercept is recovered
/// from the means.
pub fn fit_linear(m: &LagMatrix) -> Result<LinearModel, ModelError> {
    let (n, k) = (m.len(), m.lags);
    if n < k + 1 {
        return Err(ModelError::TooFewRows {
            needed: k + 1,
            found: n,
        });
    }
    let x_mean: Vec<f64> = (0..k)
        .map(|j| m.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = m.targets.iter().sum::<f64>() / n as f64;

    let x = DMatrix::from_fn(n, k, |i, j| m.rows[i][j] - x_mean[j]);
    let y = DVector::from_iterator(n, m.targets.iter().map(|v| v - y_mean));
    let mut gram = x.transpose() * &x;
    for j in 0..k {
        gram[(j, j)] += RIDGE_JITTER;
    }
    let rhs = x.transpose() * y;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ModelError::InvalidParameter("singular normal equations".into()))?,
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}
