use super::LagMatrix;

/// Floor applied to column standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-column z-scoring; the last entry of `means`/`stds` is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(STD_FLOOR))
}

/// Population mean and standard deviation per feature column and target.
pub fn fit_scaler(m: &LagMatrix) -> Scaler {
    let mut means = Vec::with_capacity(m.lags + 1);
    let mut stds = Vec::with_capacity(m.lags + 1);
    for j in 0..m.lags {
        let (mu, sd) = mean_std(m.rows.iter().map(move |r| r[j]));
        means.push(mu);
        stds.push(sd);
    }
    let (mu, sd) = mean_std(m.targets.iter().copied());
    means.push(mu);
    stds.push(sd);
    Scaler { means, stds }
}

impl Scaler {
    pub fn lags(&self) -> usize {
        self.means.len() - 1
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.means[j]) / self.stds[j])
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, v)| v * self.stds[j] + self.means[j])
            .collect()
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        let k = self.lags();
        (y - self.means[k]) / self.stds[k]
    }

    pub fn inverse_target(&self, z: f64) -> f64 {
        let k = self.lags();
        z * self.stds[k] + self.means[k]
    }

    pub fn transform(&self, m: &LagMatrix) -> LagMatrix {
        LagMatrix {
            rows: m.rows.iter().map(|r| self.transform_row(r)).collect(),
            targets: m.targets.iter().map(|&y| self.transform_target(y)).collect(),
            lags: m.lags,
            row_times: m.row_times.clone(),
        }
    }
}
