use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow_tree, TreeModel, TreeParams};
use super::{LagMatrix, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered at each split.
    pub mtry: usize,
    pub seed: u64,
    /// Resample rows with replacement per tree; off only in tests.
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn for_lags(lags: usize) -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 2,
            mtry: lags.div_ceil(3).max(1),
            seed: 0,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    seed: u64,
}

impl ForestModel {
    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Tree `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
/// forest is identical however the trees are scheduled.
pub fn fit_forest(m: &LagMatrix, params: &ForestParams) -> Result<ForestModel, ModelError> {
    let (n, k) = (m.len(), m.lags);
    if n == 0 {
        return Err(ModelError::TooFewRows { needed: 1, found: 0 });
    }
    if params.n_trees == 0 || params.mtry == 0 || params.mtry > k {
        return Err(ModelError::InvalidParameter(format!(
            "need n_trees >= 1 and 1 <= mtry <= {k}, got n_trees={} mtry={}",
            params.n_trees, params.mtry
        )));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mtry = params.mtry;
            grow_tree(m, rows, &tree_params, move || {
                let mut f = sample(&mut rng, k, mtry).into_vec();
                f.sort_unstable();
                f
            })
        })
        .collect();
    Ok(ForestModel {
        trees,
        seed: params.seed,
    })
}
