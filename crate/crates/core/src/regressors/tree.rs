use super::{LagMatrix, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        count: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

impl TreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { count, .. } => Some(*count),
                _ => None,
            })
            .collect()
    }
}

struct Builder<'a, F> {
    data: &'a LagMatrix,
    params: &'a TreeParams,
    pick_features: F,
    nodes: Vec<Node>,
}

impl<F: FnMut() -> Vec<usize>> Builder<'_, F> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let mean = rows.iter().map(|&r| self.data.targets[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value: mean,
            count: rows.len(),
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.data.targets[r]).sum();
        let mean = sum / n as f64;
        let sse: f64 = rows.iter().map(|&r| (self.data.targets[r] - mean).powi(2)).sum();
        let scale = 1e-12 * (1.0 + mean * mean) * n as f64;
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || n < 2 * min_leaf || sse <= scale {
            return self.leaf(&rows);
        }

        let features = (self.pick_features)();
        let Some((feature, threshold, _)) = best_split(self.data, &rows, &features, min_leaf, sse) else {
            return self.leaf(&rows);
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.data.rows[r][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, count: n });
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Best (feature, threshold, gain) by SSE reduction. Candidate thresholds
/// are midpoints between consecutive distinct values; ties keep the lowest
/// feature index, then the lowest threshold.
pub(crate) fn best_split(
    data: &LagMatrix,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    parent_sse: f64,
) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| data.targets[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| data.targets[r].powi(2)).sum();
    let tie = 1e-12 * (1.0 + parent_sse);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for s in 1..n {
            let y = data.targets[order[s - 1]];
            sum_l += y;
            sq_l += y * y;
            if s < min_leaf || n - s < min_leaf {
                continue;
            }
            let (lo, hi) = (data.rows[order[s - 1]][f], data.rows[order[s]][f]);
            if !(lo < hi) {
                continue;
            }
            let (nl, nr) = (s as f64, (n - s) as f64);
            let sum_r = total - sum_l;
            let sq_r = total_sq - sq_l;
            let sse_l = (sq_l - sum_l * sum_l / nl).max(0.0);
            let sse_r = (sq_r - sum_r * sum_r / nr).max(0.0);
            let gain = parent_sse - sse_l - sse_r;
            let better = match best {
                None => gain > tie,
                Some((_, _, g)) => gain > g + tie,
            };
            if better {
                let mut threshold = 0.5 * (lo + hi);
                if !(threshold < hi) {
                    threshold = lo;
                }
                best = Some((f, threshold, gain));
            }
        }
    }
    best
}

pub(crate) fn grow_tree<F: FnMut() -> Vec<usize>>(
    data: &LagMatrix,
    rows: Vec<usize>,
    params: &TreeParams,
    pick_features: F,
) -> TreeModel {
    let mut b = Builder {
        data,
        params,
        pick_features,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    TreeModel { nodes: b.nodes }
}

pub fn fit_tree(m: &LagMatrix, params: &TreeParams) -> Result<TreeModel, ModelError> {
    if m.is_empty() {
        return Err(ModelError::TooFewRows { needed: 1, found: 0 });
    }
    let all: Vec<usize> = (0..m.lags).collect();
    Ok(grow_tree(m, (0..m.len()).collect(), params, || all.clone()))
}
