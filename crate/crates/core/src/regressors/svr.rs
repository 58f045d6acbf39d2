//! Epsilon-SVR with an RBF kernel, trained by sequential minimal optimization.
//!
//! The dual is written over `2n` box-constrained variables `beta = [a; a*]`
//! with signs `s = [+1; -1]`:
//!
//! ```text
//! min  1/2 beta' Q beta + p' beta   s.t.  s' beta = 0,  0 <= beta <= C
//! Q_tu = s_t s_u K(x_t, x_u),  p = [eps - y; eps + y]
//! ```
//!
//! Each iteration picks the maximal violating pair with second-order
//! selection (Fan, Chen & Lin 2005), solves the two-variable subproblem in
//! closed form and updates the gradient. The model keeps rows with non-zero
//! `a - a*` as support vectors.

use super::{LagMatrix, ModelError};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    /// Box constraint.
    pub c: f64,
    /// Half-width of the insensitive tube (scaled units).
    pub epsilon: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap, in units of `2n` pair updates.
    pub max_passes: usize,
}

impl SvrParams {
    pub fn for_lags(lags: usize) -> Self {
        Self {
            c: 1.0,
            epsilon: 0.01,
            gamma: 1.0 / lags.max(1) as f64,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    support_vectors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
    epsilon: f64,
    converged: bool,
    iterations: usize,
    dual_objective: f64,
}

impl SvrModel {
    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    /// `a_i - a*_i` for each support vector.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Value of the (maximization form) dual objective at the solution.
    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, d)| d * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

pub fn fit_svr_smo(m: &LagMatrix, params: &SvrParams) -> Result<SvrModel, ModelError> {
    let n = m.len();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    let SvrParams {
        c,
        epsilon,
        gamma,
        tol,
        max_passes,
    } = *params;
    if !(c > 0.0 && epsilon >= 0.0 && gamma > 0.0 && tol > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "need C > 0, epsilon >= 0, gamma > 0, tol > 0; got {params:?}"
        )));
    }

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf_kernel(&m.rows[i], &m.rows[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let k = |a: usize, b: usize| kernel[(a % n) * n + (b % n)];

    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - m.targets[t] } else { epsilon + m.targets[t - n] })
        .collect();
    let mut beta = vec![0.0; l];
    let mut grad = p.clone();

    let in_up = |t: usize, b: f64| if t < n { b < c } else { b > 0.0 };
    let in_low = |t: usize, b: f64| if t < n { b > 0.0 } else { b < c };

    let max_iter = max_passes.max(1).saturating_mul(l);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            if in_up(t, beta[t]) {
                let v = -sign(t) * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..l {
            if !in_low(t, beta[t]) {
                continue;
            }
            let v = sign(t) * grad[t];
            g_max2 = g_max2.max(v);
            let diff = g_max + v;
            if diff > 0.0 {
                let mut quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -diff * diff / quad;
                if obj < best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        if g_max + g_max2 < tol {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (beta[i], beta[j]);
        let q_ij = sign(i) * sign(j) * k(i, j);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if sign(i) != sign(j) {
            debug_assert!((quad - (k(i, i) + k(j, j) + 2.0 * q_ij)).abs() < 1e-9);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        beta[i] = ai;
        beta[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (si, sj) = (sign(i), sign(j));
        for t in 0..l {
            let st = sign(t);
            grad[t] += st * (si * k(t, i) * di + sj * k(t, j) * dj);
        }
    }

    // bias from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let y_g = sign(t) * grad[t];
        let at_upper = beta[t] >= c;
        let at_lower = beta[t] <= 0.0;
        if at_upper {
            if sign(t) < 0.0 {
                ub = ub.min(y_g);
            } else {
                lb = lb.max(y_g);
            }
        } else if at_lower {
            if sign(t) > 0.0 {
                ub = ub.min(y_g);
            } else {
                lb = lb.max(y_g);
            }
        } else {
            n_free += 1;
            sum_free += y_g;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };

    let objective = 0.5 * (0..l).map(|t| beta[t] * (grad[t] + p[t])).sum::<f64>();

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        let d = beta[i] - beta[i + n];
        if d != 0.0 {
            support_vectors.push(m.rows[i].clone());
            coefficients.push(d);
        }
    }

    Ok(SvrModel {
        support_vectors,
        coefficients,
        bias: -rho,
        gamma,
        c,
        epsilon,
        converged,
        iterations,
        dual_objective: -objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, epsilon: f64, gamma: f64) -> SvrParams {
        SvrParams {
            c,
            epsilon,
            gamma,
            tol: 1e-9,
            max_passes: 10_000,
        }
    }

    #[test]
    fn kernel_examples() {
        let a = [0.3, -1.2, 4.0];
        assert_eq!(rbf_kernel(&a, &a, 2.0), 1.0);
        let v = rbf_kernel(&[1.0, 2.0], &[0.0, 1.0], 0.5);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        let (x, y) = ([0.1, 0.7, -2.0], [1.5, -0.3, 0.2]);
        assert_eq!(rbf_kernel(&x, &y, 0.3), rbf_kernel(&y, &x, 0.3));
    }

    #[test]
    fn zero_targets_give_empty_model() {
        let m = LagMatrix::from_rows(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.5]],
            vec![0.0; 3],
        )
        .unwrap();
        let model = fit_svr_smo(&m, &SvrParams::for_lags(2)).unwrap();
        assert!(model.coefficients().is_empty());
        assert_eq!(model.bias(), 0.0);
        assert_eq!(model.predict(&[3.0, -2.0]), 0.0);
        assert!(model.converged());
    }

    #[test]
    fn dual_constraints_and_kkt() {
        let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![(i as f64 / 5.0) - 2.5]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| (1.3 * r[0]).sin()).collect();
        let m = LagMatrix::from_rows(rows.clone(), targets.clone()).unwrap();
        let p = params(5.0, 0.05, 0.8);
        let model = fit_svr_smo(&m, &p).unwrap();
        assert!(model.converged());
        let sum: f64 = model.coefficients().iter().sum();
        assert!(sum.abs() < 1e-6, "equality constraint {sum}");
        for d in model.coefficients() {
            assert!(d.abs() <= p.c + 1e-12);
        }
        // free support vectors sit on the tube boundary
        for (sv, d) in model.support_vectors().iter().zip(model.coefficients()) {
            if d.abs() < p.c - 1e-9 {
                let idx = rows.iter().position(|r| r == sv).unwrap();
                let resid = (targets[idx] - model.predict(sv)).abs();
                assert!((resid - p.epsilon).abs() < 1e-6, "resid {resid}");
            }
        }
        // everything else is inside the tube up to the tolerance, or a bounded SV
        for (r, y) in rows.iter().zip(&targets) {
            let is_bounded_sv = model
                .support_vectors()
                .iter()
                .zip(model.coefficients())
                .any(|(sv, d)| sv == r && d.abs() >= p.c - 1e-9);
            if !is_bounded_sv {
                assert!((y - model.predict(r)).abs() <= p.epsilon + 1e-6);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0, (i as f64).cos()]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
        let m = LagMatrix::from_rows(rows, targets).unwrap();
        let p = SvrParams {
            max_passes: 0,
            tol: 1e-12,
            ..params(100.0, 0.0, 1.0)
        };
        let model = fit_svr_smo(&m, &p).unwrap();
        assert!(!model.converged());
        assert_eq!(model.iterations(), 80);
        assert!(model.predict(&[0.5, 0.5]).is_finite());
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = LagMatrix::from_rows(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        assert!(fit_svr_smo(&m, &params(0.0, 0.1, 1.0)).is_err());
        assert!(fit_svr_smo(&m, &params(1.0, -0.1, 1.0)).is_err());
        assert!(fit_svr_smo(&m, &params(1.0, 0.1, 0.0)).is_err());
        let one = LagMatrix::from_rows(vec![vec![0.0]], vec![0.0]).unwrap();
        assert!(matches!(fit_svr_smo(&one, &params(1.0, 0.1, 1.0)), Err(ModelError::TooFewRows { .. })));
    }
}
