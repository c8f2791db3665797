//! Soft-margin SVM solved in the dual by sequential minimal optimization.
//!
//! The dual problem in minimisation form is
//!
//! ```text
//! min_α  ½ αᵀQα − Σα    s.t. 0 ≤ α_i ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs are chosen with second-order information (maximal violating
//! `i`, then the `j` with the largest guaranteed decrease), and the solver
//! stops once the maximal KKT violation drops below the tolerance.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{check_binary, check_nonempty, Kernel, ModelConfig, ModelKind, ModelParams, TrainedModel};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::util::dot;

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 512 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub gamma: f64,
    pub degree: u32,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// `w = Σ α_i y_i x_i`, only for the linear kernel.
    pub primal_weights: Option<Vec<f64>>,
}

pub fn kernel_value(kernel: Kernel, gamma: f64, degree: u32, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => dot(a, b),
        Kernel::Gaussian => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
        Kernel::Polynomial => (gamma * dot(a, b) + 1.0).powi(degree as i32),
    }
}

impl SvmParams {
    /// Signed margin `Σ α_i y_i K(x_i, x) + b`.
    pub fn decision(&self, row: &[f64]) -> f64 {
        if let Some(w) = &self.primal_weights {
            return dot(w, row) + self.bias;
        }
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * kernel_value(self.kernel, self.gamma, self.degree, sv, row))
            .sum::<f64>()
            + self.bias
    }
}

/// Lazily computed rows of `Q`, with FIFO eviction once the byte budget is
/// exhausted.
struct QRows<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    kernel: Kernel,
    gamma: f64,
    degree: u32,
    cache: HashMap<usize, Rc<[f64]>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> QRows<'a> {
    fn new(rows: &'a [Vec<f64>], y: &'a [f64], kernel: Kernel, gamma: f64, degree: u32) -> Self {
        let n = rows.len().max(1);
        Self {
            rows,
            y,
            kernel,
            gamma,
            degree,
            cache: HashMap::new(),
            order: VecDeque::new(),
            capacity: (CACHE_BYTES / (8 * n)).max(2),
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        kernel_value(self.kernel, self.gamma, self.degree, &self.rows[i], &self.rows[j])
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = self.cache.get(&i) {
            return Rc::clone(r);
        }
        let r: Rc<[f64]> = (0..self.rows.len()).map(|t| self.y[i] * self.y[t] * self.k(i, t)).collect();
        if self.cache.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.cache.insert(i, Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective `Σα − ½ αᵀQα` (maximisation form).
    pub objective: f64,
}

/// Dual objective `Σα − ½ αᵀQα` for an explicit kernel matrix.
pub fn dual_objective(alpha: &[f64], y: &[f64], kernel_matrix: &[Vec<f64>]) -> f64 {
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        for j in 0..alpha.len() {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel_matrix[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Solves the dual for labels `y ∈ {-1, +1}` and box bound `c`.
#[allow(clippy::too_many_arguments)]
pub fn smo_solve(
    rows: &[Vec<f64>],
    y: &[f64],
    kernel: Kernel,
    gamma: f64,
    degree: u32,
    c: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SmoSolution> {
    let n = rows.len();
    let mut q = QRows::new(rows, y, kernel, gamma, degree);
    let diag: Vec<f64> = (0..n).map(|i| q.k(i, i)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of the minimisation objective
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;

    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t], c) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            let qi = q.row(i);
            for t in 0..n {
                if !in_low(alpha[t], y[t], c) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    // K_ii + K_tt - 2 K_it, expressed through Q
                    let mut a = diag[i] + diag[t] - 2.0 * y[i] * y[t] * qi[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if gmax - gmin < tolerance {
            break;
        }
        if iterations >= max_iterations {
            let bias = compute_bias(&alpha, y, &grad, c);
            let gap = duality_gap(&alpha, y, &grad, c, bias);
            return Err(Error::Convergence { iterations, gap });
        }
        iterations += 1;

        let qi = q.row(i);
        let qj = q.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * qi[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * qi[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    let bias = compute_bias(&alpha, y, &grad, c);
    // Σα − ½αᵀQα with Qα = grad + 1
    let objective = alpha.iter().zip(&grad).map(|(a, g)| a - 0.5 * a * (g + 1.0)).sum();
    Ok(SmoSolution {
        alpha,
        bias,
        iterations,
        objective,
    })
}

/// Bias from free multipliers, or the midpoint of the feasible interval when
/// every multiplier is at a bound.
fn compute_bias(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    -rho
}

/// Primal minus dual objective for the current iterate.
fn duality_gap(alpha: &[f64], y: &[f64], grad: &[f64], c: f64, bias: f64) -> f64 {
    let mut quad = 0.0;
    let mut hinge = 0.0;
    let mut sum_alpha = 0.0;
    for t in 0..alpha.len() {
        let q_alpha = grad[t] + 1.0;
        quad += alpha[t] * q_alpha;
        sum_alpha += alpha[t];
        // f(x_t) = y_t (Qα)_t + b
        let margin = y[t] * (y[t] * q_alpha + bias);
        hinge += (1.0 - margin).max(0.0);
    }
    quad + c * hinge - sum_alpha
}

fn auto_gamma(x: &FeatureMatrix) -> f64 {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let mean_var = (0..d)
        .map(|j| {
            let col = x.column(j);
            let mu = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0
    }
}

/// Trains a kernel SVM; labels are mapped to `±1` internally.
pub fn train_svm(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<TrainedModel> {
    check_nonempty(x)?;
    check_binary(x)?;
    if !(cfg.penalty_weight > 0.0) {
        return Err(Error::Config("SVM penalty_weight must be positive".into()));
    }
    let gamma = match cfg.kernel_gamma {
        Some(g) if g > 0.0 => g,
        Some(g) => return Err(Error::Config(format!("kernel_gamma must be positive, got {g}"))),
        None => auto_gamma(x),
    };
    let y: Vec<f64> = x.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let c = 1.0 / (cfg.penalty_weight * x.n_rows() as f64);
    let sol = smo_solve(
        &x.rows,
        &y,
        cfg.kernel,
        gamma,
        cfg.polynomial_degree,
        c,
        cfg.tolerance,
        cfg.max_iterations,
    )?;
    log::debug!("SMO finished after {} iterations", sol.iterations);

    let (mut support_vectors, mut dual_coef) = (Vec::new(), Vec::new());
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x.rows[t].clone());
            dual_coef.push(a * y[t]);
        }
    }
    let primal_weights = (cfg.kernel == Kernel::Linear).then(|| {
        let mut w = vec![0.0; x.n_cols()];
        for (sv, coef) in support_vectors.iter().zip(&dual_coef) {
            for (wi, v) in w.iter_mut().zip(sv) {
                *wi += coef * v;
            }
        }
        w
    });
    Ok(TrainedModel {
        kind: ModelKind::Svm,
        config: cfg.clone(),
        feature_columns: x.column_names.clone(),
        params: ModelParams::Svm(SvmParams {
            kernel: cfg.kernel,
            gamma,
            degree: cfg.polynomial_degree,
            support_vectors,
            dual_coef,
            bias: sol.bias,
            primal_weights,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetKind, Partition};

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        let cols = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        FeatureMatrix::new(cols, rows, labels, DatasetKind::Baseline, Partition::Train).unwrap()
    }

    #[test]
    fn two_points_midpoint_boundary() {
        let x = matrix(vec![vec![-1.0, 2.0], vec![3.0, 2.0]], vec![0, 1]);
        let m = train_svm(&x, &ModelConfig { penalty_weight: 1e-3, ..ModelConfig::default() }).unwrap();
        let ModelParams::Svm(p) = &m.params else { unreachable!() };
        assert_eq!(p.support_vectors.len(), 2);
        assert!(p.decision(&[1.0, 2.0]).abs() < 1e-9);
        assert!((p.decision(&[3.0, 2.0]) - 1.0).abs() < 1e-9);
        assert!((p.decision(&[-1.0, 2.0]) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn convergence_error_carries_gap() {
        let x = matrix(vec![vec![0.0], vec![1.0], vec![0.4], vec![0.6]], vec![0, 1, 1, 0]);
        let cfg = ModelConfig {
            penalty_weight: 1e-3,
            max_iterations: 0,
            ..ModelConfig::default()
        };
        match train_svm(&x, &cfg) {
            Err(Error::Convergence { iterations: 0, gap }) => assert!(gap > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
